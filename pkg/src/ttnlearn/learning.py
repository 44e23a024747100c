"""Empirical risk minimization in a fixed tree-based format.

Alternating least squares over the node cores: each node update is an
ordinary least-squares problem in an orthonormalized dictionary, optionally
restricted to nested sparsity patterns selected by a corrected leave-one-out
estimator of the risk.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bases import leaf_patterns
from .network import (
    alpha_orthogonalize,
    complement_values,
    node_values,
    orthogonalize,
)

__all__ = [
    "TrainingData",
    "AlsConfig",
    "RiskEstimate",
    "node_design_matrix",
    "loo_risk",
    "corrected_loo_risk",
    "solve_with_pattern_selection",
    "als_fit",
    "risks",
]


class TrainingData:
    """Paired samples with an optional held-out validation split."""

    def __init__(self, inputs, outputs, validation_indices=None):
        self.inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        self.outputs = np.asarray(outputs, dtype=float).ravel()
        if len(self.inputs) != len(self.outputs):
            raise ValueError("inputs and outputs must have the same length")
        if len(self.outputs) < 1:
            raise ValueError("need at least one sample")
        if validation_indices is None:
            validation_indices = np.empty(0, dtype=int)
        self.validation_indices = np.asarray(validation_indices, dtype=int)
        mask = np.ones(len(self.outputs), dtype=bool)
        mask[self.validation_indices] = False
        self._train_mask = mask

    @classmethod
    def with_split(cls, inputs, outputs, fraction, rng):
        """Carve out a random validation split of the given fraction."""
        n = len(np.asarray(outputs))
        n_val = int(round(fraction * n))
        idx = rng.permutation(n)[:n_val]
        return cls(inputs, outputs, validation_indices=idx)

    @property
    def n_train(self):
        return int(self._train_mask.sum())

    @property
    def train_inputs(self):
        return self.inputs[self._train_mask]

    @property
    def train_outputs(self):
        return self.outputs[self._train_mask]

    @property
    def val_inputs(self):
        return self.inputs[self.validation_indices]

    @property
    def val_outputs(self):
        return self.outputs[self.validation_indices]


@dataclass
class AlsConfig:
    """Alternating least-squares settings."""

    max_sweeps: int = 30
    stagnation_tol: float = 1e-10
    pattern_selection: bool = True


@dataclass
class RiskEstimate:
    """Risk estimates attached to a fitted network."""

    empirical: float
    loo: float = float("nan")
    corrected_loo: float = float("nan")
    holdout: float | None = None


def _node_feature_factors(net, alpha, xs):
    """Feature block Phi^alpha and complement block W^alpha at the samples."""
    tree = net.tree
    upward = node_values(net, xs)
    if tree.is_leaf(alpha):
        dim = tree.leaf_dim(alpha)
        phi = net.bases[dim].eval(np.asarray(xs, dtype=float)[:, dim - 1])
    else:
        kids = tree.children(alpha)
        phi = upward[kids[0]]
        for c in kids[1:]:
            phi = np.einsum("ni,nj->nij", phi, upward[c]).reshape(
                len(phi), -1
            )
    w = complement_values(net, alpha, upward)[alpha]
    return phi, w


def node_design_matrix(net, alpha, xs):
    """Design matrix of the node system Psi^alpha at the sample points.

    The network is alpha-orthogonalized internally; column j of the result
    multiplies entry j of the row-major vectorization of the core at `alpha`,
    so that ``A @ core.ravel()`` reproduces the network evaluations.
    """
    if net.orth_state != ("alpha", alpha) and not (
        alpha == net.tree.root and net.orth_state == "all"
    ):
        net = alpha_orthogonalize(net, alpha)
    phi, w = _node_feature_factors(net, alpha, xs)
    return np.einsum("np,nk->npk", phi, w).reshape(len(phi), -1)


def _svd_solution(a, y):
    """Least-squares solve returning coefficients, leverages, and rank."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    tol = max(a.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    uy = u[:, :rank].T @ y
    coef = vt[:rank].T @ (uy / s[:rank])
    leverage = np.sum(u[:, :rank] ** 2, axis=1)
    return coef, leverage, rank, s[:rank]


def loo_risk(a, y, coef=None):
    """Closed-form leave-one-out risk of the OLS fit on `a`.

    Uses the leverage identity ``loo = mean(((y - yhat) / (1 - h))**2)``.
    Interpolating fits (some leverage equal to 1) give an infinite estimate.
    If `coef` is omitted the minimum-norm OLS solution is used.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    fitted_coef, leverage, rank, _ = _svd_solution(a, y)
    if coef is None:
        coef = fitted_coef
    if rank < a.shape[1]:
        warnings.warn("rank-deficient design; leverage from pseudo-inverse")
    resid = y - a @ coef
    denom = 1.0 - leverage
    if np.any(denom <= 1e-12):
        return float("inf")
    return float(np.mean((resid / denom) ** 2))


def corrected_loo_risk(a, y, coef=None, gram=None):
    """Leave-one-out risk with the small-sample correction factor
    ``(1 - m/n)**-1 * (1 + trace(G^-1 Gbar) / n)``.

    `gram` is the exact Gram matrix Gbar of the feature system (identity by
    default, which is exact for orthonormalized node systems); G is the
    empirical Gram ``a.T @ a / n``.  Falls back to the plain estimate when
    n <= m.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = a.shape
    base = loo_risk(a, y, coef)
    if m == 0:
        return base
    if n <= m:
        warnings.warn("n <= m: corrected LOO falls back to plain LOO")
        return base
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    tol = max(a.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    kept = s[s > tol]
    if kept.size < m:
        warnings.warn("singular empirical Gram regularized in corrected LOO")
    if gram is None:
        trace = float(np.sum(n / kept**2))
    else:
        v = vt[: kept.size]
        ginv = v.T @ np.diag(n / kept**2) @ v
        trace = float(np.trace(ginv @ gram))
    factor = (1.0 - m / n) ** -1 * (1.0 + trace / n)
    return base * factor


def solve_with_pattern_selection(a, y, patterns):
    """OLS restricted to each candidate pattern; keep the corrected-LOO best.

    Parameters
    ----------
    a : ndarray (n, m)
    y : ndarray (n,)
    patterns : list of int arrays
        Nested column-index sets; scanned in increasing size so ties go to
        the smaller pattern.

    Returns
    -------
    (coefficients, selected_pattern, corrected_loo_score)
        `coefficients` has length m with zeros outside the selected pattern.
    """
    if not patterns:
        raise ValueError("need at least one candidate pattern")
    n, m = a.shape
    best = None
    for pattern in sorted(patterns, key=len):
        pattern = np.asarray(pattern, dtype=int)
        sub = a[:, pattern]
        coef, leverage, rank, s = _svd_solution(sub, y)
        resid = y - sub @ coef
        denom = 1.0 - leverage
        if np.any(denom <= 1e-12):
            score = float("inf")
        else:
            score = float(np.mean((resid / denom) ** 2))
            msub = len(pattern)
            if n > msub and rank == msub:
                trace = float(np.sum(n / s**2))
                score *= (1.0 - msub / n) ** -1 * (1.0 + trace / n)
            elif n <= msub:
                warnings.warn("n <= m in pattern scoring; plain LOO used")
        empirical = float(np.mean(resid**2))
        if best is None or score < best[2]:
            full = np.zeros(m)
            full[pattern] = coef
            best = (full, pattern, score, empirical)
    if not np.isfinite(best[2]):
        warnings.warn(
            "all candidate patterns interpolate or are singular; "
            "keeping the minimum-norm fit of the smallest pattern"
        )
        pattern = np.asarray(sorted(patterns, key=len)[0], dtype=int)
        coef, _, _, _ = _svd_solution(a[:, pattern], y)
        full = np.zeros(m)
        full[pattern] = coef
        resid = y - a[:, pattern] @ coef
        best = (full, pattern, float("inf"), float(np.mean(resid**2)))
    return best


def als_fit(net0, xs, ys, config=None):
    """Alternating least squares over the node cores (leaves to root).

    Each node update alpha-orthogonalizes the network, solves the node's
    least-squares problem (with nested-degree pattern selection at leaves),
    and writes the solution back into the core.  Sweeps stop when the
    empirical risk improves by less than `config.stagnation_tol` relatively.

    Returns the fitted network and a :class:`RiskEstimate` whose LOO fields
    come from the last node solve (the root).
    """
    config = config or AlsConfig()
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.asarray(ys, dtype=float).ravel()
    net = orthogonalize(net0)
    tree = net.tree
    prev = float("inf")
    risk = float("inf")
    last_loo = float("nan")
    last_corrected = float("nan")
    for _sweep in range(config.max_sweeps):
        for alpha in tree.by_decreasing_level():
            net = alpha_orthogonalize(net, alpha)
            a = node_design_matrix(net, alpha, xs)
            shape = net.cores[alpha].shape
            if (
                config.pattern_selection
                and tree.is_leaf(alpha)
                and shape[0] > 1
            ):
                patterns = leaf_patterns(shape[0] - 1, shape[1])
            else:
                patterns = [np.arange(a.shape[1])]
            coef, pattern, score, risk = solve_with_pattern_selection(
                a, ys, patterns
            )
            if not np.isfinite(risk):
                raise RuntimeError(
                    f"non-finite empirical risk at node {alpha}"
                )
            last_corrected = score
            if alpha == tree.root:
                last_loo = loo_risk(a[:, pattern], ys, coef[pattern])
            cores = [c.copy() for c in net.cores]
            cores[alpha] = coef.reshape(shape)
            net = net.with_cores(cores, orth_state="none")
        if risk == 0.0 or (
            prev < float("inf")
            and prev - risk <= config.stagnation_tol * max(prev, 1e-300)
        ):
            break
        prev = risk
    estimate = RiskEstimate(
        empirical=float(risk),
        loo=float(last_loo),
        corrected_loo=float(last_corrected),
    )
    return net, estimate


def risks(model, xs, ys):
    """Empirical squared-loss risk and relative test error of a model.

    `model` is anything callable on a batch of points.  With all-zero
    targets the relative error field holds the absolute RMSE, flagged.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.asarray(ys, dtype=float).ravel()
    if ys.size == 0:
        raise ValueError("empty sample")
    resid = ys - np.asarray(model(xs), dtype=float).ravel()
    empirical = float(np.mean(resid**2))
    denom = float(np.sum(ys**2))
    if denom == 0.0:
        warnings.warn("all-zero targets: returning absolute RMSE")
        relative = float(np.sqrt(np.mean(resid**2)))
    else:
        relative = float(np.sqrt(np.sum(resid**2) / denom))
    return {"empirical": empirical, "relative": relative}
