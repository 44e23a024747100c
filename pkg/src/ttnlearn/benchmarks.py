"""Benchmark experiments: synthetic test functions, sampling, trial runs."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .adaptation import AdaptConfig, adaptive_fit
from .bases import LegendreBasis
from .learning import risks
from .network import evaluate, storage_complexity
from .tree import build_tree

__all__ = [
    "FUNCTION_DIMS",
    "FUNCTION_DEGREES",
    "ExperimentSpec",
    "test_function",
    "optimal_tree_indicator",
    "sample_data",
    "run_trial",
    "run_experiment",
]

FUNCTION_DIMS = {"i": 6, "ii": 10, "iii": 10, "iv": 16, "v": 8}
FUNCTION_DEGREES = {"i": 10, "ii": 5, "iii": 10, "iv": 5, "v": 8}


def _g(s, t):
    """Bivariate interaction g(s, t) = sum_{i=0}^{3} s^i t^i."""
    return sum(s**i * t**i for i in range(4))


def _pair_sum(x):
    return sum(_g(x[:, 2 * k], x[:, 2 * k + 1]) for k in range(x.shape[1] // 2))


def _h(t, s):
    return (2.0 + t * s) ** 2 / 9.0


def test_function(fid, x):
    """Evaluate benchmark function `fid` on a batch of points in [-1,1]^d."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = FUNCTION_DIMS[fid]
    if x.shape[1] != d:
        raise ValueError(f"function {fid!r} expects dimension {d}")
    if fid == "i":
        return (
            10.0 + 2.0 * x[:, 0] + x[:, 2] + 2.0 * x[:, 3] - x[:, 4]
        ) ** -2.0
    if fid == "ii":
        return _pair_sum(x)
    if fid == "iii":
        return np.log1p(_pair_sum(x) ** 2)
    if fid == "iv":
        return sum(_g(x[:, v - 1], x[:, v]) for v in range(1, d))
    if fid == "v":
        level1 = [_h(x[:, 2 * k], x[:, 2 * k + 1]) for k in range(4)]
        level2 = [_h(level1[0], level1[1]), _h(level1[2], level1[3])]
        return _h(level2[0], level2[1])
    raise KeyError(fid)


def optimal_tree_indicator(fid, tree):
    """Per-function predicate for the learned tree being the optimal one.

    Returns None for functions without a stated predicate.
    """
    subsets = tree.subsets()
    if fid == "i":
        return frozenset({1, 3, 4, 5}) in subsets
    if fid in ("ii", "iii"):
        d = FUNCTION_DIMS[fid]
        return all(
            frozenset({2 * k - 1, 2 * k}) in subsets
            for k in range(1, d // 2 + 1)
        )
    if fid == "v":
        return subsets == build_tree("balanced", 8).subsets()
    return None


@dataclass
class ExperimentSpec:
    """A multi-trial benchmark experiment."""

    function: str
    n_train: int
    n_test: int = 10_000
    noise: float = 0.0
    tree_kind: str = "balanced"
    trials: int = 10
    seed: int = 0
    degree: int | None = None
    config: AdaptConfig = field(default_factory=AdaptConfig)
    output: str | None = None

    def __post_init__(self):
        if self.function not in FUNCTION_DIMS:
            raise ValueError(f"unknown function {self.function!r}")
        if self.noise < 0:
            raise ValueError("noise must be nonnegative")

    @property
    def d(self):
        return FUNCTION_DIMS[self.function]

    @property
    def effective_degree(self):
        return (
            FUNCTION_DEGREES[self.function]
            if self.degree is None
            else self.degree
        )


def sample_data(spec, rng):
    """Draw training and test samples for an experiment.

    Inputs are i.i.d. uniform on [-1,1]^d; outputs are ``u(x) + noise * z``
    with standard normal z (also on the test outputs, matching the observed
    response).  The noiseless test values are returned separately so the
    approximation error can be estimated.
    """
    d = spec.d
    xs = rng.uniform(-1.0, 1.0, (spec.n_train, d))
    ys = test_function(spec.function, xs)
    if spec.noise > 0:
        ys = ys + spec.noise * rng.standard_normal(spec.n_train)
    xt = rng.uniform(-1.0, 1.0, (spec.n_test, d))
    ut = test_function(spec.function, xt)
    yt = ut + spec.noise * rng.standard_normal(spec.n_test) if spec.noise > 0 else ut
    return xs, ys, xt, yt, ut


def run_trial(spec, seed_seq):
    """One independent adaptive fit from a randomly permuted starting tree."""
    rng = np.random.default_rng(seed_seq)
    leaf_order = [int(v) for v in rng.permutation(spec.d) + 1]
    tree = build_tree(spec.tree_kind, spec.d, leaf_order)
    bases = LegendreBasis(spec.effective_degree)
    xs, ys, xt, yt, ut = sample_data(spec, rng)
    net, records = adaptive_fit((xs, ys), bases, spec.config, rng, tree)
    test = risks(lambda p: evaluate(net, p), xt, yt)
    approx = float(np.mean((ut - evaluate(net, xt)) ** 2))
    best_idx = int(
        np.argmin([rec.validation_risk for rec in records])
    )
    denom = float(np.mean(ys**2))
    cv = records[best_idx].cv_risk
    cv_rel = float(np.sqrt(max(cv, 0.0) / denom)) if np.isfinite(cv) else None
    optimal = optimal_tree_indicator(spec.function, net.tree)
    return {
        "leaf_order": leaf_order,
        "test_error": test["relative"],
        "cv_error": cv_rel,
        "squared_error": approx,
        "storage": storage_complexity(net.tree, net.ranks, net.leaf_dims),
        "tree": net.tree.to_text(),
        "optimal_tree": optimal,
        "trace": [dataclasses.asdict(rec) for rec in records],
    }


def _range(values):
    values = [v for v in values if v is not None]
    return [min(values), max(values)] if values else None


def run_experiment(spec):
    """Run `spec.trials` independent trials and aggregate their reports."""
    streams = np.random.SeedSequence(spec.seed).spawn(spec.trials)
    trials = [run_trial(spec, streams[k]) for k in range(spec.trials)]
    flags = [t["optimal_tree"] for t in trials if t["optimal_tree"] is not None]
    return {
        "spec": {
            "function": spec.function,
            "d": spec.d,
            "degree": spec.effective_degree,
            "n_train": spec.n_train,
            "n_test": spec.n_test,
            "noise": spec.noise,
            "tree_kind": spec.tree_kind,
            "trials": spec.trials,
            "seed": spec.seed,
        },
        "test_error_range": _range([t["test_error"] for t in trials]),
        "cv_error_range": _range([t["cv_error"] for t in trials]),
        "squared_error_range": _range([t["squared_error"] for t in trials]),
        "storage_range": _range([t["storage"] for t in trials]),
        "optimal_tree_frequency": (
            sum(flags) / len(flags) if flags else None
        ),
        "trials": trials,
    }
