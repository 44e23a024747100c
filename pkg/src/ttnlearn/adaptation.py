"""Rank adaptation, stochastic tree optimization, and the combined scheme."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import sqrt

import numpy as np

from .learning import AlsConfig, TrainingData, als_fit
from .network import (
    MoveTooLargeError,
    add,
    evaluate,
    norm,
    orthogonalize,
    permute_representation,
    random_network,
    singular_spectrum,
    storage_complexity,
    truncate,
)
from .tree import admissible_projection, draw_move_sequence, is_admissible

__all__ = [
    "AdaptConfig",
    "IterationRecord",
    "CandidateNodeSet",
    "select_rank_increase",
    "rank_adaptive_fit",
    "tree_optimize",
    "adaptive_fit",
]


@dataclass
class AdaptConfig:
    """Settings for rank/tree adaptation and stopping."""

    theta_star: float = 0.8
    gamma1: float = 2.0
    gamma2: float = 2.0
    gamma3: float = 2.0
    n_tree_trials: int = 100
    eps_goal: float = 1e-14
    tau_overfit: float = 10.0
    max_iterations: int = 50
    validation_fraction: float = 0.2
    eps_machine: float = 1e-15
    correction_sweeps: int = 5
    tree_adaptation: bool = True
    m_max: int | None = None
    transfer_cap: int = 10**7
    als: AlsConfig = field(default_factory=AlsConfig)

    def __post_init__(self):
        if not 0.0 <= self.theta_star <= 1.0:
            raise ValueError("theta_star must lie in [0, 1]")
        if self.tau_overfit <= 1.0:
            raise ValueError("tau_overfit must exceed 1")


@dataclass
class IterationRecord:
    """Snapshot of one adaptation iteration."""

    iteration: int
    tree: str
    ranks: list
    empirical_risk: float
    cv_risk: float
    validation_risk: float
    storage: int
    tree_accepted: bool = False


@dataclass
class CandidateNodeSet:
    """Outcome of the node-selection step of rank adaptation."""

    eligible: tuple
    selected: tuple
    scores: dict


def _canonical_ranks(net):
    tree = net.tree
    return [
        [sorted(tree.subset(a)), int(net.rank(a))]
        for a in tree.canonical_order()
    ]


def _storage(net):
    return storage_complexity(net.tree, net.ranks, net.leaf_dims)


def _repair_increment(tree, base, target, leaf_dims):
    """Lower incremented ranks until the map is admissible again.

    `base` is admissible; only entries with ``target > base`` are ever
    reverted, so the loop terminates.
    """
    ranks = list(target)
    while True:
        ok, _ = is_admissible(tree, ranks, leaf_dims)
        if ok:
            return ranks
        reverted = False
        for a in tree.nodes:
            if ranks[a] <= base[a]:
                continue
            ranks[a] = base[a]
            reverted = True
            ok, _ = is_admissible(tree, ranks, leaf_dims)
            if ok:
                return ranks
        if not reverted:
            return list(base)


def select_rank_increase(net, xs, ys, config, rng):
    """Choose the nodes whose rank is increased next.

    Fits a rank-one correction to the residuals, refits the enriched sum at
    ranks at most r+1, and scores every non-root node by the tail of its
    singular values beyond the current rank.  Returns ``(selection, enriched)``
    where `selection` is ``None`` when no node is eligible (rank saturation).
    """
    tree = net.tree
    leaf_dims = net.leaf_dims
    # Orthogonalization and ALS can shrink ranks into configurations that
    # violate the admissibility bounds; project back before incrementing.
    base = admissible_projection(tree, list(net.ranks), leaf_dims)
    residual = ys - evaluate(net, xs)
    correction0 = random_network(
        tree, [1] * tree.num_nodes, net.bases, rng
    )
    correction, _ = als_fit(
        correction0,
        xs,
        residual,
        replace(config.als, max_sweeps=config.correction_sweeps),
    )
    enriched = add(net, correction)
    target = _repair_increment(
        tree, base, [1 if a == tree.root else base[a] + 1 for a in tree.nodes],
        leaf_dims,
    )
    warm = truncate(enriched, ranks=target)
    refined, _ = als_fit(warm, xs, ys, config.als)
    spectra = singular_spectrum(refined)
    scale = norm(refined)
    scores = {}
    for a in tree.nodes:
        if a == tree.root:
            continue
        s = spectra[a]
        scores[a] = float(np.sqrt(np.sum(s[base[a]:] ** 2)))
    eligible = [
        a
        for a in scores
        if not (tree.is_leaf(a) and base[a] >= leaf_dims[tree.leaf_dim(a)])
        and scores[a] > config.eps_machine * scale
    ]
    if not eligible:
        return None, refined
    eta_max = max(scores[a] for a in eligible)
    thresholds = [config.theta_star] + sorted(
        {
            scores[a] / eta_max
            for a in eligible
            if scores[a] / eta_max < config.theta_star
        },
        reverse=True,
    )
    for theta in thresholds:
        selected = [a for a in eligible if scores[a] >= theta * eta_max]
        trial = [
            base[a] + 1 if a in selected else base[a] for a in tree.nodes
        ]
        ok, _ = is_admissible(tree, trial, leaf_dims)
        if ok:
            return (
                CandidateNodeSet(tuple(eligible), tuple(selected), scores),
                refined,
            )
    # No threshold admits the full increments: keep the admissible part of
    # the theta = 0 selection.
    trial = _repair_increment(
        tree,
        base,
        [base[a] + 1 if a in eligible else base[a] for a in tree.nodes],
        leaf_dims,
    )
    selected = tuple(a for a in eligible if trial[a] > base[a])
    if not selected:
        return None, refined
    return CandidateNodeSet(tuple(eligible), selected, scores), refined


def tree_optimize(net, eps, n_trials, rng, config=None):
    """Stochastic search over node permutations for a cheaper tree.

    Runs `n_trials` proposal rounds.  Each round draws a move sequence on the
    current best tree, applies the change of representation per move at
    precision ``eps / (m + #accepted)``, and accepts the result iff it
    strictly lowers the storage complexity.  The returned representation never
    has higher complexity than the input and differs from it by at most `eps`
    in relative norm (cumulatively).
    """
    config = config or AdaptConfig()
    best = orthogonalize(net)
    best_cost = _storage(best)
    accepted = 0
    for _round in range(n_trials):
        candidate = None
        for _retry in range(5):
            try:
                moves = draw_move_sequence(
                    best.tree,
                    best.ranks,
                    rng,
                    gamma1=config.gamma1,
                    gamma2=config.gamma2,
                    gamma3=config.gamma3,
                    m_max=config.m_max,
                )
            except RuntimeError:
                break
            tol = eps / (len(moves) + accepted) if eps > 0 else 0.0
            try:
                trial = best
                for move in moves:
                    trial = permute_representation(
                        trial, move, tol, max_entries=config.transfer_cap
                    )
            except MoveTooLargeError:
                continue
            candidate = (trial, len(moves))
            break
        if candidate is None:
            continue
        trial, n_moves = candidate
        cost = _storage(trial)
        if cost < best_cost:
            best, best_cost = trial, cost
            accepted += n_moves
    return best


def _relative_cv_error(estimate, ys):
    """Corrected-LOO risk on the relative root scale, clipped to [0, 0.5]."""
    denom = float(np.mean(np.asarray(ys) ** 2))
    value = estimate.corrected_loo
    if not np.isfinite(value) or denom <= 0.0:
        value = estimate.empirical
        if not np.isfinite(value):
            return 0.0
    return float(min(max(sqrt(max(value, 0.0) / max(denom, 1e-300)), 0.0), 0.5))


def adaptive_fit(data, bases, config, rng, tree):
    """Learning scheme with rank and (optionally) tree adaptation.

    Interleaves rank-increase steps with stochastic tree optimization,
    accepting a new tree only when it strictly lowers the storage complexity
    at the current rank stage.  Stops on `max_iterations`, on the validation
    error reaching ``eps_goal`` relatively, or on overfitting
    (validation risk above ``tau_overfit`` times the best seen).  Returns the
    iterate minimizing the validation risk together with the full iteration
    trace.
    """
    if isinstance(data, TrainingData):
        pass
    else:
        xs, ys = data
        data = TrainingData.with_split(
            xs, ys, config.validation_fraction, rng
        )
    xs_t, ys_t = data.train_inputs, data.train_outputs
    xs_v, ys_v = data.val_inputs, data.val_outputs
    if len(ys_v) == 0:
        raise ValueError("adaptive_fit needs a validation split")
    rv0 = float(np.mean(ys_v**2))
    records = []
    val_trace = []
    best = None

    def push(net, estimate, iteration, accepted=False):
        nonlocal best
        rv = float(np.mean((ys_v - evaluate(net, xs_v)) ** 2))
        records.append(
            IterationRecord(
                iteration=iteration,
                tree=net.tree.to_text(),
                ranks=_canonical_ranks(net),
                empirical_risk=float(estimate.empirical),
                cv_risk=float(estimate.corrected_loo),
                validation_risk=rv,
                storage=_storage(net),
            tree_accepted=accepted,
            )
        )
        val_trace.append(rv)
        if best is None or rv < best[0]:
            best = (rv, net)
        return rv

    net0 = random_network(tree, [1] * tree.num_nodes, bases, rng)
    net, estimate = als_fit(net0, xs_t, ys_t, config.als)
    iteration = 1
    rv = push(net, estimate, iteration)

    while iteration < config.max_iterations:
        if rv0 > 0 and sqrt(rv / rv0) <= config.eps_goal:
            break
        if rv >= config.tau_overfit * min(val_trace):
            break
        selection, enriched = select_rank_increase(
            net, xs_t, ys_t, config, rng
        )
        if selection is None:
            break
        # Use the same admissible projection of the current ranks that the
        # selection step used, so the incremented map is admissible.
        base = admissible_projection(net.tree, list(net.ranks), net.leaf_dims)
        next_ranks = [
            base[a] + 1 if a in selection.selected else base[a]
            for a in net.tree.nodes
        ]
        warm = truncate(enriched, ranks=next_ranks)
        net, estimate = als_fit(warm, xs_t, ys_t, config.als)
        iteration += 1
        rv = push(net, estimate, iteration)
        if config.tree_adaptation:
            eps_tree = _relative_cv_error(estimate, ys_t)
            candidate = tree_optimize(
                net, eps_tree, config.n_tree_trials, rng, config
            )
            if _storage(candidate) < _storage(net):
                net, estimate = als_fit(candidate, xs_t, ys_t, config.als)
                iteration += 1
                rv = push(net, estimate, iteration, accepted=True)
    return best[1], records


def rank_adaptive_fit(tree, data, bases, config, rng):
    """Rank adaptation on a fixed tree (no tree optimization)."""
    config = replace(config, tree_adaptation=False)
    return adaptive_fit(data, bases, config, rng, tree)
