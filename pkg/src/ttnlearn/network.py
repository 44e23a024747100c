"""Tree-based tensor networks: storage, evaluation, orthogonalization,
higher-order SVD truncation, sums, and change of tree by node permutation.

A network stores one core tensor per tree node.  A leaf core has shape
``(N, r)`` with ``N`` the feature-basis dimension; an interior core has shape
``(r_1, ..., r_s, r)`` with one mode per child in the tree's (canonical) child
order followed by the node's own rank, which is 1 at the root.  All cores use
the package's row-major linearization (see :mod:`ttnlearn.linalg`).
"""

from __future__ import annotations

import json
import warnings
from math import prod, sqrt

import numpy as np

from .bases import LegendreBasis
from .linalg import dematricize, matricize, mode_multiply, truncated_svd
from .tree import DimensionTree, is_admissible, move_scope, permute_topology

__all__ = [
    "TreeTensorNetwork",
    "random_network",
    "evaluate",
    "node_values",
    "complement_values",
    "assemble_full",
    "orthogonalize",
    "alpha_orthogonalize",
    "singular_spectrum",
    "truncate",
    "storage_complexity",
    "add",
    "permute_representation",
    "norm",
    "save",
    "load",
    "network_to_dict",
    "network_from_dict",
]


class TreeTensorNetwork:
    """A function in tree-based tensor format.

    Parameters
    ----------
    tree : DimensionTree
    cores : sequence of ndarray
        One core per tree slot, shaped as described in the module docstring.
    bases : mapping or LegendreBasis
        Feature basis per (1-based) dimension; a single basis is shared across
        all dimensions when given directly.
    orth_state : str or tuple
        ``"none"``, ``"all"`` (all-orthogonal) or ``("alpha", node)``.
    """

    def __init__(self, tree, cores, bases, orth_state="none"):
        self.tree = tree
        self.cores = [np.asarray(c, dtype=float) for c in cores]
        if isinstance(bases, LegendreBasis):
            bases = {dim: bases for dim in range(1, tree.d + 1)}
        self.bases = dict(bases)
        self.orth_state = orth_state
        self._validate()

    def _validate(self):
        tree = self.tree
        if len(self.cores) != tree.num_nodes:
            raise ValueError("one core per tree node required")
        for a in tree.nodes:
            core = self.cores[a]
            if tree.is_leaf(a):
                if core.ndim != 2:
                    raise ValueError("leaf cores must be matrices")
                dim = tree.leaf_dim(a)
                if core.shape[0] != self.bases[dim].dimension:
                    raise ValueError(
                        f"leaf core for dimension {dim} does not match basis"
                    )
            else:
                kids = tree.children(a)
                if core.ndim != len(kids) + 1:
                    raise ValueError("interior core order mismatch")
                for slot, c in enumerate(kids):
                    if core.shape[slot] != self.cores[c].shape[-1]:
                        raise ValueError(
                            f"core shapes inconsistent between node {a} and "
                            f"child {c}"
                        )
        if self.cores[tree.root].shape[-1] != 1:
            raise ValueError("root rank must be 1")

    def rank(self, node):
        return self.cores[node].shape[-1]

    @property
    def ranks(self):
        return tuple(c.shape[-1] for c in self.cores)

    @property
    def leaf_dims(self):
        return {dim: b.dimension for dim, b in self.bases.items()}

    def with_cores(self, cores, orth_state="none"):
        return TreeTensorNetwork(self.tree, cores, self.bases, orth_state)

    def __call__(self, xs):
        return evaluate(self, xs)

    def __repr__(self):
        return (
            f"TreeTensorNetwork(d={self.tree.d}, "
            f"ranks={self.ranks}, orth_state={self.orth_state!r})"
        )


def random_network(tree, ranks, bases, rng):
    """Network with standard-normal cores of the given per-slot ranks."""
    if isinstance(bases, LegendreBasis):
        bases = {dim: bases for dim in range(1, tree.d + 1)}
    ranks = [int(r) for r in ranks]
    cores = []
    for a in tree.nodes:
        if tree.is_leaf(a):
            shape = (bases[tree.leaf_dim(a)].dimension, ranks[a])
        else:
            shape = tuple(ranks[c] for c in tree.children(a)) + (ranks[a],)
        cores.append(rng.standard_normal(shape))
    return TreeTensorNetwork(tree, cores, bases)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def node_values(net, xs):
    """Upward pass: values of the node functions u^alpha at the sample points.

    Returns a list of matrices ``U[a]`` of shape (n, r_a).
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[1] != net.tree.d:
        raise ValueError(f"points must have dimension {net.tree.d}")
    tree = net.tree
    U = [None] * tree.num_nodes
    for a in tree.by_decreasing_level():
        core = net.cores[a]
        if tree.is_leaf(a):
            dim = tree.leaf_dim(a)
            U[a] = net.bases[dim].eval(xs[:, dim - 1]) @ core
        else:
            kids = tree.children(a)
            m = np.tensordot(U[kids[0]], core, axes=([1], [0]))
            for c in kids[1:]:
                m = np.einsum("nj,nj...->n...", U[c], m)
            U[a] = m
    return U


def complement_values(net, alpha, upward):
    """Downward pass: values of the complementary functions w^beta along the
    path from the root to `alpha` (inclusive).

    Returns a dict ``{beta: (n, r_beta) matrix}`` covering the root, the
    ascendants of `alpha`, and `alpha` itself.
    """
    tree = net.tree
    n = upward[tree.root].shape[0]
    W = {tree.root: np.ones((n, 1))}
    path = list(reversed([alpha] + tree.ascendants(alpha)))
    for beta in path[1:]:
        g = tree.parent(beta)
        core = net.cores[g]
        m = np.tensordot(W[g], core, axes=([1], [core.ndim - 1]))
        axes = list(tree.children(g))
        for c in tree.children(g):
            if c == beta:
                continue
            pos = axes.index(c) + 1
            m = np.einsum("nj,nj...->n...", upward[c], np.moveaxis(m, pos, 1))
            axes.remove(c)
        W[beta] = m
    return W


def evaluate(net, xs):
    """Evaluate the network at a batch of points in [-1, 1]^d."""
    return node_values(net, xs)[net.tree.root][:, 0]


def assemble_full(net, max_entries=10**7):
    """Full coefficient tensor over the leaf bases, modes ordered by dimension.

    Only for small problems; guarded at `max_entries` entries.
    """
    tree = net.tree
    total = prod(net.leaf_dims[v] for v in range(1, tree.d + 1))
    if total > max_entries:
        raise ValueError("full tensor exceeds the size guard")
    full = [None] * tree.num_nodes
    for a in tree.by_decreasing_level():
        if tree.is_leaf(a):
            full[a] = net.cores[a]
            continue
        t = net.cores[a]
        labels = [("slot", c) for c in tree.children(a)] + ["out"]
        for c in tree.children(a):
            pos = labels.index(("slot", c))
            t = np.tensordot(t, full[c], axes=([pos], [full[c].ndim - 1]))
            labels = (
                labels[:pos]
                + labels[pos + 1 :]
                + [("dim", v) for v in sorted(tree.subset(c))]
            )
            if t.size > max_entries * 4:
                raise ValueError("intermediate tensor exceeds the size guard")
        dim_labels = sorted(
            (l for l in labels if l != "out"), key=lambda l: l[1]
        )
        perm = [labels.index(l) for l in dim_labels] + [labels.index("out")]
        full[a] = t.transpose(perm)
    return full[tree.root][..., 0]


# ---------------------------------------------------------------------------
# Orthogonalization and singular values
# ---------------------------------------------------------------------------


def orthogonalize(net):
    """All-orthogonal representation with identical evaluations.

    By decreasing level, QR-factorize the transposed last-mode matricization
    of each non-root core, keep the orthonormal factor, and push the
    triangular factor into the parent's child slot.  Ranks can only shrink.
    """
    tree = net.tree
    cores = [c.copy() for c in net.cores]
    for a in tree.by_decreasing_level(include_root=False):
        core = cores[a]
        last = core.ndim - 1
        m = matricize(core, [last])
        q, r = np.linalg.qr(m.T)
        cores[a] = dematricize(q.T, core.shape[:-1] + (q.shape[1],), [last])
        cores[tree.parent(a)] = mode_multiply(
            cores[tree.parent(a)], tree.child_slot(a), r
        )
    return net.with_cores(cores, orth_state="all")


def _gram_matrices(net, targets=None):
    """Gram matrices of the complementary functions {w^alpha_k}.

    `net` must be all-orthogonal.  Computed by the downward recursion; returns
    a dict over the requested non-root nodes (default: all of them).
    """
    tree = net.tree
    if targets is None:
        needed = {a for a in tree.nodes if a != tree.root}
    else:
        needed = set()
        for a in targets:
            needed.add(a)
            needed.update(b for b in tree.ascendants(a) if b != tree.root)
    grams = {}
    for b in tree.by_increasing_level(include_root=False):
        if b not in needed:
            continue
        g = tree.parent(b)
        core = net.cores[g]
        if g == tree.root:
            mixed = core
        else:
            mixed = mode_multiply(core, core.ndim - 1, grams[g])
        slot = tree.child_slot(b)
        gram = matricize(core, [slot]) @ matricize(mixed, [slot]).T
        grams[b] = 0.5 * (gram + gram.T)
    return grams


def _descending_eigh(gram):
    w, v = np.linalg.eigh(gram)
    return w[::-1], v[:, ::-1]


def alpha_orthogonalize(net, alpha):
    """Gauge transformation making the node system at `alpha` orthonormal.

    After the call both the node functions of the other nodes and the
    complementary functions {w^alpha_k} are orthonormal, so the linear
    subproblem at `alpha` has an orthonormal dictionary.  For the root this
    reduces to :func:`orthogonalize`.
    """
    net = orthogonalize(net)
    tree = net.tree
    if alpha == tree.root:
        return net
    gram = _gram_matrices(net, targets=[alpha])[alpha]
    w, v = _descending_eigh(gram)
    lam_max = max(float(w[0]), 0.0)
    r = gram.shape[0]
    if lam_max == 0.0:
        # Zero function: keep the identity gauge.
        lmat = np.eye(r)
        linv = np.eye(r)
    else:
        floor = 1e-14 * lam_max
        if np.any(w < floor):
            warnings.warn(
                "near-singular Gram matrix regularized during "
                "alpha-orthogonalization"
            )
        w = np.maximum(w, floor)
        lmat = v * np.sqrt(w)
        linv = (v / np.sqrt(w)).T
    cores = [c.copy() for c in net.cores]
    g = tree.parent(alpha)
    cores[g] = mode_multiply(cores[g], tree.child_slot(alpha), linv)
    cores[alpha] = mode_multiply(
        cores[alpha], cores[alpha].ndim - 1, lmat.T
    )
    return net.with_cores(cores, orth_state=("alpha", alpha))


def singular_spectrum(net):
    """Singular values of every non-root matricization of the function.

    Computed from the all-orthogonal form and the downward Gram recursion,
    never via the full tensor.  Returns ``{node: nonincreasing ndarray}``.
    """
    net = orthogonalize(net)
    grams = _gram_matrices(net)
    spectra = {}
    for a, gram in grams.items():
        w, _ = _descending_eigh(gram)
        spectra[a] = np.sqrt(np.maximum(w, 0.0))
    return spectra


def truncate(net, ranks=None, eps=None):
    """Higher-order SVD truncation (rank map or relative precision target).

    In precision mode the per-node retained rank is the minimal one whose
    tail energy is at most ``eps**2 / (#T - 1)`` times the total, which
    guarantees a relative error of at most `eps`.  In rank mode the leading
    `ranks[a]` singular directions are kept at each node (clamped to what is
    available).  The result is all-orthogonal.
    """
    if (ranks is None) == (eps is None):
        raise ValueError("specify exactly one of ranks / eps")
    if eps is not None and not 0.0 <= eps < 1.0:
        raise ValueError("eps must be in [0, 1)")
    tree = net.tree
    if ranks is not None:
        requested = [int(r) for r in ranks]
        requested[tree.root] = 1
        ok, reason = is_admissible(tree, requested, net.leaf_dims)
        if not ok:
            raise ValueError(f"inadmissible target ranks: {reason}")
    net = orthogonalize(net)
    grams = _gram_matrices(net)
    cores = [c.copy() for c in net.cores]
    split_tol = None if eps is None else eps**2 / (tree.num_nodes - 1)
    for a in tree.by_decreasing_level(include_root=False):
        w, v = _descending_eigh(grams[a])
        w = np.maximum(w, 0.0)
        if ranks is not None:
            keep = max(1, min(int(ranks[a]), w.size))
        else:
            total = float(w.sum())
            if total == 0.0:
                keep = 1
            else:
                tails = total - np.cumsum(w)
                ok = np.flatnonzero(tails <= split_tol * total)
                keep = int(ok[0]) + 1 if ok.size else w.size
        u = v[:, :keep]
        cores[a] = mode_multiply(cores[a], cores[a].ndim - 1, u.T)
        cores[tree.parent(a)] = mode_multiply(
            cores[tree.parent(a)], tree.child_slot(a), u.T
        )
    # The projections leave parent cores non-orthogonal; restore the
    # all-orthogonal postcondition.
    return orthogonalize(net.with_cores(cores))


def storage_complexity(tree, ranks, leaf_dims):
    """Number of stored core parameters for the given tree/rank/basis sizes."""
    total = 0
    for a in tree.nodes:
        if tree.is_leaf(a):
            total += leaf_dims[tree.leaf_dim(a)] * ranks[a]
        else:
            total += ranks[a] * prod(ranks[c] for c in tree.children(a))
    return int(total)


def norm(net):
    """L2 norm of the function (Frobenius norm of the orthogonalized root)."""
    return float(np.linalg.norm(orthogonalize(net).cores[net.tree.root]))


def add(a, b):
    """Sum of two networks on the same tree and bases.

    Leaf cores are column-concatenated and interior cores are block-diagonal;
    ranks add nodewise except at the root, where the two root cores occupy
    adjacent child blocks of the same rank-1 output.
    """
    if a.tree != b.tree:
        raise ValueError("networks must share the same tree")
    if a.leaf_dims != b.leaf_dims:
        raise ValueError("networks must share the same bases")
    tree = a.tree
    cores = []
    for i in tree.nodes:
        ca, cb = a.cores[i], b.cores[i]
        if tree.is_leaf(i):
            cores.append(np.hstack([ca, cb]))
            continue
        root = i == tree.root
        out_a, out_b = ca.shape[-1], cb.shape[-1]
        shape = tuple(
            ca.shape[k] + cb.shape[k] for k in range(ca.ndim - 1)
        ) + ((1,) if root else (out_a + out_b,))
        core = np.zeros(shape)
        idx_a = tuple(slice(0, s) for s in ca.shape[:-1])
        idx_b = tuple(
            slice(ca.shape[k], ca.shape[k] + cb.shape[k])
            for k in range(cb.ndim - 1)
        )
        if root:
            core[idx_a + (slice(0, 1),)] += ca
            core[idx_b + (slice(0, 1),)] += cb
        else:
            core[idx_a + (slice(0, out_a),)] = ca
            core[idx_b + (slice(out_a, out_a + out_b),)] = cb
        cores.append(core)
    return TreeTensorNetwork(tree, cores, a.bases)


class MoveTooLargeError(ValueError):
    """A permutation move would materialize a transfer tensor beyond the cap."""


def permute_representation(net, move, eps, max_entries=10**7):
    """Change of tree by the node permutation `move` at relative precision eps.

    The network is gamma-orthogonalized (gamma the deepest common ascendant of
    the two swapped nodes), the cores of the affected ascendants are
    contracted into a transfer tensor at gamma, and the new-tree cores are
    recovered by truncated SVDs at per-split tolerance ``eps/sqrt(#affected)``
    in decreasing level order.  Swapping two children of the same parent
    leaves the representation unchanged.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must be in [0, 1)")
    tree = net.tree
    gamma, affected = move_scope(tree, move)
    if tree.parent(move.nu) == tree.parent(move.mu):
        return net
    net = alpha_orthogonalize(net, gamma)
    cores = [c.copy() for c in net.cores]
    transfer = cores[gamma]
    labels = list(tree.children(gamma)) + ["out"]
    for eta in sorted(affected, key=tree.level):
        pos = labels.index(eta)
        grown = transfer.size // transfer.shape[pos] * prod(
            cores[eta].shape[:-1]
        )
        if grown > max_entries:
            raise MoveTooLargeError(
                "transfer tensor would exceed the size guard"
            )
        transfer = np.tensordot(
            transfer, cores[eta], axes=([pos], [cores[eta].ndim - 1])
        )
        labels = labels[:pos] + labels[pos + 1 :] + list(tree.children(eta))
    new_tree = permute_topology(tree, move)
    split_tol = eps / sqrt(len(affected))
    for eta in sorted(affected, key=new_tree.level, reverse=True):
        row_labels = list(new_tree.children(eta))
        row_pos = [labels.index(l) for l in row_labels]
        mat = matricize(transfer, row_pos)
        res = truncated_svd(mat, rel_tail_tol=split_tol)
        keep = res.retained_rank
        row_shape = tuple(transfer.shape[p] for p in row_pos)
        cores[eta] = res.left.reshape(row_shape + (keep,))
        col_shape = [
            transfer.shape[k]
            for k in range(transfer.ndim)
            if k not in row_pos
        ]
        transfer = (res.singular_values[:, None] * res.right.T).reshape(
            [keep] + col_shape
        )
        labels = [eta] + [
            l for k, l in enumerate(labels) if k not in row_pos
        ]
    order = [labels.index(c) for c in new_tree.children(gamma)]
    cores[gamma] = transfer.transpose(order + [labels.index("out")])
    return TreeTensorNetwork(new_tree, cores, net.bases)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def network_to_dict(net):
    """Versioned plain-dict form of a network (canonical node order)."""
    tree = net.tree
    order = tree.canonical_order()
    index = {slot: k for k, slot in enumerate(order)}
    if isinstance(net.orth_state, tuple):
        orth = f"alpha:{index[net.orth_state[1]]}"
    else:
        orth = str(net.orth_state)
    return {
        "format": "ttnlearn-network",
        "version": 1,
        "tree": tree.to_text(),
        "bases": {
            str(dim): {"family": "legendre", "max_degree": b.max_degree}
            for dim, b in sorted(net.bases.items())
        },
        "cores": [
            {
                "shape": list(net.cores[slot].shape),
                "data": net.cores[slot].ravel().tolist(),
            }
            for slot in order
        ],
        "orth_state": orth,
    }


def network_from_dict(doc):
    if doc.get("format") != "ttnlearn-network" or doc.get("version") != 1:
        raise ValueError("unsupported network document")
    tree = DimensionTree.from_text(doc["tree"])
    bases = {
        int(dim): LegendreBasis(max_degree=spec["max_degree"])
        for dim, spec in doc["bases"].items()
    }
    cores = [
        np.asarray(c["data"], dtype=float).reshape(c["shape"])
        for c in doc["cores"]
    ]
    orth = doc["orth_state"]
    if orth.startswith("alpha:"):
        orth = ("alpha", int(orth.split(":")[1]))
    return TreeTensorNetwork(tree, cores, bases, orth_state=orth)


def save(net, path):
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh, sort_keys=True)


def load(path):
    with open(path) as fh:
        return network_from_dict(json.load(fh))
