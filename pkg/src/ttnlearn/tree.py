"""Dimension partition trees over {1, ..., d}.

A dimension partition tree is a rooted tree whose root carries the full set of
dimensions, whose interior nodes' children partition the parent's subset, and
whose leaves are singletons.  Nodes are identified by integer slots that stay
stable across node permutations; subsets are recomputed, never slot ids.
Children of every node are kept in canonical order (lexicographic by sorted
subset) so that two trees that are equal as sets of subsets have identical
structure and serialization.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

__all__ = [
    "DimensionTree",
    "PermutationMove",
    "build_tree",
    "node_relations",
    "is_admissible",
    "permute_topology",
    "move_scope",
    "permutation_distance",
    "draw_move_sequence",
]


def _subset_key(subset):
    return tuple(sorted(subset))


class DimensionTree:
    """Immutable dimension partition tree.

    Parameters
    ----------
    parents : sequence of int
        Parent slot per node; -1 for the root.
    children : sequence of sequence of int
        Child slots per node; empty for leaves.  Stored in canonical order.
    subsets : sequence of iterable of int
        Dimension subset per node (1-based dimensions).
    """

    def __init__(self, parents, children, subsets):
        self._parent = tuple(int(p) for p in parents)
        self._subset = tuple(frozenset(s) for s in subsets)
        self._children = tuple(
            tuple(sorted(c, key=lambda i: _subset_key(self._subset[i])))
            for c in children
        )
        self._validate()
        self._level = self._compute_levels()

    # -- construction helpers -------------------------------------------------

    def _validate(self):
        n = len(self._parent)
        if not (len(self._children) == len(self._subset) == n):
            raise ValueError("inconsistent node arrays")
        roots = [i for i, p in enumerate(self._parent) if p < 0]
        if len(roots) != 1:
            raise ValueError("tree must have exactly one root")
        root = roots[0]
        dims = self._subset[root]
        if dims != frozenset(range(1, len(dims) + 1)):
            raise ValueError("root subset must be {1..d}")
        for i in range(n):
            kids = self._children[i]
            if kids:
                if len(kids) < 2:
                    raise ValueError("interior nodes need >= 2 children")
                union = set()
                total = 0
                for c in kids:
                    if self._parent[c] != i:
                        raise ValueError("parent/child links inconsistent")
                    union |= self._subset[c]
                    total += len(self._subset[c])
                if union != set(self._subset[i]) or total != len(self._subset[i]):
                    raise ValueError(
                        f"children of node {i} do not partition its subset"
                    )
            else:
                if len(self._subset[i]) != 1:
                    raise ValueError("leaves must carry singleton subsets")
        self._root = root

    def _compute_levels(self):
        levels = [0] * len(self._parent)
        stack = [self._root]
        while stack:
            i = stack.pop()
            for c in self._children[i]:
                levels[c] = levels[i] + 1
                stack.append(c)
        return tuple(levels)

    # -- basic accessors -------------------------------------------------------

    @property
    def root(self):
        return self._root

    @property
    def d(self):
        return len(self._subset[self._root])

    @property
    def num_nodes(self):
        return len(self._parent)

    @property
    def nodes(self):
        return range(self.num_nodes)

    def subset(self, node):
        return self._subset[node]

    def parent(self, node):
        p = self._parent[node]
        return None if p < 0 else p

    def children(self, node):
        return self._children[node]

    def is_leaf(self, node):
        return not self._children[node]

    def leaf_dim(self, node):
        (dim,) = self._subset[node]
        return dim

    def level(self, node):
        return self._level[node]

    @property
    def max_level(self):
        return max(self._level)

    @property
    def leaves(self):
        return tuple(i for i in self.nodes if self.is_leaf(i))

    def leaf_for_dim(self, dim):
        for i in self.leaves:
            if self.leaf_dim(i) == dim:
                return i
        raise KeyError(dim)

    def ascendants(self, node):
        """Strict ascendants, from the parent up to the root."""
        out = []
        p = self._parent[node]
        while p >= 0:
            out.append(p)
            p = self._parent[p]
        return out

    def descendants(self, node):
        """Strict descendants in depth-first order."""
        out = []
        stack = list(self._children[node])
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(self._children[i])
        return out

    def child_slot(self, node):
        """Index of `node` within its parent's child tuple."""
        p = self._parent[node]
        if p < 0:
            raise ValueError("root has no parent slot")
        return self._children[p].index(node)

    def by_decreasing_level(self, include_root=True):
        order = sorted(self.nodes, key=lambda i: -self._level[i])
        return [i for i in order if include_root or i != self._root]

    def by_increasing_level(self, include_root=True):
        return list(reversed(self.by_decreasing_level(include_root)))

    def subsets(self):
        """The tree as a set of frozenset subsets."""
        return set(self._subset)

    # -- equality and serialization -------------------------------------------

    def __eq__(self, other):
        return isinstance(other, DimensionTree) and self.to_text() == other.to_text()

    def __hash__(self):
        return hash(self.to_text())

    def canonical_order(self):
        """Node slots sorted lexicographically by sorted subset."""
        return sorted(self.nodes, key=lambda i: _subset_key(self._subset[i]))

    def to_text(self):
        """Canonical textual form: one line per node, sorted lexicographically
        by subset, listing the sorted subset and the children's canonical
        indices.  Equal trees (as sets of subsets) serialize identically."""
        order = self.canonical_order()
        index = {slot: k for k, slot in enumerate(order)}
        lines = []
        for slot in order:
            dims = " ".join(str(v) for v in sorted(self._subset[slot]))
            kids = " ".join(str(index[c]) for c in self._children[slot])
            lines.append(f"{dims} : {kids}".rstrip())
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text):
        subsets = []
        children = []
        for line in text.strip().splitlines():
            dims_part, _, kids_part = line.partition(":")
            subsets.append({int(v) for v in dims_part.split()})
            children.append([int(v) for v in kids_part.split()])
        parents = [-1] * len(subsets)
        for i, kids in enumerate(children):
            for c in kids:
                parents[c] = i
        return cls(parents, children, subsets)

    def __repr__(self):
        return f"DimensionTree(d={self.d}, nodes={self.num_nodes})"


def _assemble(node_specs):
    """Build a tree from (parent, subset) pairs produced by the builders."""
    parents = [p for p, _ in node_specs]
    subsets = [s for _, s in node_specs]
    children = [[] for _ in node_specs]
    for i, p in enumerate(parents):
        if p >= 0:
            children[p].append(i)
    return DimensionTree(parents, children, subsets)


def build_tree(kind, d, leaf_order=None):
    """Construct a dimension partition tree.

    Parameters
    ----------
    kind : {'balanced', 'linear', 'trivial'}
        balanced: binary tree splitting index ranges as evenly as possible;
        linear: binary tree splitting one leaf off per level;
        trivial: root with d leaf children.
    d : int
        Number of dimensions (>= 2).
    leaf_order : sequence of int, optional
        Permutation of 1..d assigning dimensions to leaf positions
        (defaults to the identity).
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if leaf_order is None:
        leaf_order = list(range(1, d + 1))
    leaf_order = [int(v) for v in leaf_order]
    if sorted(leaf_order) != list(range(1, d + 1)):
        raise ValueError("leaf_order must be a permutation of 1..d")

    specs = []

    def add(parent, dims):
        specs.append((parent, set(dims)))
        return len(specs) - 1

    def balanced(parent, dims):
        node = add(parent, dims)
        if len(dims) > 1:
            half = (len(dims) + 1) // 2
            balanced(node, dims[:half])
            balanced(node, dims[half:])

    def linear(parent, dims):
        node = add(parent, dims)
        if len(dims) > 1:
            add(node, dims[:1])
            linear(node, dims[1:])

    if kind == "balanced":
        balanced(-1, leaf_order)
    elif kind == "linear":
        linear(-1, leaf_order)
    elif kind == "trivial":
        root = add(-1, leaf_order)
        for dim in leaf_order:
            add(root, [dim])
    else:
        raise ValueError(f"unknown tree kind {kind!r}")
    return _assemble(specs)


def node_relations(tree, node):
    """Relations of `node`: parent, children, ascendants, descendants, level,
    and the dimensions of the leaves below it."""
    if not 0 <= node < tree.num_nodes:
        raise KeyError(node)
    return {
        "parent": tree.parent(node),
        "children": tree.children(node),
        "ascendants": tree.ascendants(node),
        "descendants": tree.descendants(node),
        "level": tree.level(node),
        "leaves_below": tuple(sorted(tree.subset(node))),
    }


def is_admissible(tree, ranks, leaf_dims):
    """Check the necessary admissibility conditions for a rank map.

    Parameters
    ----------
    tree : DimensionTree
    ranks : sequence of int
        Rank per node slot.
    leaf_dims : mapping dim -> int
        Feature-space dimension N per (1-based) dimension.

    Returns
    -------
    (bool, str or None)
        Admissibility flag and the first violated condition, if any.
    """
    ranks = [int(r) for r in ranks]
    if len(ranks) != tree.num_nodes:
        raise ValueError("ranks must cover every node")
    if ranks[tree.root] != 1:
        return False, "root rank must be 1"
    for a in tree.nodes:
        r = ranks[a]
        sub = sorted(tree.subset(a))
        if a != tree.root:
            p = tree.parent(a)
            bound = ranks[p] * prod(
                ranks[b] for b in tree.children(p) if b != a
            )
            if r > bound:
                return False, f"rank at {sub} exceeds parent/sibling bound {bound}"
        if not tree.is_leaf(a):
            bound = prod(ranks[b] for b in tree.children(a))
            if r > bound:
                return False, f"rank at {sub} exceeds children bound {bound}"
        else:
            if r > leaf_dims[tree.leaf_dim(a)]:
                return False, f"leaf rank at {sub} exceeds basis dimension"
        cap = prod(leaf_dims[v] for v in sub)
        if r > cap:
            return False, f"rank at {sub} exceeds leaf-space bound {cap}"
    return True, None


def admissible_projection(tree, ranks, leaf_dims):
    """Admissible rank map dominated by `ranks`, obtained by clamping.

    Every node is clamped to its admissibility bounds (parent/sibling,
    children product, and leaf-space caps) until a fixed point is reached;
    ranks never drop below 1.  Admissible inputs are returned unchanged.
    """
    ranks = [int(r) for r in ranks]
    ranks[tree.root] = 1
    changed = True
    while changed:
        changed = False
        for a in tree.nodes:
            if a == tree.root:
                continue
            p = tree.parent(a)
            bound = ranks[p] * prod(
                ranks[b] for b in tree.children(p) if b != a
            )
            if tree.is_leaf(a):
                bound = min(bound, leaf_dims[tree.leaf_dim(a)])
            else:
                bound = min(bound, prod(ranks[b] for b in tree.children(a)))
            bound = min(bound, prod(leaf_dims[v] for v in tree.subset(a)))
            bound = max(bound, 1)
            if ranks[a] > bound:
                ranks[a] = bound
                changed = True
    return ranks


@dataclass(frozen=True)
class PermutationMove:
    """A node-permutation move swapping the subtrees at slots `nu` and `mu`."""

    nu: int
    mu: int


def move_scope(tree, move):
    """Deepest common ascendant gamma and the affected ascendant set.

    The affected set contains all strict ascendants of `nu` and `mu` strictly
    below gamma, ordered by increasing level.
    """
    nu, mu = move.nu, move.mu
    if tree.subset(nu) & tree.subset(mu):
        raise ValueError("permutation nodes must have disjoint subsets")
    asc_nu = tree.ascendants(nu)
    asc_mu = tree.ascendants(mu)
    common = set(asc_nu) & set(asc_mu)
    gamma = max(common, key=tree.level)
    affected = [a for a in asc_nu + asc_mu if a not in common]
    return gamma, sorted(affected, key=tree.level)


def permutation_distance(tree, ranks, move):
    """Proposal distance d_T(nu, mu): rank at gamma times the product of ranks
    on the frontier of the affected ascendant set."""
    gamma, affected = move_scope(tree, move)
    affected_set = set(affected)
    frontier = [
        c
        for a in affected_set
        for c in tree.children(a)
        if c not in affected_set
    ]
    return ranks[gamma] * prod(ranks[b] for b in frontier)


def permute_topology(tree, move):
    """Tree obtained by swapping the subtrees at `move.nu` and `move.mu`.

    Slot ids are preserved; subsets of the affected ascendants are recomputed.
    Swapping two children of the same parent returns the input tree.
    """
    nu, mu = move.nu, move.mu
    gamma, affected = move_scope(tree, move)
    pn, pm = tree.parent(nu), tree.parent(mu)
    if pn == pm:
        return tree
    parents = [-1 if tree.parent(i) is None else tree.parent(i) for i in tree.nodes]
    children = [list(tree.children(i)) for i in tree.nodes]
    children[pn][children[pn].index(nu)] = mu
    children[pm][children[pm].index(mu)] = nu
    parents[nu], parents[mu] = pm, pn
    subsets = [set(tree.subset(i)) for i in tree.nodes]
    for a in sorted(affected, key=tree.level, reverse=True):
        subsets[a] = set().union(*(subsets[c] for c in children[a]))
    return DimensionTree(parents, children, subsets)


def _choice(rng, items, weights):
    weights = np.asarray(weights, dtype=float)
    return items[rng.choice(len(items), p=weights / weights.sum())]


def draw_move_sequence(
    tree, ranks, rng, gamma1=2.0, gamma2=2.0, gamma3=2.0, m_max=None
):
    """Draw a random sequence of permutation moves.

    The sequence length m is drawn with P(m=k) proportional to ``k**-gamma1``
    on 1..m_max (default m_max = d).  The first node of each move is drawn
    over non-root slots with probability proportional to the parent's rank
    raised to gamma2; the second node with probability proportional to
    ``d_T(nu, mu)**-gamma3`` over slots disjoint from the first, excluding
    children of the same parent (which would be a no-op swap).  Each move is
    applied to a working copy of the tree so move i+1 is drawn on the permuted
    topology, with ranks carried per slot.
    """
    if min(gamma1, gamma2, gamma3) <= 0:
        raise ValueError("gamma exponents must be positive")
    if m_max is None:
        m_max = tree.d
    ranks = [int(r) for r in ranks]
    lengths = np.arange(1, m_max + 1)
    m = int(_choice(rng, lengths, lengths.astype(float) ** -gamma1))
    moves = []
    work = tree
    for _ in range(m):
        for _attempt in range(50):
            non_root = [i for i in work.nodes if i != work.root]
            nu = int(
                _choice(
                    rng,
                    non_root,
                    [float(ranks[work.parent(i)]) ** gamma2 for i in non_root],
                )
            )
            candidates = [
                a
                for a in non_root
                if a != nu
                and not (work.subset(a) & work.subset(nu))
                and work.parent(a) != work.parent(nu)
            ]
            if candidates:
                break
        else:
            raise RuntimeError("could not draw a valid permutation move")
        dists = [
            permutation_distance(work, ranks, PermutationMove(nu, a))
            for a in candidates
        ]
        mu = int(_choice(rng, candidates, np.asarray(dists, dtype=float) ** -gamma3))
        move = PermutationMove(nu, mu)
        moves.append(move)
        work = permute_topology(work, move)
    return moves
