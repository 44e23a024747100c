"""Tests for the tree-based tensor format: evaluation, orthogonalization,
spectra, truncation, sums, node permutations, and serialization."""

import itertools

import numpy as np
import pytest

from ttnlearn.bases import LegendreBasis
from ttnlearn.linalg import matricize
from ttnlearn.network import (
    MoveTooLargeError,
    TreeTensorNetwork,
    add,
    alpha_orthogonalize,
    assemble_full,
    evaluate,
    network_from_dict,
    network_to_dict,
    norm,
    orthogonalize,
    permute_representation,
    random_network,
    singular_spectrum,
    storage_complexity,
    truncate,
)
from ttnlearn.tree import PermutationMove, build_tree, is_admissible


def admissible_random_ranks(tree, leaf_dims, rng, max_rank=4, steps=40):
    """Random admissible rank map grown by unit increments."""
    ranks = [1] * tree.num_nodes
    candidates = [a for a in tree.nodes if a != tree.root]
    for _ in range(steps):
        a = candidates[rng.integers(len(candidates))]
        trial = list(ranks)
        trial[a] += 1
        if trial[a] > max_rank:
            continue
        ok, _ = is_admissible(tree, trial, leaf_dims)
        if ok:
            ranks = trial
    return ranks


def make_network(seed, kind="balanced", d=4, degree=2, max_rank=3):
    rng = np.random.default_rng(seed)
    tree = build_tree(kind, d)
    basis = LegendreBasis(degree)
    leaf_dims = {v: basis.dimension for v in range(1, d + 1)}
    ranks = admissible_random_ranks(tree, leaf_dims, rng, max_rank)
    return random_network(tree, ranks, basis, rng), rng


def full_tensor_evaluate(net, xs):
    """Oracle: contract the assembled coefficient tensor point by point."""
    full = assemble_full(net)
    out = np.empty(len(xs))
    for k, x in enumerate(xs):
        t = full
        for dim in range(1, net.tree.d + 1):
            phi = net.bases[dim].eval(np.array([x[dim - 1]]))[0]
            t = np.tensordot(phi, t, axes=([0], [0]))
        out[k] = t
    return out


def scaled(net, factor):
    cores = [c.copy() for c in net.cores]
    cores[net.tree.root] = factor * cores[net.tree.root]
    return net.with_cores(cores)


def brute_force_spectra(net):
    """Oracle: singular values of every matricization of the full tensor."""
    full = assemble_full(net)
    tree = net.tree
    spectra = {}
    for a in tree.nodes:
        if a == tree.root:
            continue
        modes = [v - 1 for v in sorted(tree.subset(a))]
        spectra[a] = np.linalg.svd(matricize(full, modes), compute_uv=False)
    return spectra


def assert_same_function(a, b, xs, tol=1e-10):
    ya, yb = evaluate(a, xs), evaluate(b, xs)
    scale = max(float(np.max(np.abs(ya))), 1e-30)
    assert np.max(np.abs(ya - yb)) <= tol * scale


def test_evaluate_matches_full_tensor_oracle():
    for seed in range(5):
        net, rng = make_network(seed)
        xs = rng.uniform(-1, 1, (50, net.tree.d))
        expected = full_tensor_evaluate(net, xs)
        got = evaluate(net, xs)
        assert np.allclose(got, expected, atol=1e-11 * max(1, np.abs(expected).max()))


def test_evaluate_separable_product_by_hand():
    # Rank-one network encoding u(x) = x1 * x2 on two dimensions.
    tree = build_tree("balanced", 2)
    basis = LegendreBasis(1)
    x_coef = np.array([[0.0], [1.0 / np.sqrt(3.0)]])  # x in the basis
    cores = [None] * tree.num_nodes
    cores[tree.root] = np.ones((1, 1, 1))
    for a in tree.nodes:
        if tree.is_leaf(a):
            cores[a] = x_coef
    net = TreeTensorNetwork(tree, cores, basis)
    rng = np.random.default_rng(0)
    xs = rng.uniform(-1, 1, (20, 2))
    assert np.allclose(evaluate(net, xs), xs[:, 0] * xs[:, 1], atol=1e-13)


def test_evaluate_rejects_wrong_dimension():
    net, _ = make_network(0)
    with pytest.raises(ValueError):
        evaluate(net, np.zeros((3, net.tree.d + 1)))


def test_norm_matches_full_tensor():
    for seed in range(4):
        net, _ = make_network(seed, d=5)
        assert np.isclose(
            norm(net), np.linalg.norm(assemble_full(net)), rtol=1e-11
        )


def test_orthogonalize_preserves_function_and_is_orthonormal():
    for seed in range(5):
        net, rng = make_network(seed, d=5)
        xs = rng.uniform(-1, 1, (100, net.tree.d))
        ortho = orthogonalize(net)
        assert ortho.orth_state == "all"
        assert_same_function(net, ortho, xs)
        tree = ortho.tree
        for a in tree.nodes:
            if a == tree.root:
                continue
            m = matricize(ortho.cores[a], [ortho.cores[a].ndim - 1])
            assert np.allclose(m @ m.T, np.eye(m.shape[0]), atol=1e-12)


def test_orthogonalize_shrinks_inflated_rank():
    # A leaf rank larger than the basis dimension cannot survive the QR pass.
    tree = build_tree("balanced", 2)
    basis = LegendreBasis(1)
    rng = np.random.default_rng(3)
    cores = [None] * tree.num_nodes
    for a in tree.nodes:
        if tree.is_leaf(a):
            cores[a] = rng.standard_normal((2, 3))
        else:
            cores[a] = rng.standard_normal((3, 3, 1))
    net = TreeTensorNetwork(tree, cores, basis)
    ortho = orthogonalize(net)
    for a in tree.leaves:
        assert ortho.rank(a) <= 2
    xs = rng.uniform(-1, 1, (30, 2))
    assert_same_function(net, ortho, xs)


def test_alpha_orthogonalize_preserves_function_and_norm():
    for seed in range(4):
        net, rng = make_network(seed, d=4)
        xs = rng.uniform(-1, 1, (80, net.tree.d))
        total = norm(net)
        for alpha in net.tree.nodes:
            ao = alpha_orthogonalize(net, alpha)
            assert_same_function(net, ao, xs)
            # All other systems are orthonormal, so the core at alpha
            # carries the whole norm of the function.
            assert np.isclose(
                np.linalg.norm(ao.cores[alpha]), total, rtol=1e-10
            )


def test_alpha_orthogonalize_root_is_plain_orthogonalization():
    net, _ = make_network(1)
    ao = alpha_orthogonalize(net, net.tree.root)
    assert ao.orth_state == "all"


def test_singular_spectrum_matches_brute_force_svd():
    for seed in range(6):
        net, _ = make_network(seed, d=4, degree=2, max_rank=3)
        spectra = singular_spectrum(net)
        oracle = brute_force_spectra(net)
        scale = max(s.max() for s in oracle.values())
        for a, s in oracle.items():
            got = spectra[a]
            k = max(len(got), len(s))
            gp = np.pad(got, (0, k - len(got)))
            sp = np.pad(s, (0, k - len(s)))
            assert np.max(np.abs(gp - sp)) <= 1e-10 * scale


def test_spectrum_parseval_identity():
    net, _ = make_network(2, d=5)
    total = norm(net)
    for s in singular_spectrum(net).values():
        assert np.isclose(np.sum(s**2), total**2, rtol=1e-11)


def test_truncate_zero_is_lossless():
    net, rng = make_network(3, d=5)
    xs = rng.uniform(-1, 1, (100, 5))
    out = truncate(net, eps=0.0)
    assert out.orth_state == "all"
    assert_same_function(net, out, xs)


def test_truncate_honors_relative_error_bound():
    for seed in range(3):
        net, _ = make_network(seed, d=5, max_rank=4)
        scale = norm(net)
        for eps in (1e-1, 1e-3, 1e-6):
            out = truncate(net, eps=eps)
            err = norm(add(net, scaled(out, -1.0)))
            assert err <= eps * scale * (1 + 1e-10)


def test_truncate_rank_mode():
    net, rng = make_network(4, d=4, max_rank=3)
    ones = [1] * net.tree.num_nodes
    out = truncate(net, ranks=ones)
    assert all(r == 1 for r in out.ranks)
    # Rank-map truncation error equals the dropped tail (best rank-1 at each
    # node); just check the result is a valid all-orthogonal network.
    assert out.orth_state == "all"
    with pytest.raises(ValueError):
        truncate(net, ranks=[100] * net.tree.num_nodes)
    with pytest.raises(ValueError):
        truncate(net)
    with pytest.raises(ValueError):
        truncate(net, eps=1.5)


def test_truncate_recovers_exact_low_rank():
    # Truncating a sum u + u back to the ranks of u is exact.
    net, rng = make_network(5, d=4)
    double = add(net, net)
    back = truncate(double, ranks=list(net.ranks))
    xs = rng.uniform(-1, 1, (60, 4))
    assert np.allclose(
        evaluate(back, xs), 2 * evaluate(net, xs), atol=1e-10 * max(1, norm(net))
    )


def test_add_evaluates_to_sum():
    a, rng = make_network(6, d=4)
    b = random_network(a.tree, [1] * a.tree.num_nodes, a.bases, rng)
    xs = rng.uniform(-1, 1, (50, 4))
    s = add(a, b)
    assert np.allclose(
        evaluate(s, xs), evaluate(a, xs) + evaluate(b, xs), atol=1e-11
    )
    for node in a.tree.nodes:
        if node == a.tree.root:
            assert s.rank(node) == 1
        else:
            assert s.rank(node) == a.rank(node) + b.rank(node)


def test_add_requires_matching_tree():
    a, _ = make_network(7, d=4)
    b, _ = make_network(7, kind="linear", d=4)
    with pytest.raises(ValueError):
        add(a, b)


def first_valid_move(tree):
    for nu, mu in itertools.combinations(tree.nodes, 2):
        if nu == tree.root or mu == tree.root:
            continue
        if tree.subset(nu) & tree.subset(mu):
            continue
        if tree.parent(nu) == tree.parent(mu):
            continue
        return PermutationMove(nu, mu)
    raise AssertionError("no valid move")


def test_permute_representation_lossless_at_zero_eps():
    for seed in range(5):
        net, rng = make_network(seed, d=5)
        xs = rng.uniform(-1, 1, (100, 5))
        move = first_valid_move(net.tree)
        out = permute_representation(net, move, eps=0.0)
        assert out.tree != net.tree
        assert_same_function(net, out, xs)


def test_permute_representation_sibling_swap_is_identity():
    net, _ = make_network(8, d=4)
    tree = net.tree
    kids = tree.children(tree.root)
    move = PermutationMove(kids[0], kids[1])
    assert permute_representation(net, move, eps=0.0) is net


def test_permute_representation_round_trip():
    net, rng = make_network(9, d=4)
    xs = rng.uniform(-1, 1, (60, 4))
    move = first_valid_move(net.tree)
    once = permute_representation(net, move, eps=0.0)
    # The same (nu, mu) pair indexes slots, which are stable across the move.
    back = permute_representation(once, move, eps=0.0)
    assert back.tree.subsets() == net.tree.subsets()
    assert_same_function(net, back, xs)


def test_permute_representation_size_guard():
    net, _ = make_network(10, d=5)
    move = first_valid_move(net.tree)
    with pytest.raises(MoveTooLargeError):
        permute_representation(net, move, eps=0.0, max_entries=0)
    with pytest.raises(ValueError):
        permute_representation(net, move, eps=1.0)


def test_storage_complexity_by_hand():
    tree = build_tree("balanced", 4)
    basis = LegendreBasis(4)  # leaf dimension 5
    ranks = [1] * tree.num_nodes
    for a in tree.nodes:
        if a != tree.root:
            ranks[a] = 2
    # root: 2*2*1, two interior: 2 * (2*2*2), four leaves: 4 * (5*2)
    expected = 4 + 2 * 8 + 4 * 10
    assert storage_complexity(tree, ranks, {v: 5 for v in range(1, 5)}) == expected


def test_serialization_round_trip_bit_exact(tmp_path):
    net, _ = make_network(11, d=5)
    doc = network_to_dict(net)
    again = network_from_dict(doc)
    assert again.tree == net.tree
    # Slot numbering is canonicalized on load; align cores via the
    # canonical node order before comparing bit for bit.
    for sa, sb in zip(net.tree.canonical_order(), again.tree.canonical_order()):
        assert np.array_equal(net.cores[sa], again.cores[sb])
    assert network_to_dict(again) == doc


def test_save_load_file_round_trip(tmp_path):
    from ttnlearn.network import load, save

    net, rng = make_network(12, d=4)
    path = tmp_path / "model.json"
    save(net, str(path))
    again = load(str(path))
    xs = rng.uniform(-1, 1, (20, 4))
    assert np.array_equal(evaluate(net, xs), evaluate(again, xs))


def test_network_validation_errors():
    tree = build_tree("balanced", 2)
    basis = LegendreBasis(1)
    good = random_network(tree, [1, 1, 1], basis, np.random.default_rng(0))
    with pytest.raises(ValueError):
        TreeTensorNetwork(tree, good.cores[:-1], basis)
    bad = [c.copy() for c in good.cores]
    bad[tree.root] = np.ones((1, 1, 2))  # root rank must be 1
    with pytest.raises(ValueError):
        TreeTensorNetwork(tree, bad, basis)
