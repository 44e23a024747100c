"""Tests for the normalized Legendre basis and nested sparsity patterns."""

import numpy as np
import pytest

from ttnlearn.bases import LegendreBasis, basis_eval, leaf_patterns


def test_values_at_zero_degree_two():
    # phi_0 = 1, phi_1 = sqrt(3) x, phi_2 = sqrt(5) (3x^2 - 1) / 2.
    basis = LegendreBasis(2)
    assert np.allclose(
        basis.eval(0.0), [1.0, 0.0, -np.sqrt(5) / 2], atol=1e-14
    )


def test_values_at_one():
    # Normalization sqrt(2i+1) with P_i(1) = 1.
    basis = LegendreBasis(5)
    assert np.allclose(
        basis.eval(1.0), np.sqrt(2 * np.arange(6) + 1), atol=1e-13
    )
    assert np.allclose(basis_eval(basis, 1.0, 1), [1.0, np.sqrt(3)])


def test_degree_zero_is_constant():
    basis = LegendreBasis(4)
    xs = np.linspace(-1, 1, 11)
    assert np.allclose(basis.eval(xs, 0), np.ones((11, 1)))


def test_orthonormal_under_gauss_quadrature():
    basis = LegendreBasis(8)
    nodes, weights = np.polynomial.legendre.leggauss(64)
    values = basis.eval(nodes)
    # Uniform measure on [-1,1]: weights integrate to 2, normalize by 1/2.
    gram = (values * weights[:, None] / 2.0).T @ values
    assert np.max(np.abs(gram - np.eye(9))) < 1e-10


def test_domain_clamping_and_errors():
    basis = LegendreBasis(2)
    with pytest.warns(UserWarning):
        values = basis.eval(1.0 + 1e-13)
    assert np.allclose(values, basis.eval(1.0))
    with pytest.raises(ValueError):
        basis.eval(1.5)


def test_leaf_patterns_sizes():
    patterns = leaf_patterns(2, 1)
    assert [len(p) for p in patterns] == [1, 2, 3]
    patterns = leaf_patterns(3, 2)
    assert [len(p) for p in patterns] == [2, 4, 6, 8]
    patterns = leaf_patterns(0, 3)
    assert len(patterns) == 1 and len(patterns[0]) == 3


def test_leaf_patterns_nested_and_complete():
    p, r = 4, 3
    patterns = leaf_patterns(p, r)
    for small, big in zip(patterns, patterns[1:]):
        assert set(small.tolist()) < set(big.tolist())
    assert set(patterns[-1].tolist()) == set(range((p + 1) * r))
    # Pattern lambda keeps exactly the rows of degree <= lambda.
    core_rows = np.arange((p + 1) * r).reshape(p + 1, r)
    for lam, pattern in enumerate(patterns):
        assert set(pattern.tolist()) == set(core_rows[: lam + 1].ravel())


def test_leaf_patterns_validation():
    with pytest.raises(ValueError):
        leaf_patterns(-1, 1)
    with pytest.raises(ValueError):
        leaf_patterns(2, 0)
