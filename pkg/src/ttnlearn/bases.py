"""Orthonormal univariate feature bases and nested sparsity patterns."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = ["LegendreBasis", "basis_eval", "leaf_patterns"]


@dataclass(frozen=True)
class LegendreBasis:
    """Legendre polynomials normalized in L2 of the uniform measure on [-1,1].

    phi_0 is the constant 1 and phi_i = sqrt(2i+1) P_i with P_i the standard
    Legendre polynomial, so that the family is orthonormal.
    """

    max_degree: int
    measure: str = "uniform[-1,1]"

    @property
    def dimension(self):
        return self.max_degree + 1

    def eval(self, x, up_to_degree=None):
        """Evaluate phi_0..phi_degree at the points `x`.

        Parameters
        ----------
        x : array_like
            Points in [-1, 1]; values outside by less than 1e-12 are clamped
            with a warning, values farther outside raise.

        Returns
        -------
        ndarray of shape ``x.shape + (degree + 1,)``.
        """
        degree = self.max_degree if up_to_degree is None else int(up_to_degree)
        if degree < 0:
            raise ValueError("degree must be >= 0")
        x = np.asarray(x, dtype=float)
        over = np.abs(x) - 1.0
        if np.any(over > 0):
            if np.max(over) > 1e-12:
                raise ValueError("points far outside [-1, 1]")
            warnings.warn("clamping points slightly outside [-1, 1]")
            x = np.clip(x, -1.0, 1.0)
        out = np.empty(x.shape + (degree + 1,))
        out[..., 0] = 1.0
        if degree >= 1:
            out[..., 1] = x
        for i in range(1, degree):
            # Legendre three-term recurrence on the unnormalized P_i.
            out[..., i + 1] = (
                (2 * i + 1) * x * out[..., i] - i * out[..., i - 1]
            ) / (i + 1)
        out *= np.sqrt(2 * np.arange(degree + 1) + 1)
        return out


def basis_eval(basis, x, up_to_degree=None):
    """Functional alias for :meth:`LegendreBasis.eval`."""
    return basis.eval(x, up_to_degree)


def leaf_patterns(p, r):
    """Nested coefficient patterns for a leaf core of shape (p+1, r).

    Pattern lambda keeps the coefficients of polynomial degree <= lambda for
    all r columns.  Returned as a list of flat index arrays into the
    row-major vectorization of the core; sizes are (lambda+1) * r and the last
    pattern is complete.
    """
    if p < 0 or r < 1:
        raise ValueError("need p >= 0 and r >= 1")
    full = np.arange((p + 1) * r).reshape(p + 1, r)
    return [full[: lam + 1].ravel() for lam in range(p + 1)]
