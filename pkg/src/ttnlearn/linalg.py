"""Dense multi-way array kernels: matricization, mode products, truncated SVD.

Tensors are plain ``numpy.ndarray`` objects.  All linearizations used in this
package are row-major (C order): when a tensor is matricized, the row index
enumerates the selected modes with the *first* selected mode varying slowest,
and the column index enumerates the remaining modes in their original order,
again with the first remaining mode varying slowest.  ``vec`` of a tensor is
``ndarray.ravel()`` in C order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SvdResult",
    "matricize",
    "dematricize",
    "mode_multiply",
    "truncated_svd",
]


@dataclass(frozen=True)
class SvdResult:
    """Truncated singular value decomposition of a matrix.

    Attributes
    ----------
    left : ndarray
        Matrix whose ``retained_rank`` columns are the leading left singular
        vectors (orthonormal).
    singular_values : ndarray
        The retained singular values, nonincreasing and nonnegative.
    right : ndarray
        Matrix whose columns are the leading right singular vectors
        (orthonormal), so that ``m ~= left @ diag(s) @ right.T``.
    retained_rank : int
        Number of retained singular triplets (always at least 1).
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray
    retained_rank: int


def _check_modes(ndim, row_modes):
    modes = list(row_modes)
    if not modes:
        raise ValueError("row_modes must be nonempty")
    if len(set(modes)) != len(modes):
        raise ValueError("duplicate mode in row_modes")
    for m in modes:
        if not 0 <= m < ndim:
            raise ValueError(f"mode {m} out of range for order-{ndim} tensor")
    return modes


def matricize(tensor, row_modes):
    """Unfold `tensor` into a matrix with `row_modes` enumerating the rows.

    Parameters
    ----------
    tensor : ndarray
    row_modes : sequence of int
        Ordered subset of the tensor's modes (0-based, no duplicates).

    Returns
    -------
    ndarray
        Matrix of shape ``(prod of row extents, prod of remaining extents)``.
        Row and column indices follow the package's row-major linearization.
    """
    tensor = np.asarray(tensor)
    modes = _check_modes(tensor.ndim, row_modes)
    col_modes = [m for m in range(tensor.ndim) if m not in modes]
    rows = int(np.prod([tensor.shape[m] for m in modes], dtype=np.int64))
    return tensor.transpose(modes + col_modes).reshape(rows, -1)


def dematricize(matrix, shape, row_modes):
    """Inverse of :func:`matricize` for a tensor of the given `shape`."""
    matrix = np.asarray(matrix)
    modes = _check_modes(len(shape), row_modes)
    col_modes = [m for m in range(len(shape)) if m not in modes]
    permuted = matrix.reshape([shape[m] for m in modes + col_modes])
    return permuted.transpose(np.argsort(modes + col_modes))


def mode_multiply(tensor, mode, matrix):
    """Contract ``matrix`` with `tensor` along `mode`.

    Returns the tensor whose mode-`mode` matricization equals
    ``matrix @ matricize(tensor, [mode])``; the extent at `mode` becomes
    ``matrix.shape[0]``.
    """
    tensor = np.asarray(tensor)
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("mode_multiply expects a matrix")
    if matrix.shape[1] != tensor.shape[mode]:
        raise ValueError(
            f"matrix has {matrix.shape[1]} columns but mode {mode} "
            f"has extent {tensor.shape[mode]}"
        )
    out = np.tensordot(matrix, tensor, axes=([1], [mode]))
    return np.moveaxis(out, 0, mode)


def _fix_signs(u, vt):
    """Make the leading nonzero entry of each right singular vector positive."""
    for k in range(vt.shape[0]):
        row = vt[k]
        nz = np.flatnonzero(np.abs(row) > 1e-14 * max(np.abs(row).max(), 1e-300))
        if nz.size and row[nz[0]] < 0:
            vt[k] = -row
            u[:, k] = -u[:, k]
    return u, vt


def truncated_svd(matrix, max_rank=None, rel_tail_tol=0.0):
    """Rank-truncated SVD with relative tail-energy control.

    The retained rank is the minimal ``r`` such that
    ``sum_{i>r} s_i**2 <= rel_tail_tol**2 * sum_i s_i**2``, additionally capped
    at `max_rank`; at least one singular triplet is always retained.
    """
    matrix = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix has non-finite entries")
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    u, vt = _fix_signs(u, vt)
    total = float(np.sum(s**2))
    if total == 0.0:
        rank = 1
    else:
        tails = total - np.cumsum(s**2)
        ok = np.flatnonzero(tails <= rel_tail_tol**2 * total)
        rank = int(ok[0]) + 1 if ok.size else s.size
    if max_rank is not None:
        rank = min(rank, int(max_rank))
    rank = max(rank, 1)
    return SvdResult(
        left=u[:, :rank].copy(),
        singular_values=s[:rank].copy(),
        right=vt[:rank].T.copy(),
        retained_rank=rank,
    )
