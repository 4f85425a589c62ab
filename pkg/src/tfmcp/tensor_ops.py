"""Dense tensor kernels: unfolding, mode products, outer and Khatri-Rao products.

Tensors are plain :class:`numpy.ndarray` objects of shape ``(d_1, ..., d_K)``
with 64-bit float entries.  A tensor is vectorized in column-major (Fortran)
order, so the mode-0 index varies fastest.  Every unfolding in the package
derives from this single convention, which guarantees that reshaping a
vectorized tensor back to its natural shape commutes with unfolding:
``unfold(unvec(vec(A), dims), k) == unfold(A, k)``.

Modes are 0-based, matching numpy axis numbering.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


def _check_mode(ndim: int, mode: int) -> None:
    if not 0 <= mode < ndim:
        raise ValueError(f"mode {mode} out of range for order-{ndim} tensor")


def vec(tensor: np.ndarray) -> np.ndarray:
    """Vectorize a tensor in column-major order (mode-0 index fastest)."""
    return np.asarray(tensor, dtype=float).reshape(-1, order="F")


def unvec(v: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`vec`: reshape a flat vector to shape ``dims``."""
    dims = tuple(int(d) for d in dims)
    v = np.asarray(v, dtype=float)
    if v.size != int(np.prod(dims)):
        raise ValueError(f"vector of length {v.size} cannot fill shape {dims}")
    return v.reshape(dims, order="F")


def unfold(tensor: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` matrix unfolding of a tensor.

    Returns a ``d_mode x (d / d_mode)`` matrix whose columns enumerate the
    remaining modes with the smallest remaining mode varying fastest.
    """
    t = np.asarray(tensor, dtype=float)
    _check_mode(t.ndim, mode)
    return np.moveaxis(t, mode, 0).reshape((t.shape[mode], -1), order="F")


def refold(matrix: np.ndarray, dims: Sequence[int], mode: int) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the tensor of shape ``dims``."""
    dims = tuple(int(d) for d in dims)
    _check_mode(len(dims), mode)
    m = np.asarray(matrix, dtype=float)
    rest = dims[:mode] + dims[mode + 1 :]
    if m.shape != (dims[mode], int(np.prod(rest, dtype=np.int64))) and not (
        len(rest) == 0 and m.shape == (dims[mode], 1)
    ):
        raise ValueError(
            f"matrix of shape {m.shape} does not match dims {dims} at mode {mode}"
        )
    t = m.reshape((dims[mode],) + rest, order="F")
    return np.moveaxis(t, 0, mode)


def mode_vec_product(tensor: np.ndarray, mode: int, v: np.ndarray) -> np.ndarray:
    """Contract mode ``mode`` of a tensor against a vector.

    Equivalent to refolding ``v.T @ unfold(tensor, mode)``; the result is a
    tensor of order K-1 with the remaining modes in their original order.
    """
    t = np.asarray(tensor, dtype=float)
    _check_mode(t.ndim, mode)
    v = np.asarray(v, dtype=float)
    if v.shape != (t.shape[mode],):
        raise ValueError(
            f"vector of length {v.size} does not match mode {mode} "
            f"of size {t.shape[mode]}"
        )
    return np.tensordot(t, v, axes=(mode, 0))


def multi_contract(
    tensor: np.ndarray, contractions: Iterable[tuple[int, np.ndarray]]
) -> np.ndarray:
    """Contract several distinct modes of a tensor against vectors.

    Parameters
    ----------
    tensor : ndarray
        Tensor of order M.
    contractions : iterable of (mode, vector)
        Modes must be distinct and each vector must match its mode's size.

    Returns
    -------
    ndarray
        Tensor of order ``M - len(contractions)`` (0-d array when all modes
        are contracted).  The result does not depend on the order in which
        the contractions are listed; internally they are applied from the
        largest mode down so the summation order is fixed.
    """
    t = np.asarray(tensor, dtype=float)
    items = [(int(m), np.asarray(v, dtype=float)) for m, v in contractions]
    modes = [m for m, _ in items]
    if len(set(modes)) != len(modes):
        raise ValueError(f"duplicate contraction modes in {sorted(modes)}")
    for m, v in items:
        _check_mode(t.ndim, m)
        if v.shape != (t.shape[m],):
            raise ValueError(
                f"vector of length {v.size} does not match mode {m} "
                f"of size {t.shape[m]}"
            )
    for m, v in sorted(items, key=lambda p: -p[0]):
        t = np.tensordot(t, v, axes=(m, 0))
    return t


def outer(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Outer product of K >= 1 vectors: entry (i_1..i_K) = prod_k v_k[i_k]."""
    if len(vectors) == 0:
        raise ValueError("outer() requires at least one vector")
    out = np.asarray(vectors[0], dtype=float)
    for v in vectors[1:]:
        out = np.multiply.outer(out, np.asarray(v, dtype=float))
    return out


def khatri_rao(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Column-wise Kronecker (Khatri-Rao) product.

    Column j of the result is the Kronecker product of the j-th columns of
    the inputs, with the first matrix slowest.  To line up with
    :func:`unfold`'s column enumeration (smallest mode fastest), pass the
    matrices in decreasing mode order.
    """
    if len(matrices) == 0:
        raise ValueError("khatri_rao() requires at least one matrix")
    mats = [np.asarray(m, dtype=float) for m in matrices]
    for m in mats:
        if m.ndim != 2:
            raise ValueError("khatri_rao() expects 2-d matrices")
    r = mats[0].shape[1]
    if any(m.shape[1] != r for m in mats):
        raise ValueError(
            f"column counts differ: {[m.shape[1] for m in mats]}"
        )
    out = mats[0]
    for m in mats[1:]:
        out = np.einsum("ir,jr->ijr", out, m).reshape(-1, r)
    return out


def hs_norm(tensor: np.ndarray) -> float:
    """Hilbert-Schmidt norm: the Euclidean norm of the vectorized tensor."""
    return float(np.linalg.norm(np.asarray(tensor, dtype=float).ravel()))
