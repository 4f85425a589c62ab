"""Lagged cross-moment tensors of a tensor time series.

For a series ``X_1..X_T`` the lag-h cross moment is the order-2K tensor
``(T-h)^{-1} sum_t X_{t-h} (x) X_t``.  Its square unfolding groups the first
K modes as rows and the last K as columns, giving a d x d matrix whose
symmetrization drives the composite-PCA initializer.  Lag selection and the
multi-lag subspace refinement live here too.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import sym_top_eigs
from .validation import check_lag, check_series

DEFAULT_TENSOR_BUDGET = 2 << 30  # bytes; gate on materializing the order-2K tensor


def series_to_vecs(x: np.ndarray) -> np.ndarray:
    """Stack the vectorization of every time slice into a (T, d) matrix."""
    x = np.asarray(x, dtype=float)
    t_len = x.shape[0]
    axes = (0,) + tuple(range(x.ndim - 1, 0, -1))
    return x.transpose(axes).reshape(t_len, -1)


@dataclass
class LaggedMoment:
    """Lag-h sample cross moment of a tensor series.

    ``square`` is the symmetrized d x d unfolding (modes 1..K as rows);
    ``tensor`` is the raw order-2K moment with shape ``dims + dims``, or
    ``None`` when it exceeded the memory budget at construction.
    """

    h: int
    dims: tuple[int, ...]
    square: np.ndarray
    tensor: np.ndarray | None = field(default=None, repr=False)

    def square_unfold(self) -> np.ndarray:
        """The symmetrized square unfolding."""
        return self.square


def lagged_cross_moment(
    x,
    h: int = 1,
    tensor_budget: int = DEFAULT_TENSOR_BUDGET,
) -> LaggedMoment:
    """Sample lag-h cross-moment of a tensor time series.

    Parameters
    ----------
    x : ndarray, shape (T, d_1, ..., d_K)
        Observed series.
    h : int
        Lag, ``1 <= h <= T-1``.
    tensor_budget : int
        Skip materializing the order-2K tensor when it would exceed this
        many bytes; the square unfolding is always formed.
    """
    x = check_series(x)
    t_len = x.shape[0]
    h = check_lag(h, t_len)
    dims = tuple(x.shape[1:])
    d = int(np.prod(dims))

    vecs = series_to_vecs(x)
    raw = vecs[: t_len - h].T @ vecs[h:]
    raw /= t_len - h
    square = (raw + raw.T) / 2.0
    tensor = None
    if raw.nbytes <= tensor_budget:
        tensor = raw.reshape(dims + dims, order="F")
    return LaggedMoment(h=h, dims=dims, square=square, tensor=tensor)


def _explained_fraction_of_square(square: np.ndarray, r: int) -> float:
    frob2 = float(np.sum(square * square))
    if frob2 == 0.0:
        raise ValueError("degenerate all-zero series: no variance to explain")
    pairs = sym_top_eigs(square, r)
    # sum of all squared eigenvalues of a symmetric matrix equals its
    # squared Frobenius norm, so the full spectrum is never needed
    return float(np.sum(pairs.values**2) / frob2)


def explained_fraction(x, h: int, r: int) -> float:
    """Fraction of the square moment's spectral energy in the top r pairs."""
    x = check_series(x)
    d = int(np.prod(x.shape[1:]))
    if not 1 <= r <= d:
        raise ValueError(f"r={r} out of range for d={d}")
    mom = lagged_cross_moment(x, h, tensor_budget=0)
    return _explained_fraction_of_square(mom.square, r)


def select_lag(x, h_max: int, r: int) -> int:
    """Lag in ``1..h_max`` maximizing :func:`explained_fraction` (ties: smallest)."""
    x = check_series(x)
    h_max = check_lag(h_max, x.shape[0])
    fractions = [explained_fraction(x, h, r) for h in range(1, h_max + 1)]
    return int(np.argmax(fractions)) + 1


def lag_scan(x, h_max: int, r: int) -> list[tuple[int, float]]:
    """Table of (h, explained_fraction) for ``h = 1..h_max``."""
    x = check_series(x)
    h_max = check_lag(h_max, x.shape[0])
    return [(h, explained_fraction(x, h, r)) for h in range(1, h_max + 1)]


def subspace_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Spectral norm of the difference of the two column-span projectors.

    Both arguments must have orthonormal columns of equal count; the value
    is the sine of the largest principal angle, computed stably as the top
    singular value of ``v - u (u.T v)`` so that tiny angles do not drown
    in cancellation.
    """
    u = np.atleast_2d(np.asarray(u, float))
    v = np.atleast_2d(np.asarray(v, float))
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    resid = v - u @ (u.T @ v)
    s = np.linalg.svd(resid, compute_uv=False)
    return float(min(1.0, s.max())) if s.size else 0.0


def multi_lag_refine(
    x,
    h_max: int,
    r: int,
    u0: np.ndarray,
    sweeps: int = 10,
    tol: float = 1e-8,
) -> np.ndarray:
    """Refine a spectral subspace by pooling square moments over lags 1..h_max.

    Each sweep replaces ``U`` by the top-r eigenvectors of
    ``sum_h S_h U U.T S_h`` where ``S_h`` is the symmetrized square moment
    at lag h.  Stops after ``sweeps`` sweeps or when the projector moves by
    at most ``tol`` in spectral norm.
    """
    x = check_series(x)
    h_max = check_lag(h_max, x.shape[0])
    u = np.asarray(u0, dtype=float)
    if u.ndim != 2 or u.shape[1] != r:
        raise ValueError(f"u0 must be d x {r}, got {u.shape}")
    gram = u.T @ u
    if not np.allclose(gram, np.eye(r), atol=1e-8):
        raise ValueError("u0 must have orthonormal columns")

    squares = [
        lagged_cross_moment(x, h, tensor_budget=0).square
        for h in range(1, h_max + 1)
    ]
    for _ in range(sweeps):
        acc = np.zeros_like(squares[0])
        for s in squares:
            p = s @ u
            acc += p @ p.T
        u_new = sym_top_eigs(acc, r).vectors
        moved = subspace_distance(u_new, u)
        u = u_new
        if moved <= tol:
            break
    return u
