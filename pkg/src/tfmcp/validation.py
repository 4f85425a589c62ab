"""Input validation helpers shared across the package."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def check_series(x, order: int | None = None, min_t: int = 2) -> np.ndarray:
    """Validate a tensor time series of shape ``(T, d_1, ..., d_K)``.

    Returns a float ndarray.  ``order`` pins the tensor order K when known.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim < 2:
        raise ValueError(
            f"series must have shape (T, d_1, ..., d_K); got {arr.shape}"
        )
    if order is not None and arr.ndim != order + 1:
        raise ValueError(
            f"expected an order-{order} tensor series, got shape {arr.shape}"
        )
    if arr.shape[0] < min_t:
        raise ValueError(f"series needs at least {min_t} time points, got {arr.shape[0]}")
    if any(s < 1 for s in arr.shape[1:]):
        raise ValueError(f"all mode sizes must be positive, got {arr.shape[1:]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("series contains non-finite values")
    return arr


def check_loadings(
    loadings: Sequence[np.ndarray],
    dims: Sequence[int] | None = None,
    unit_columns: bool = False,
    atol: float = 1e-8,
) -> list[np.ndarray]:
    """Validate a per-mode list of loading matrices sharing a column count."""
    mats = [np.asarray(a, dtype=float) for a in loadings]
    if not mats:
        raise ValueError("need at least one loading matrix")
    for k, a in enumerate(mats):
        if a.ndim != 2:
            raise ValueError(f"loading matrix for mode {k} must be 2-d, got {a.shape}")
    r = mats[0].shape[1]
    if any(a.shape[1] != r for a in mats):
        raise ValueError(
            f"loading matrices disagree on factor count: {[a.shape[1] for a in mats]}"
        )
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if tuple(a.shape[0] for a in mats) != dims:
            raise ValueError(
                f"loading row counts {tuple(a.shape[0] for a in mats)} "
                f"do not match dims {dims}"
            )
    if unit_columns:
        for k, a in enumerate(mats):
            norms = np.linalg.norm(a, axis=0)
            if np.any(np.abs(norms - 1.0) > atol):
                raise ValueError(f"columns of mode-{k} loadings are not unit norm")
    return mats


def check_lag(h: int, t_len: int) -> int:
    h = int(h)
    if not 1 <= h <= t_len - 1:
        raise ValueError(f"lag h={h} out of range for series of length {t_len}")
    return h
