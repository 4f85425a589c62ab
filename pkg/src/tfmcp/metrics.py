"""Evaluation metrics: loading distance with label matching, factor
recovery, explained variability, and a small OLS helper for trend checks.

The loading distance between unit vectors is the spectral norm of the
difference of their rank-one projectors, ``sqrt(1 - <a_hat, a>^2)``, which
is free of the sign ambiguity.  Because factor labels can swap at finite
samples, estimated factors are matched to the truth by an exact assignment
maximizing the summed absolute inner products before the distances are
read off; the unmatched (identity assignment) figure is reported alongside.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linalg import projector_distance
from .model import CpFactorModel, reconstruct_series
from .tensor_ops import outer
from .validation import check_loadings, check_series


@dataclass(frozen=True)
class ErrorReport:
    """Per-(factor, mode) projector distances under the best label matching.

    ``assignment[i]`` is the estimated column matched to true factor i;
    ``per_pair[i, k]`` the distance for true factor i on mode k.
    ``unmatched_max`` is the same maximum without any matching.
    """

    per_pair: np.ndarray
    max_error: float
    assignment: np.ndarray
    unmatched_per_pair: np.ndarray
    unmatched_max: float

    def estimated_for_true(self) -> np.ndarray:
        """Inverse permutation: true factor i -> matched estimated column."""
        inv = np.empty_like(self.assignment)
        inv[self.assignment] = np.arange(self.assignment.size)
        return inv


def _pair_distances(est, truth, est_for_true) -> np.ndarray:
    r = truth[0].shape[1]
    n_modes = len(truth)
    out = np.empty((r, n_modes))
    for i in range(r):
        for k in range(n_modes):
            out[i, k] = projector_distance(
                est[k][:, est_for_true[i]], truth[k][:, i]
            )
    return out


def loading_error(est, truth) -> ErrorReport:
    """Projector distances between estimated and true loading sets.

    The permutation maximizing ``sum_{i,k} |<a_hat_{pi(i),k}, a_ik>|`` is
    found by exact assignment; distances are then reported per pair and as
    their maximum.
    """
    est = check_loadings(est)
    truth = check_loadings(truth)
    if len(est) != len(truth) or any(
        e.shape != t.shape for e, t in zip(est, truth)
    ):
        raise ValueError(
            f"shape mismatch: {[e.shape for e in est]} vs {[t.shape for t in truth]}"
        )
    r = truth[0].shape[1]
    affinity = np.zeros((r, r))
    for k in range(len(truth)):
        affinity += np.abs(est[k].T @ truth[k])
    rows, cols = linear_sum_assignment(-affinity)  # maximize
    assignment = cols.copy()  # estimated column p -> true factor assignment[p]
    est_for_true = np.empty(r, dtype=int)
    est_for_true[cols] = rows

    per_pair = _pair_distances(est, truth, est_for_true)
    identity = _pair_distances(est, truth, np.arange(r))
    return ErrorReport(
        per_pair=per_pair,
        max_error=float(per_pair.max()),
        assignment=assignment,
        unmatched_per_pair=identity,
        unmatched_max=float(identity.max()),
    )


def factor_recovery(fit, truth: CpFactorModel) -> np.ndarray:
    """Absolute correlation of each recovered factor path with the truth.

    Factors are matched through the loading assignment; the comparison is
    between ``w_hat_i f_hat_i(.)`` and ``w_i f_i(.)``, so it is free of the
    sign and scale ambiguity.
    """
    if truth.factors is None:
        raise ValueError("ground-truth model has no factor series")
    est_f = np.asarray(fit.factors, dtype=float)
    if est_f.shape[1] != truth.factors.shape[1]:
        raise ValueError(
            f"factor lengths differ: {est_f.shape[1]} vs {truth.factors.shape[1]}"
        )
    matched = loading_error(fit.loadings, truth.loadings).estimated_for_true()
    out = np.empty(truth.r)
    for i in range(truth.r):
        a = fit.weights[matched[i]] * est_f[matched[i]]
        b = truth.weights[i] * truth.factors[i]
        if np.std(a) == 0 or np.std(b) == 0:
            raise ValueError(f"factor {i} is constant; correlation undefined")
        out[i] = abs(float(np.corrcoef(a, b)[0, 1]))
    return out


def explained_variability(x, fit) -> float:
    """One minus the relative squared reconstruction residual.

    The reconstruction is ``sum_i w_hat_i f_hat_it (x)_k a_hat_ik``; the
    value is 1 for a perfect fit, 0 for the zero fit, and can be negative
    when the fit is worse than predicting zero.
    """
    x = check_series(x)
    total = float(np.sum(x * x))
    if total == 0.0:
        raise ValueError("series has zero norm; nothing to explain")
    model = CpFactorModel(
        weights=np.asarray(fit.weights, float),
        loadings=fit.loadings,
        factors=np.asarray(fit.factors, float),
    )
    resid = x - reconstruct_series(model)
    return 1.0 - float(np.sum(resid * resid)) / total


def reconstruction(fit, t: int) -> np.ndarray:
    """Fitted signal slice at time index t (0-based)."""
    coef = fit.weights * fit.factors[:, t]
    out = np.zeros(fit.dims)
    for i in range(fit.r):
        out += coef[i] * outer([a[:, i] for a in fit.loadings])
    return out


def linear_fit_r2(xs, ys) -> tuple[float, float, float]:
    """Ordinary least squares line and its R^2.

    Needs at least three points with non-constant ``xs``.  When ``ys`` is
    constant the total sum of squares vanishes and R^2 is defined as 0.
    """
    xs = np.asarray(xs, dtype=float).reshape(-1)
    ys = np.asarray(ys, dtype=float).reshape(-1)
    if xs.size != ys.size or xs.size < 3:
        raise ValueError("need at least three (x, y) points")
    if np.all(xs == xs[0]):
        raise ValueError("xs are all equal; the slope is undefined")
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    sst = float(np.sum((ys - ys.mean()) ** 2))
    ssr = float(np.sum((ys - pred) ** 2))
    r2 = 0.0 if sst == 0.0 else 1.0 - ssr / sst
    return float(slope), float(intercept), float(r2)
