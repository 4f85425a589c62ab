"""CP-structured factor models and their coherence diagnostics.

A model stores r positive signal weights, K per-mode loading matrices with
unit-norm columns, and optionally the r x T latent factor series.  The
coherence report quantifies how far the loading set is from orthogonality,
per mode and after vectorizing each factor's rank-one tensor; the global
quantities multiply across modes, which is what the composite-PCA
initializer exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_ops import outer
from .validation import check_loadings


@dataclass
class CpFactorModel:
    """Rank-r CP factor model: weights, per-mode unit loadings, factors.

    Parameters
    ----------
    weights : ndarray, shape (r,)
        Nonnegative signal strengths (strictly positive for an
        identifiable model).
    loadings : list of K ndarrays, shape (d_k, r)
        Unit-norm columns; factor i's loading on mode k is column i.
    factors : ndarray, shape (r, T), optional
        Latent factor series.
    """

    weights: np.ndarray
    loadings: list[np.ndarray]
    factors: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.loadings = check_loadings(
            self.loadings, unit_columns=True, atol=1e-8
        )
        r = self.loadings[0].shape[1]
        if self.weights.shape != (r,):
            raise ValueError(
                f"expected {r} weights, got shape {self.weights.shape}"
            )
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if self.factors is not None:
            self.factors = np.asarray(self.factors, dtype=float)
            if self.factors.ndim != 2 or self.factors.shape[0] != r:
                raise ValueError(
                    f"factors must have shape ({r}, T), got {self.factors.shape}"
                )

    @property
    def r(self) -> int:
        return self.loadings[0].shape[1]

    @property
    def k(self) -> int:
        return len(self.loadings)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(a.shape[0] for a in self.loadings)

    @property
    def t_len(self) -> int:
        if self.factors is None:
            raise ValueError("model has no factor series")
        return self.factors.shape[1]


@dataclass(frozen=True)
class CoherenceReport:
    """Non-orthogonality diagnostics of a loading set.

    ``theta_k``/``delta_k`` are per-mode: maximum absolute off-diagonal
    column correlation and spectral deviation of the Gram from identity.
    ``theta``/``delta`` are the same quantities for the vectorized rank-one
    loadings; ``eta`` holds, per mode, the Euclidean norm of each Gram
    column's off-diagonal part.  ``mu_star`` is the leave-two-out mutual
    coherence.
    """

    theta_k: np.ndarray
    delta_k: np.ndarray
    eta: list[np.ndarray]
    theta: float
    delta: float
    mu_star: float
    r: int
    n_modes: int


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    holds: bool
    lhs: float
    rhs: float


@dataclass(frozen=True)
class ModelDiagnostics:
    """Signal-strength spectrum lambda_i, its minimum gap, and the SNR."""

    lambdas: np.ndarray
    lambda_star: float
    snr: float


def _spec_norm_sym(m: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh((m + m.T) / 2.0)).max())


def coherence_report(loadings) -> CoherenceReport:
    """Coherence measures of a per-mode loading set with unit columns.

    For ``r < 2`` every coherence is 0 and ``mu_star`` is 1 by convention.
    The vectorized Gram is computed as the entrywise product of the K mode
    Grams, which is exact because inner products of rank-one tensors
    factor across modes.
    """
    mats = check_loadings(loadings, unit_columns=True, atol=1e-6)
    n_modes = len(mats)
    r = mats[0].shape[1]
    if r < 2:
        return CoherenceReport(
            theta_k=np.zeros(n_modes),
            delta_k=np.zeros(n_modes),
            eta=[np.zeros(r) for _ in range(n_modes)],
            theta=0.0,
            delta=0.0,
            mu_star=1.0,
            r=r,
            n_modes=n_modes,
        )

    grams = [a.T @ a for a in mats]
    eye = np.eye(r)
    off = ~eye.astype(bool)

    theta_k = np.array([np.abs(g[off]).max() for g in grams])
    delta_k = np.array([_spec_norm_sym(g - eye) for g in grams])
    eta = [np.sqrt(np.sum((g - np.diag(np.diag(g))) ** 2, axis=0)) for g in grams]

    gram_all = np.ones((r, r))
    for g in grams:
        gram_all *= g
    theta = float(np.abs(gram_all[off]).max())
    delta = _spec_norm_sym(gram_all - eye)

    mu_star = _mu_star(grams, eta, r, n_modes)
    return CoherenceReport(
        theta_k=theta_k,
        delta_k=delta_k,
        eta=eta,
        theta=theta,
        delta=delta,
        mu_star=mu_star,
        r=r,
        n_modes=n_modes,
    )


def _mu_star(grams, eta, r: int, n_modes: int) -> float:
    """Leave-two-out mutual coherence.

    For each factor j, the best pair of modes (k1, k2) is left out and the
    remaining modes contribute ``sqrt(r) |sigma_ij,k| / eta_jk``; a mode
    with ``eta_jk == 0`` carries no coherence and contributes a neutral 1.
    """
    if n_modes < 3:
        return 1.0
    best_over_j = []
    for j in range(r):
        terms = np.ones((n_modes, r))
        for k in range(n_modes):
            if eta[k][j] > 0:
                terms[k] = np.sqrt(r) * np.abs(grams[k][:, j]) / eta[k][j]
        others = [i for i in range(r) if i != j]
        candidates = []
        for k1 in range(n_modes - 1):
            for k2 in range(k1 + 1, n_modes):
                keep = [k for k in range(n_modes) if k not in (k1, k2)]
                prod = np.ones(len(others))
                for k in keep:
                    prod *= terms[k][others]
                candidates.append(prod.max())
        best_over_j.append(min(candidates))
    return float(max(best_over_j))


def check_prop1(rep: CoherenceReport) -> list[InequalityCheck]:
    """Evaluate the multiplicative coherence inequalities on a report.

    Returns one record per inequality with the compared values; a tiny
    relative slack absorbs floating-point dust.
    """
    r, k = rep.r, rep.n_modes
    pairs = [
        ("delta <= min_k delta_k", rep.delta, float(np.min(rep.delta_k))),
        ("delta <= (r-1) * theta", rep.delta, (r - 1) * rep.theta),
        ("theta <= prod_k theta_k", rep.theta, float(np.prod(rep.theta_k))),
        (
            "delta <= mu_star * r^(1-K/2) * prod_k delta_k",
            rep.delta,
            rep.mu_star * r ** (1 - k / 2) * float(np.prod(rep.delta_k)),
        ),
    ]
    out = []
    for name, lhs, rhs in pairs:
        slack = 1e-10 * max(1.0, abs(rhs))
        out.append(InequalityCheck(name, bool(lhs <= rhs + slack), lhs, rhs))
    return out


def reconstruct(model: CpFactorModel, t: int) -> np.ndarray:
    """Signal tensor at time index ``t`` (0-based): sum_i w_i f_it (x)_k a_ik."""
    if model.factors is None:
        raise ValueError("model has no factor series to reconstruct from")
    coef = model.weights * model.factors[:, t]
    out = np.zeros(model.dims)
    for i in range(model.r):
        out += coef[i] * outer([a[:, i] for a in model.loadings])
    return out


def reconstruct_series(model: CpFactorModel) -> np.ndarray:
    """Full signal series, shape (T, d_1, ..., d_K)."""
    if model.factors is None:
        raise ValueError("model has no factor series to reconstruct from")
    coef = model.weights[:, None] * model.factors  # (r, T)
    letters = [chr(ord("a") + k) for k in range(model.k)]
    subs = "zt," + ",".join(f"{c}z" for c in letters) + "->t" + "".join(letters)
    return np.einsum(subs, coef, *model.loadings)


def snr(model: CpFactorModel, sigma: float) -> float:
    """Signal-to-noise ratio ``sum_i w_i^2 / (sigma^2 d)``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = float(np.prod(model.dims))
    return float(np.sum(model.weights**2) / (sigma**2 * d))


def diagnostics(
    model: CpFactorModel,
    sigma: float = 1.0,
    h: int = 1,
    ar_coeffs=None,
) -> ModelDiagnostics:
    """Signal spectrum lambda_i = w_i^2 E[f_{i,t-h} f_{i,t}], its gap, the SNR.

    With ``ar_coeffs`` given, the stationary AR(1) closed form
    ``w_i^2 phi_i^h / (1 - phi_i^2)`` is used (factors unnormalized);
    otherwise the sample autocovariance of the stored factors.  The gap
    convention pads the spectrum with +inf above and 0 below, so the
    estimate reflects the factor ordering as given.
    """
    w2 = model.weights**2
    if ar_coeffs is not None:
        phis = np.asarray(ar_coeffs, dtype=float).reshape(-1)
        if phis.shape != (model.r,):
            raise ValueError(f"expected {model.r} AR coefficients")
        lambdas = w2 * phis**h / (1.0 - phis**2)
    else:
        if model.factors is None:
            raise ValueError("need either ar_coeffs or a stored factor series")
        f = model.factors
        t_len = f.shape[1]
        if h >= t_len:
            raise ValueError(f"lag h={h} too large for T={t_len}")
        acov = np.sum(f[:, : t_len - h] * f[:, h:], axis=1) / (t_len - h)
        lambdas = w2 * acov

    padded = np.concatenate(([np.inf], lambdas, [0.0]))
    gaps = np.minimum(padded[:-2] - padded[1:-1], padded[1:-1] - padded[2:])
    lambda_star = float(np.min(gaps))
    return ModelDiagnostics(
        lambdas=lambdas, lambda_star=lambda_star, snr=snr(model, sigma)
    )
