"""Estimation of CP-structured tensor factor models.

Four routes are implemented on top of the lag-h cross moment:

* ``cpca_init`` -- composite PCA: top eigenvectors of the symmetrized
  square moment, reshaped per factor and rank-one approximated per mode.
  Its accuracy degrades with the coherence of the loading set.
* ``iso_refine`` -- iterative simultaneous orthogonalization: each factor's
  loading on each mode is re-estimated from the series projected through
  the other modes' dual (B-matrix) columns, which strips the remaining
  factors multiplicatively.  ``hope`` composes the two; ``one_step_hope``
  stops after a single sweep.
* ``cals`` / ``coals`` -- rank-one and orthogonalized alternating least
  squares on the moment tensor, warm-started from composite PCA; ``als``
  and ``oals`` are the classic random-restart variants.

All estimators are deterministic given (series, init, config).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .linalg import (
    RankDeficientError,
    projector_distance,
    qr_orthonormalize,
    regularized_b,
    sign_normalize,
    sym_top_eigs,
)
from .moments import lagged_cross_moment
from .tensor_ops import khatri_rao, multi_contract, unfold
from .validation import check_lag, check_loadings, check_series


class EstimationError(RuntimeError):
    """An estimator hit a degenerate state it cannot recover from."""


@dataclass(frozen=True)
class FitConfig:
    """Knobs shared by the iterative estimators.

    ``eps`` bounds the per-loading projector change at which iteration
    stops, ``max_iter`` the number of sweeps, and ``gram_floor`` the
    eigenvalue floor used when inverting loading Grams.  ``seed`` and
    ``random_inits`` only matter for the random-restart ALS/OALS variants.
    """

    r: int
    h: int = 1
    eps: float = 1e-6
    max_iter: int = 30
    gram_floor: float = 0.1
    seed: int | None = None
    random_inits: int = 20

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if self.h < 1:
            raise ValueError("h must be at least 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0.0 < self.gram_floor < 1.0:
            raise ValueError("gram_floor must lie in (0, 1)")
        if self.random_inits < 1:
            raise ValueError("random_inits must be at least 1")


@dataclass
class ProjectionState:
    """Loading estimates and their dual B-matrices at some iteration."""

    a_hat: list[np.ndarray]
    b_hat: list[np.ndarray]
    iteration: int


@dataclass
class FitResult:
    """Output of one estimator run.

    ``loadings`` are sign-normalized unit columns; ``factors`` carry unit
    sum of squares per row, with the scale in ``weights``.  ``trace``
    records the maximum projector change per iteration.
    """

    method: str
    loadings: list[np.ndarray]
    weights: np.ndarray
    factors: np.ndarray
    lambda_hat: np.ndarray | None
    iterations: int
    trace: list[float]
    converged: bool
    messages: list[str] = field(default_factory=list)

    @property
    def r(self) -> int:
        return self.loadings[0].shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(a.shape[0] for a in self.loadings)


# ||uu' - vv'||_S for unit vectors; equals sqrt(1 - <u, v>^2)
_vector_change = projector_distance


def _contract_series(x: np.ndarray, vectors: dict[int, np.ndarray]) -> np.ndarray:
    """Contract every time slice over the given modes (0-based, per slice)."""
    out = x
    for mode in sorted(vectors, reverse=True):
        out = np.tensordot(out, vectors[mode], axes=(mode + 1, 0))
    return out


def _lagged_vector_moment(z: np.ndarray, h: int) -> np.ndarray:
    t_len = z.shape[0]
    m = z[: t_len - h].T @ z[h:]
    m /= t_len - h
    return (m + m.T) / 2.0


def _weights_factors(x: np.ndarray, b_hat: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Signal scales and unit-energy factor series from the dual projections."""
    n_modes = len(b_hat)
    r = b_hat[0].shape[1]
    t_len = x.shape[0]
    weights = np.zeros(r)
    factors = np.zeros((r, t_len))
    for i in range(r):
        s = _contract_series(x, {k: b_hat[k][:, i] for k in range(n_modes)})
        w = float(np.linalg.norm(s))
        weights[i] = w
        factors[i] = s / w if w > 0 else 0.0
    return weights, factors


def _finalize(
    x: np.ndarray,
    loadings: list[np.ndarray],
    cfg: FitConfig,
    *,
    method: str,
    lambda_hat: np.ndarray | None,
    iterations: int,
    trace: list[float],
    converged: bool,
    messages: list[str],
) -> FitResult:
    b_hat = [regularized_b(a, cfg.gram_floor) for a in loadings]
    weights, factors = _weights_factors(x, b_hat)
    if lambda_hat is not None:
        lam = np.asarray(lambda_hat, dtype=float)
        if np.any(np.diff(lam) > -1e-10):
            messages = messages + [
                "adjacent spectral values are within 1e-10 of each other; "
                "factor labels may be unstable"
            ]
    return FitResult(
        method=method,
        loadings=loadings,
        weights=weights,
        factors=factors,
        lambda_hat=None if lambda_hat is None else np.asarray(lambda_hat, float),
        iterations=iterations,
        trace=trace,
        converged=converged,
        messages=messages,
    )


def finalize_fit(
    x,
    loadings: Sequence[np.ndarray],
    cfg: FitConfig,
    *,
    method: str = "custom",
    lambda_hat: np.ndarray | None = None,
    iterations: int = 0,
    trace: Sequence[float] = (),
    converged: bool = True,
) -> FitResult:
    """Package an arbitrary loading set as a fit: duals, weights, factors.

    Useful for scoring externally obtained loadings with the same output
    conventions as the estimators.
    """
    x = check_series(x)
    mats = check_loadings(loadings, dims=tuple(x.shape[1:]), unit_columns=True, atol=1e-6)
    return _finalize(
        x, [m.copy() for m in mats], cfg, method=method, lambda_hat=lambda_hat,
        iterations=iterations, trace=list(trace), converged=converged, messages=[],
    )


def cpca_init(x, r: int, h: int = 1) -> tuple[list[np.ndarray], np.ndarray]:
    """Composite-PCA loading estimates and the top-r moment spectrum.

    Builds the symmetrized square moment at lag ``h``, extracts its top r
    eigenpairs, reshapes each eigenvector to a tensor, and takes the top
    left singular vector of every mode unfolding.

    Returns
    -------
    loadings : list of K (d_k, r) arrays, sign-normalized unit columns
    lambda_hat : (r,) array, the top eigenvalues in descending order
    """
    x = check_series(x)
    dims = tuple(x.shape[1:])
    d = int(np.prod(dims))
    if not 1 <= r <= d:
        raise ValueError(f"r={r} out of range for d={d}")
    check_lag(h, x.shape[0])

    mom = lagged_cross_moment(x, h, tensor_budget=0)
    pairs = sym_top_eigs(mom.square, r)
    loadings = [np.empty((dk, r)) for dk in dims]
    for i in range(r):
        u = pairs.vectors[:, i].reshape(dims, order="F")
        for k in range(len(dims)):
            loadings[k][:, i] = sign_normalize(
                sym_top_eigs(unfold(u, k) @ unfold(u, k).T, 1).vectors[:, 0]
            )
    return loadings, pairs.values.copy()


def cpca(x, cfg: FitConfig) -> FitResult:
    """Composite PCA packaged as a full fit (weights/factors via its duals)."""
    x = check_series(x)
    loadings, lam = cpca_init(x, cfg.r, cfg.h)
    return _finalize(
        x, loadings, cfg, method="cPCA", lambda_hat=lam,
        iterations=0, trace=[], converged=True, messages=[],
    )


def project_z(x, state: ProjectionState, i: int, k: int) -> np.ndarray:
    """Series of factor-i projections leaving mode k free: (T, d_k).

    Contracts every slice against the state's dual columns on all modes
    other than ``k``; under the true duals this isolates
    ``w_i f_it a_ik`` plus projected noise.
    """
    x = check_series(x)
    n_modes = x.ndim - 1
    if not 0 <= k < n_modes:
        raise ValueError(f"mode {k} out of range")
    vectors = {}
    for mode in range(n_modes):
        if mode == k:
            continue
        b = state.b_hat[mode][:, i]
        if b.shape[0] != x.shape[mode + 1]:
            raise ValueError(
                f"dual vector for mode {mode} has length {b.shape[0]}, "
                f"expected {x.shape[mode + 1]}"
            )
        vectors[mode] = b
    return _contract_series(x, vectors)


def projection_leakage(model, state: ProjectionState, mode: int) -> np.ndarray:
    """Leakage matrix xi with xi[i, j] = prod_{l != mode} <b_hat_il, a_jl>.

    Diagnostic for simulations: under the true duals it is the identity;
    off-diagonal entries measure how much of factor j survives the
    projection aimed at factor i when updating ``mode``.
    """
    n_modes = len(state.b_hat)
    xi = np.ones((state.b_hat[0].shape[1], model.loadings[0].shape[1]))
    for ell in range(n_modes):
        if ell == mode:
            continue
        xi *= state.b_hat[ell].T @ model.loadings[ell]
    return xi


def iso_refine(
    x,
    init: Sequence[np.ndarray],
    cfg: FitConfig,
    lambda_hat: np.ndarray | None = None,
    callback: Callable[[ProjectionState], None] | None = None,
) -> FitResult:
    """Iterative simultaneous orthogonalization from a warm start.

    Sweeps modes in order; within a sweep, modes already updated this
    iteration contribute their refreshed dual columns and the others their
    previous ones.  Each (factor, mode) update takes the top eigenvector of
    the lag-h moment of the projected series.  Stops when every loading's
    projector moves by at most ``cfg.eps`` or after ``cfg.max_iter``
    iterations (the result then carries ``converged=False``).
    """
    x = check_series(x)
    dims = tuple(x.shape[1:])
    n_modes = len(dims)
    mats = check_loadings(init, dims=dims)
    r = mats[0].shape[1]
    if r != cfg.r:
        raise ValueError(f"init has {r} columns but cfg.r={cfg.r}")
    check_lag(cfg.h, x.shape[0])
    if r > min(dims):
        warnings.warn(
            f"r={r} exceeds the smallest mode size {min(dims)}; the dual "
            "projections are not well conditioned",
            stacklevel=2,
        )

    # defensive renormalization; the refinement assumes unit columns
    norms = [np.linalg.norm(a, axis=0, keepdims=True) for a in mats]
    if any(np.any(n == 0) for n in norms):
        raise ValueError("init contains a zero column")
    a_hat = [a / n for a, n in zip(mats, norms)]
    b_hat = [regularized_b(a, cfg.gram_floor) for a in a_hat]

    trace: list[float] = []
    converged = False
    iterations = 0
    for m in range(1, cfg.max_iter + 1):
        iterations = m
        prev = [a.copy() for a in a_hat]
        for k in range(n_modes):
            for i in range(r):
                vectors = {
                    ell: b_hat[ell][:, i] for ell in range(n_modes) if ell != k
                }
                z = _contract_series(x, vectors)
                sz = _lagged_vector_moment(z, cfg.h)
                a_hat[k][:, i] = sign_normalize(sym_top_eigs(sz, 1).vectors[:, 0])
            b_hat[k] = regularized_b(a_hat[k], cfg.gram_floor)
        delta = max(
            _vector_change(a_hat[k][:, i], prev[k][:, i])
            for k in range(n_modes)
            for i in range(r)
        )
        trace.append(delta)
        if callback is not None:
            callback(ProjectionState(
                [a.copy() for a in a_hat], [b.copy() for b in b_hat], m
            ))
        if delta <= cfg.eps:
            converged = True
            break

    messages = [] if converged else [
        f"no convergence within {cfg.max_iter} iterations "
        f"(last projector change {trace[-1]:.3e})"
    ]
    return _finalize(
        x, a_hat, cfg, method="ISO", lambda_hat=lambda_hat,
        iterations=iterations, trace=trace, converged=converged,
        messages=messages,
    )


def hope(x, cfg: FitConfig) -> FitResult:
    """Composite-PCA initialization followed by the iterative refinement."""
    x = check_series(x)
    init, lam = cpca_init(x, cfg.r, cfg.h)
    res = iso_refine(x, init, cfg, lambda_hat=lam)
    res.method = "HOPE"
    return res


def one_step_hope(x, cfg: FitConfig) -> FitResult:
    """A single refinement sweep after composite PCA."""
    res = hope(x, replace(cfg, max_iter=1))
    res.method = "1HOPE"
    return res


def _moment_tensor(x: np.ndarray, h: int) -> np.ndarray:
    mom = lagged_cross_moment(x, h)
    if mom.tensor is None:
        raise EstimationError(
            "the order-2K moment tensor exceeds the memory budget; "
            "the alternating least squares routes need it materialized"
        )
    return mom.tensor


def cals(x, init: Sequence[np.ndarray] | None, cfg: FitConfig) -> FitResult:
    """Rank-one alternating least squares on the moment tensor.

    Factors are fit independently: for factor i and mode k, the moment
    tensor is contracted on every mode except mode k's second copy, using
    this iteration's vectors on modes already visited and the previous
    iteration's on the rest, then normalized.  Warm start defaults to
    composite PCA.
    """
    x = check_series(x)
    dims = tuple(x.shape[1:])
    n_modes = len(dims)
    lam = None
    if init is None:
        init_mats, lam = cpca_init(x, cfg.r, cfg.h)
    else:
        init_mats = check_loadings(init, dims=dims)
    r = init_mats[0].shape[1]
    if r != cfg.r:
        raise ValueError(f"init has {r} columns but cfg.r={cfg.r}")
    sigma = _moment_tensor(x, cfg.h)

    loadings = [np.empty((dk, r)) for dk in dims]
    traces: list[list[float]] = []
    all_converged = True
    iterations = 0
    for i in range(r):
        cur = [init_mats[k][:, i] / np.linalg.norm(init_mats[k][:, i])
               for k in range(n_modes)]
        tr: list[float] = []
        conv = False
        for m in range(1, cfg.max_iter + 1):
            prev = [c.copy() for c in cur]
            for k in range(n_modes):
                contractions = []
                for ell in range(n_modes):
                    if ell < k:
                        contractions.append((ell, cur[ell]))
                    else:
                        contractions.append((ell, prev[ell]))  # includes mode k itself
                for ell in range(n_modes):
                    if ell == k:
                        continue  # second copy of mode k stays free
                    vec_ = cur[ell] if ell < k else prev[ell]
                    contractions.append((n_modes + ell, vec_))
                tilde = np.asarray(multi_contract(sigma, contractions))
                norm = float(np.linalg.norm(tilde))
                if norm == 0.0:
                    raise EstimationError(
                        f"contraction for factor {i} collapsed to zero at "
                        f"mode {k}, iteration {m}"
                    )
                cur[k] = sign_normalize(tilde / norm)
            delta = max(_vector_change(cur[k], prev[k]) for k in range(n_modes))
            tr.append(delta)
            iterations = max(iterations, m)
            if delta <= cfg.eps:
                conv = True
                break
        all_converged &= conv
        traces.append(tr)
        for k in range(n_modes):
            loadings[k][:, i] = cur[k]

    trace = [
        max(tr[m] for tr in traces if len(tr) > m)
        for m in range(max(len(tr) for tr in traces))
    ]
    messages = [] if all_converged else [
        f"no convergence within {cfg.max_iter} iterations for some factor"
    ]
    return _finalize(
        x, loadings, cfg, method="cALS", lambda_hat=lam,
        iterations=iterations, trace=trace, converged=all_converged,
        messages=messages,
    )


def _floored_orthonormalize(a: np.ndarray, floor: float) -> np.ndarray:
    gram = a.T @ a
    w, v = np.linalg.eigh((gram + gram.T) / 2.0)
    w = np.maximum(w, floor)
    return a @ (v * (1.0 / np.sqrt(w))) @ v.T


def coals(x, init: Sequence[np.ndarray] | None, cfg: FitConfig) -> FitResult:
    """Orthogonalized alternating least squares on the moment tensor.

    Each iteration QR-orthonormalizes every loading block, then rebuilds
    each mode's block as the mode unfolding of the moment tensor times the
    Khatri-Rao product of the other 2K-1 orthonormal blocks.  Columns are
    unit-normalized for the convergence test and the returned loadings.
    """
    x = check_series(x)
    dims = tuple(x.shape[1:])
    n_modes = len(dims)
    lam = None
    if init is None:
        init_mats, lam = cpca_init(x, cfg.r, cfg.h)
    else:
        init_mats = check_loadings(init, dims=dims)
    r = init_mats[0].shape[1]
    if r != cfg.r:
        raise ValueError(f"init has {r} columns but cfg.r={cfg.r}")
    if r > min(dims):
        raise ValueError(
            f"orthogonalized updates need r <= min(dims); got r={r}, dims={dims}"
        )
    if any(np.any(np.linalg.norm(m, axis=0) == 0) for m in init_mats):
        raise ValueError("init contains a zero column")
    sigma = _moment_tensor(x, cfg.h)
    unfoldings = [unfold(sigma, k) for k in range(n_modes)]

    a_blocks = [m.copy() for m in init_mats]
    trace: list[float] = []
    converged = False
    iterations = 0
    for m in range(1, cfg.max_iter + 1):
        iterations = m
        q_blocks = []
        for k in range(n_modes):
            try:
                q_blocks.append(qr_orthonormalize(a_blocks[k]))
            except RankDeficientError:
                q = _floored_orthonormalize(a_blocks[k], cfg.gram_floor)
                if not np.all(np.isfinite(q)):
                    raise EstimationError(
                        f"mode-{k} block stayed degenerate after the "
                        "Gram-floor fallback"
                    )
                q_blocks.append(q)
        prev_unit = [b / np.linalg.norm(b, axis=0, keepdims=True) for b in a_blocks]
        new_blocks = []
        for k in range(n_modes):
            other_modes = sorted(
                (ell for ell in range(2 * n_modes) if ell != k), reverse=True
            )
            mats = [q_blocks[ell if ell < n_modes else ell - n_modes]
                    for ell in other_modes]
            kr = khatri_rao(mats)
            new_blocks.append(unfoldings[k] @ kr)
        norms = [np.linalg.norm(b, axis=0) for b in new_blocks]
        if any(np.any(n == 0) for n in norms):
            raise EstimationError("an updated loading column collapsed to zero")
        new_unit = [b / n for b, n in zip(new_blocks, norms)]
        delta = max(
            _vector_change(new_unit[k][:, i], prev_unit[k][:, i])
            for k in range(n_modes)
            for i in range(r)
        )
        trace.append(delta)
        a_blocks = new_blocks
        if delta <= cfg.eps:
            converged = True
            break

    loadings = []
    for k in range(n_modes):
        unit = a_blocks[k] / np.linalg.norm(a_blocks[k], axis=0, keepdims=True)
        loadings.append(np.column_stack(
            [sign_normalize(unit[:, i]) for i in range(r)]
        ))
    messages = [] if converged else [
        f"no convergence within {cfg.max_iter} iterations "
        f"(last projector change {trace[-1]:.3e})"
    ]
    return _finalize(
        x, loadings, cfg, method="cOALS", lambda_hat=lam,
        iterations=iterations, trace=trace, converged=converged,
        messages=messages,
    )


def _moment_score(sigma: np.ndarray, loadings: list[np.ndarray]) -> float:
    """Captured-signal surrogate: sum_i |moment contracted on factor i|."""
    n_modes = len(loadings)
    r = loadings[0].shape[1]
    total = 0.0
    for i in range(r):
        contractions = [(k, loadings[k][:, i]) for k in range(n_modes)]
        contractions += [(n_modes + k, loadings[k][:, i]) for k in range(n_modes)]
        total += abs(float(multi_contract(sigma, contractions)))
    return total


def _random_restart(x, cfg: FitConfig, fit, method: str) -> FitResult:
    x = check_series(x)
    dims = tuple(x.shape[1:])
    sigma = _moment_tensor(x, cfg.h)
    rng = np.random.default_rng(0 if cfg.seed is None else cfg.seed)
    best: FitResult | None = None
    best_score = -np.inf
    best_run = -1
    failures = 0
    for run in range(cfg.random_inits):
        init = []
        for dk in dims:
            raw = rng.standard_normal((dk, cfg.r))
            init.append(raw / np.linalg.norm(raw, axis=0, keepdims=True))
        try:
            res = fit(x, init, cfg)
        except EstimationError:
            failures += 1
            continue
        score = _moment_score(sigma, res.loadings)
        if score > best_score:
            best, best_score, best_run = res, score, run
    if best is None:
        raise EstimationError(
            f"all {cfg.random_inits} random initializations failed"
        )
    best.method = method
    best.messages = best.messages + [
        f"best of {cfg.random_inits} random initializations (run {best_run}, "
        f"score {best_score:.6g}, {failures} failed)"
    ]
    return best


def als(x, cfg: FitConfig) -> FitResult:
    """Rank-one ALS with random restarts, best run kept by captured signal."""
    return _random_restart(x, cfg, cals, "ALS")


def oals(x, cfg: FitConfig) -> FitResult:
    """Orthogonalized ALS with random restarts."""
    return _random_restart(x, cfg, coals, "OALS")


METHODS: dict[str, Callable[..., FitResult]] = {
    "cpca": cpca,
    "hope": hope,
    "1hope": one_step_hope,
    "cals": lambda x, cfg: cals(x, None, cfg),
    "coals": lambda x, cfg: coals(x, None, cfg),
    "als": als,
    "oals": oals,
}

METHOD_LABELS = {
    "cpca": "cPCA",
    "hope": "HOPE",
    "1hope": "1HOPE",
    "cals": "cALS",
    "coals": "cOALS",
    "als": "ALS",
    "oals": "OALS",
}


def fit_method(x, method: str, cfg: FitConfig) -> FitResult:
    """Dispatch one of the named estimators by (case-insensitive) label."""
    key = method.strip().lower()
    if key not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)}")
    return METHODS[key](x, cfg)
