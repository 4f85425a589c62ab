"""Monte-Carlo benchmark harness sweeping one experiment knob.

A run simulates ``replications`` series per grid value (one seed per
replication, shared across grid values and methods so comparisons are
paired), fits every requested method, and scores each fit against the
ground truth.  Replications run in a worker pool; output rows are emitted
in (method, grid value, replication) order regardless of completion order,
and every value written is deterministic for a fixed spec and seed.  Wall
times go to a separate timings table so the main tables stay byte-stable.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import time
from dataclasses import dataclass, replace

import numpy as np

from .estimators import (
    FitConfig,
    METHOD_LABELS,
    als,
    cals,
    coals,
    cpca_init,
    finalize_fit,
    iso_refine,
    oals,
)
from .metrics import linear_fit_r2, loading_error
from .simulate import SimConfig, gen_series, named_config, replication_seed, with_overrides

ROW_FIELDS = (
    "method",
    "sweep_value",
    "replication",
    "max_error",
    "matched_error",
    "iterations",
    "error",
)
TIMING_FIELDS = ("method", "sweep_value", "replication", "seconds")
SUMMARY_FIELDS = (
    "method",
    "sweep_value",
    "replications",
    "failures",
    "median_matched_error",
    "q1_matched_error",
    "q3_matched_error",
    "median_max_error",
    "fit_slope",
    "fit_intercept",
    "fit_r2",
)

_SWEEP_FIELDS = {"delta": "delta", "w": "w", "T": "t_len"}


@dataclass(frozen=True)
class BenchmarkSpec:
    """One sweep: base configuration, swept variable and grid, methods.

    ``sweep`` is one of ``delta``, ``w``, ``T``.  ``methods`` use the
    canonical labels (cPCA, 1HOPE, HOPE, cALS, cOALS, ALS, OALS),
    case-insensitively.
    """

    base: SimConfig
    sweep: str
    grid: tuple[float, ...]
    methods: tuple[str, ...]
    replications: int = 100
    seed: int = 0
    n_jobs: int = 1
    fit: FitConfig | None = None

    def __post_init__(self):
        if self.sweep not in _SWEEP_FIELDS:
            raise ValueError(
                f"sweep must be one of {sorted(_SWEEP_FIELDS)}, got {self.sweep!r}"
            )
        if len(self.grid) == 0:
            raise ValueError("sweep grid must be nonempty")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        keys = tuple(m.strip().lower() for m in self.methods)
        unknown = [m for m in keys if m not in METHOD_LABELS]
        if unknown:
            raise ValueError(f"unknown methods: {unknown}")
        object.__setattr__(self, "methods", keys)
        object.__setattr__(self, "grid", tuple(self.grid))
        if self.fit is None:
            object.__setattr__(self, "fit", FitConfig(r=self.base.r))
        elif self.fit.r != self.base.r:
            raise ValueError("fit.r must match the base configuration's r")


def spec_from_dict(data: dict) -> BenchmarkSpec:
    """Build a spec from its JSON form (see schemas/benchmark_spec.schema.json)."""
    config = data["config"]
    if isinstance(config, str):
        base = named_config(config)
    else:
        params = dict(config)
        if "T" in params:
            params["t_len"] = params.pop("T")
        for key in ("dims", "ar_coeffs"):
            if key in params and params[key] is not None:
                params[key] = tuple(params[key])
        base = SimConfig(**params)
    sweep = data["sweep"]
    fit_params = dict(data.get("fit", {}))
    fit = FitConfig(r=base.r, **fit_params) if fit_params else None
    return BenchmarkSpec(
        base=base,
        sweep=sweep["variable"],
        grid=tuple(sweep["grid"]),
        methods=tuple(data["methods"]),
        replications=int(data.get("replications", 100)),
        seed=int(data.get("seed", 0)),
        n_jobs=int(data.get("n_jobs", 1)),
        fit=fit,
    )


@dataclass
class BenchmarkRow:
    method: str
    sweep_value: float
    replication: int
    max_error: float | None
    matched_error: float | None
    iterations: int | None
    seconds: float
    error: str = ""


def _coerce_value(sweep: str, value):
    return int(value) if sweep == "T" else float(value)


def _failed_rows(spec, value, replication, message) -> list[BenchmarkRow]:
    return [
        BenchmarkRow(
            method=METHOD_LABELS[key], sweep_value=value, replication=replication,
            max_error=None, matched_error=None, iterations=None,
            seconds=0.0, error=message,
        )
        for key in spec.methods
    ]


def _run_cell(spec: BenchmarkSpec, value, replication: int) -> list[BenchmarkRow]:
    """All requested methods on one simulated series."""
    seed = replication_seed(spec.seed, replication)
    try:
        sim = with_overrides(
            spec.base, seed=seed,
            **{_SWEEP_FIELDS[spec.sweep]: _coerce_value(spec.sweep, value)},
        )
        x, truth = gen_series(sim)
    except Exception as exc:
        return _failed_rows(spec, value, replication, f"{type(exc).__name__}: {exc}")
    cfg = FitConfig(
        r=sim.r,
        h=spec.fit.h,
        eps=spec.fit.eps,
        max_iter=spec.fit.max_iter,
        gram_floor=spec.fit.gram_floor,
        seed=seed,
        random_inits=spec.fit.random_inits,
    )

    init = lam = None
    init_seconds = 0.0
    init_error: str | None = None
    if any(m not in ("als", "oals") for m in spec.methods):
        tic = time.perf_counter()
        try:
            init, lam = cpca_init(x, cfg.r, cfg.h)
        except Exception as exc:  # recorded per dependent row
            init_error = f"{type(exc).__name__}: {exc}"
        init_seconds = time.perf_counter() - tic

    rows = []
    for key in spec.methods:
        tic = time.perf_counter()
        try:
            if key in ("als", "oals"):
                result = als(x, cfg) if key == "als" else oals(x, cfg)
                seconds = time.perf_counter() - tic
            elif init_error is not None:
                raise RuntimeError(f"initialization failed: {init_error}")
            elif key == "cpca":
                result = finalize_fit(x, init, cfg, method="cPCA", lambda_hat=lam)
                seconds = init_seconds + time.perf_counter() - tic
            elif key == "hope":
                result = iso_refine(x, init, cfg, lambda_hat=lam)
                seconds = init_seconds + time.perf_counter() - tic
            elif key == "1hope":
                result = iso_refine(x, init, replace(cfg, max_iter=1), lambda_hat=lam)
                seconds = init_seconds + time.perf_counter() - tic
            elif key == "cals":
                result = cals(x, init, cfg)
                seconds = init_seconds + time.perf_counter() - tic
            elif key == "coals":
                result = coals(x, init, cfg)
                seconds = init_seconds + time.perf_counter() - tic
            report = loading_error(result.loadings, truth.loadings)
            rows.append(BenchmarkRow(
                method=METHOD_LABELS[key],
                sweep_value=value,
                replication=replication,
                max_error=report.unmatched_max,
                matched_error=report.max_error,
                iterations=result.iterations,
                seconds=seconds,
            ))
        except Exception as exc:
            rows.append(BenchmarkRow(
                method=METHOD_LABELS[key],
                sweep_value=value,
                replication=replication,
                max_error=None,
                matched_error=None,
                iterations=None,
                seconds=time.perf_counter() - tic,
                error=f"{type(exc).__name__}: {exc}",
            ))
    return rows


def run_benchmark(spec: BenchmarkSpec) -> list[BenchmarkRow]:
    """Execute the sweep and return rows in (method, value, replication) order."""
    tasks = [(value, rep) for value in spec.grid for rep in range(spec.replications)]
    if spec.n_jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=spec.n_jobs) as pool:
            chunks = list(pool.map(
                _run_cell_star, ((spec, v, r) for v, r in tasks), chunksize=1
            ))
    else:
        chunks = [_run_cell(spec, v, r) for v, r in tasks]
    rows = [row for chunk in chunks for row in chunk]
    method_order = {METHOD_LABELS[m]: j for j, m in enumerate(spec.methods)}
    grid_order = {v: j for j, v in enumerate(spec.grid)}
    rows.sort(key=lambda r: (method_order[r.method], grid_order[r.sweep_value], r.replication))
    return rows


def _run_cell_star(args):
    return _run_cell(*args)


@dataclass
class SummaryRow:
    method: str
    sweep_value: float
    replications: int
    failures: int
    median_matched_error: float | None
    q1_matched_error: float | None
    q3_matched_error: float | None
    median_max_error: float | None
    fit_slope: float | None = None
    fit_intercept: float | None = None
    fit_r2: float | None = None


def summarize(spec: BenchmarkSpec, rows: list[BenchmarkRow]) -> list[SummaryRow]:
    """Quartile summary per (method, grid value).

    When the sweep is over ``delta`` with at least three grid points, each
    method's rows also carry the OLS fit of its median matched error
    against delta (slope, intercept, R^2), repeated on every row of that
    method.
    """
    out: list[SummaryRow] = []
    medians: dict[str, list[tuple[float, float]]] = {}
    for key in spec.methods:
        label = METHOD_LABELS[key]
        for value in spec.grid:
            cell = [r for r in rows if r.method == label and r.sweep_value == value]
            good = [r for r in cell if r.error == ""]
            failures = len(cell) - len(good)
            if good:
                matched = np.array([r.matched_error for r in good])
                raw = np.array([r.max_error for r in good])
                q1, med, q3 = np.percentile(matched, [25, 50, 75])
                med_raw = float(np.median(raw))
                medians.setdefault(label, []).append((float(value), float(med)))
                out.append(SummaryRow(label, value, len(cell), failures,
                                      float(med), float(q1), float(q3), med_raw))
            else:
                out.append(SummaryRow(label, value, len(cell), failures,
                                      None, None, None, None))
    if spec.sweep == "delta":
        for label, pts in medians.items():
            if len(pts) >= 3 and len({p[0] for p in pts}) >= 2:
                xs, ys = zip(*pts)
                slope, intercept, r2 = linear_fit_r2(xs, ys)
                for row in out:
                    if row.method == label and row.median_matched_error is not None:
                        row.fit_slope = slope
                        row.fit_intercept = intercept
                        row.fit_r2 = r2
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(header, records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for record in records:
        writer.writerow([_fmt(v) for v in record])
    return buf.getvalue()


def rows_to_csv(rows: list[BenchmarkRow]) -> str:
    return _write_csv(ROW_FIELDS, (
        (r.method, r.sweep_value, r.replication,
         r.max_error, r.matched_error, r.iterations, r.error)
        for r in rows
    ))


def timings_to_csv(rows: list[BenchmarkRow]) -> str:
    return _write_csv(TIMING_FIELDS, (
        (r.method, r.sweep_value, r.replication, r.seconds) for r in rows
    ))


def summary_to_csv(summary: list[SummaryRow]) -> str:
    return _write_csv(SUMMARY_FIELDS, (
        (s.method, s.sweep_value, s.replications, s.failures,
         s.median_matched_error, s.q1_matched_error, s.q3_matched_error,
         s.median_max_error, s.fit_slope, s.fit_intercept, s.fit_r2)
        for s in summary
    ))


def medians_by_method(summary: list[SummaryRow]) -> dict[str, dict[float, float]]:
    """Convenience lookup: method -> {grid value -> median matched error}."""
    out: dict[str, dict[float, float]] = {}
    for s in summary:
        if s.median_matched_error is not None:
            out.setdefault(s.method, {})[float(s.sweep_value)] = s.median_matched_error
    return out
