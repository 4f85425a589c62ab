"""Command-line interface: simulate, fit, lag-scan, benchmark.

Every command is a thin wrapper over the library; JSON and CSV outputs
carry exactly the library results.  Exit codes: 0 success, 1 runtime
failure (machine-readable error JSON on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io as tio
from .benchmark import (
    rows_to_csv,
    run_benchmark,
    spec_from_dict,
    summarize,
    summary_to_csv,
    timings_to_csv,
)
from .estimators import FitConfig, fit_method
from .metrics import explained_variability
from .moments import lag_scan
from .simulate import SimConfig, gen_series, named_config
from .validation import check_series


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    seed = int(np.random.SeedSequence().entropy % (1 << 63))
    print(f"no --seed given; using seed {seed}", file=sys.stderr)
    return seed


def _load_series(args) -> np.ndarray:
    path = Path(args.input)
    if args.csv_dims:
        rows, cols = args.csv_dims
        return tio.read_csv_matrix_series(path, rows, cols)
    return tio.read_series(path)


def _cmd_simulate(args) -> int:
    seed = _resolve_seed(args.seed)
    if args.config:
        overrides = {}
        if args.dims:
            overrides["dims"] = tuple(args.dims)
        if args.r is not None:
            overrides["r"] = args.r
        if args.T is not None:
            overrides["t_len"] = args.T
        if args.w is not None:
            overrides["w"] = args.w
        if args.delta is not None:
            overrides["delta"] = args.delta
        if args.phi:
            overrides["ar_coeffs"] = tuple(args.phi)
        if args.psi is not None:
            overrides["psi"] = args.psi
        if args.noise_scale is not None:
            overrides["noise_scale"] = args.noise_scale
        cfg = named_config(args.config, seed=seed, **overrides)
    else:
        if not (args.dims and args.r is not None and args.T is not None
                and args.w is not None):
            raise UsageError("without --config, provide --dims, --r, --T and --w")
        cfg = SimConfig(
            dims=tuple(args.dims),
            r=args.r,
            t_len=args.T,
            w=args.w,
            delta=args.delta if args.delta is not None else 0.0,
            ar_coeffs=tuple(args.phi) if args.phi else None,
            psi=args.psi if args.psi is not None else 0.1,
            noise_scale=args.noise_scale if args.noise_scale is not None else 1.0,
            seed=seed,
        )
    series, truth = gen_series(cfg)
    tio.write_series(series, args.out)
    if args.truth_out:
        tio.write_model(truth, args.truth_out)
    print(json.dumps({
        "out": str(args.out),
        "truth_out": None if not args.truth_out else str(args.truth_out),
        "dims": list(cfg.dims),
        "r": cfg.r,
        "T": cfg.t_len,
        "w": cfg.w,
        "delta": cfg.delta,
        "seed": seed,
    }))
    return 0


def _cmd_fit(args) -> int:
    x = _load_series(args)
    x = check_series(x)
    if args.method in ("als", "oals") and args.seed is None:
        args.seed = _resolve_seed(None)
    t_len = x.shape[0]
    if args.h > t_len // 4:
        print(
            f"warning: lag h={args.h} exceeds T/4 = {t_len // 4}; the moment "
            "average uses few terms",
            file=sys.stderr,
        )
    cfg = FitConfig(
        r=args.r,
        h=args.h,
        eps=args.eps,
        max_iter=args.max_iter,
        gram_floor=args.gram_floor,
        seed=args.seed,
        random_inits=args.random_inits,
    )
    tic = time.perf_counter()
    result = fit_method(x, args.method, cfg)
    elapsed = time.perf_counter() - tic
    payload = tio.fit_result_to_dict(result, extras={
        "h": cfg.h,
        "eps": cfg.eps,
        "max_iter": cfg.max_iter,
        "gram_floor": cfg.gram_floor,
        "seed": cfg.seed,
        "explained_variability": explained_variability(x, result),
        "elapsed_seconds": elapsed,
        "input": str(args.input),
    })
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_lag_scan(args) -> int:
    x = _load_series(args)
    table = lag_scan(x, args.h_max, args.r)
    selected = max(table, key=lambda hv: (hv[1], -hv[0]))[0]
    print("h,explained_fraction")
    for h, frac in table:
        print(f"{h},{frac!r}")
    print(f"selected,{selected}")
    return 0


def _cmd_benchmark(args) -> int:
    data = json.loads(Path(args.spec).read_text())
    if args.replications is not None:
        data["replications"] = args.replications
    elif "replications" not in data:
        data["replications"] = 20  # desk-scale default; pass 100 for full fidelity
    if args.seed is not None:
        data["seed"] = args.seed
    if args.jobs is not None:
        data["n_jobs"] = args.jobs
    spec = spec_from_dict(data)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = run_benchmark(spec)
    summary = summarize(spec, rows)
    (out_dir / "rows.csv").write_text(rows_to_csv(rows))
    (out_dir / "summary.csv").write_text(summary_to_csv(summary))
    (out_dir / "timings.csv").write_text(timings_to_csv(rows))
    failures = sum(1 for r in rows if r.error)
    print(json.dumps({
        "rows": str(out_dir / "rows.csv"),
        "summary": str(out_dir / "summary.csv"),
        "timings": str(out_dir / "timings.csv"),
        "n_rows": len(rows),
        "failures": failures,
        "seed": spec.seed,
    }))
    return 0


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tfmcp",
        description="CP-structured factor models for tensor time series",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic series")
    sim.add_argument("--config", choices=["I", "II", "III", "IV", "V"],
                     help="named experiment configuration")
    sim.add_argument("--dims", type=_positive_int, nargs="+", metavar="D")
    sim.add_argument("--r", type=_positive_int)
    sim.add_argument("--T", type=_positive_int)
    sim.add_argument("--w", type=float)
    sim.add_argument("--delta", type=float)
    sim.add_argument("--phi", type=float, nargs="+", metavar="PHI")
    sim.add_argument("--psi", type=float)
    sim.add_argument("--noise-scale", type=float, dest="noise_scale")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", required=True, help="output TTS1 path")
    sim.add_argument("--truth-out", dest="truth_out",
                     help="write the ground-truth model JSON here")
    sim.set_defaults(func=_cmd_simulate)

    fit = sub.add_parser("fit", help="estimate a factor model from a series file")
    fit.add_argument("--input", required=True, help="TTS1 file (or CSV with --csv-dims)")
    fit.add_argument("--csv-dims", type=_positive_int, nargs=2, metavar=("ROWS", "COLS"),
                     help="treat the input as a CSV of flattened matrix slices")
    fit.add_argument("--r", type=_positive_int, required=True)
    fit.add_argument("--h", type=_positive_int, default=1)
    fit.add_argument("--method", default="hope",
                     choices=["cpca", "hope", "1hope", "cals", "coals", "als", "oals"])
    fit.add_argument("--eps", type=float, default=1e-6)
    fit.add_argument("--max-iter", type=_positive_int, default=30, dest="max_iter")
    fit.add_argument("--gram-floor", type=float, default=0.1, dest="gram_floor")
    fit.add_argument("--random-inits", type=_positive_int, default=20, dest="random_inits")
    fit.add_argument("--seed", type=int)
    fit.add_argument("--out", help="result JSON path (default: stdout)")
    fit.set_defaults(func=_cmd_fit)

    scan = sub.add_parser("lag-scan", help="explained fraction per lag")
    scan.add_argument("--input", required=True)
    scan.add_argument("--csv-dims", type=_positive_int, nargs=2, metavar=("ROWS", "COLS"))
    scan.add_argument("--h-max", type=_positive_int, required=True, dest="h_max")
    scan.add_argument("--r", type=_positive_int, required=True)
    scan.set_defaults(func=_cmd_lag_scan)

    bench = sub.add_parser("benchmark", help="run a Monte-Carlo sweep from a spec file")
    bench.add_argument("--spec", required=True, help="benchmark spec JSON")
    bench.add_argument("--out-dir", required=True, dest="out_dir")
    bench.add_argument("--replications", type=_positive_int)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--jobs", type=_positive_int)
    bench.set_defaults(func=_cmd_benchmark)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with code 2
    except BrokenPipeError:
        return 1
    except Exception as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
