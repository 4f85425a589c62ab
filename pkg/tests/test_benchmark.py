import numpy as np
import pytest

import tfmcp.benchmark as bench
from tfmcp.benchmark import (
    BenchmarkSpec,
    medians_by_method,
    rows_to_csv,
    run_benchmark,
    spec_from_dict,
    summarize,
    summary_to_csv,
    timings_to_csv,
)
from tfmcp.simulate import SimConfig, replication_seed


def tiny_spec(methods=("cPCA", "HOPE"), grid=(0.1, 0.3), reps=3, sweep="delta"):
    base = SimConfig(dims=(6, 6), r=2, t_len=80, w=4.0, delta=0.2, seed=0)
    return BenchmarkSpec(
        base=base, sweep=sweep, grid=grid, methods=methods,
        replications=reps, seed=99,
    )


class TestRunBenchmark:
    def test_row_count_and_order(self):
        spec = tiny_spec()
        rows = run_benchmark(spec)
        assert len(rows) == 2 * 2 * 3
        keys = [(r.method, r.sweep_value, r.replication) for r in rows]
        expected = [
            (m, v, i)
            for m in ("cPCA", "HOPE")
            for v in (0.1, 0.3)
            for i in range(3)
        ]
        assert keys == expected
        assert all(r.error == "" for r in rows)

    def test_deterministic_output(self):
        spec = tiny_spec()
        rows1 = run_benchmark(spec)
        rows2 = run_benchmark(spec)
        assert rows_to_csv(rows1) == rows_to_csv(rows2)
        assert summary_to_csv(summarize(spec, rows1)) == summary_to_csv(
            summarize(spec, rows2)
        )

    def test_timings_cover_rows(self):
        spec = tiny_spec(reps=2)
        rows = run_benchmark(spec)
        text = timings_to_csv(rows)
        assert len(text.strip().splitlines()) == len(rows) + 1
        assert all(r.seconds >= 0 for r in rows)

    def test_summary_matches_independent_recomputation(self):
        spec = tiny_spec(reps=4)
        rows = run_benchmark(spec)
        summary = summarize(spec, rows)
        for s in summary:
            cell = [
                r.matched_error
                for r in rows
                if r.method == s.method and r.sweep_value == s.sweep_value
            ]
            assert s.replications == len(cell) == 4
            assert np.isclose(s.median_matched_error, np.median(cell))
            assert np.isclose(s.q1_matched_error, np.percentile(cell, 25))
            assert np.isclose(s.q3_matched_error, np.percentile(cell, 75))

    def test_delta_sweep_carries_ols_fit(self):
        spec = tiny_spec(grid=(0.1, 0.2, 0.3), reps=2)
        summary = summarize(spec, run_benchmark(spec))
        cpca_rows = [s for s in summary if s.method == "cPCA"]
        assert all(s.fit_r2 is not None for s in cpca_rows)
        assert len({s.fit_r2 for s in cpca_rows}) == 1

    def test_t_sweep_has_no_fit_and_coerces_int(self):
        spec = tiny_spec(grid=(60, 80), sweep="T", reps=2)
        rows = run_benchmark(spec)
        summary = summarize(spec, rows)
        assert all(s.fit_r2 is None for s in summary)
        assert {r.sweep_value for r in rows} == {60, 80}

    def test_paired_replication_seeds(self):
        assert replication_seed(99, 2) == 99 ^ 2

    def test_failures_recorded_and_run_continues(self, monkeypatch):
        calls = {"n": 0}
        real = bench.iso_refine

        def flaky(x, init, cfg, lambda_hat=None):
            calls["n"] += 1
            if calls["n"] == 1:
                raise RuntimeError("boom")
            return real(x, init, cfg, lambda_hat=lambda_hat)

        monkeypatch.setattr(bench, "iso_refine", flaky)
        spec = tiny_spec(methods=("HOPE",), grid=(0.1,), reps=3)
        rows = run_benchmark(spec)
        assert len(rows) == 3
        failed = [r for r in rows if r.error]
        assert len(failed) == 1
        assert "boom" in failed[0].error
        assert failed[0].max_error is None
        summary = summarize(spec, rows)
        assert summary[0].failures == 1
        assert summary[0].median_matched_error is not None

    def test_invalid_sweep_value_recorded_per_row(self):
        spec = tiny_spec(methods=("cPCA",), grid=(0.1, 1.5), reps=2)
        rows = run_benchmark(spec)
        bad = [r for r in rows if r.error]
        assert len(bad) == 2 and all(r.sweep_value == 1.5 for r in bad)
        assert all("delta" in r.error for r in bad)

    def test_worker_pool_matches_serial(self):
        spec = tiny_spec(reps=2)
        serial = rows_to_csv(run_benchmark(spec))
        from dataclasses import replace

        parallel = rows_to_csv(run_benchmark(replace(spec, n_jobs=2)))
        assert serial == parallel


class TestSpecFromDict:
    def test_named_config_and_fields(self):
        spec = spec_from_dict({
            "config": "I",
            "sweep": {"variable": "delta", "grid": [0.1, 0.2]},
            "methods": ["cPCA", "HOPE"],
            "replications": 5,
            "seed": 7,
        })
        assert spec.base.dims == (40, 40)
        assert spec.replications == 5 and spec.seed == 7
        assert spec.methods == ("cpca", "hope")

    def test_explicit_config(self):
        spec = spec_from_dict({
            "config": {"dims": [4, 5], "r": 1, "T": 50, "w": 2.0},
            "sweep": {"variable": "w", "grid": [1, 2]},
            "methods": ["HOPE"],
        })
        assert spec.base.t_len == 50
        assert spec.replications == 100  # contract default

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            spec_from_dict({
                "config": "I",
                "sweep": {"variable": "delta", "grid": [0.1]},
                "methods": ["magic"],
            })

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            tiny_spec(grid=())

    def test_medians_lookup(self):
        spec = tiny_spec(reps=2)
        med = medians_by_method(summarize(spec, run_benchmark(spec)))
        assert set(med) == {"cPCA", "HOPE"}
        assert set(med["HOPE"]) == {0.1, 0.3}
