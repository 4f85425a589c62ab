import json
import subprocess
import sys

import numpy as np
import pytest

from tfmcp import io as tio
from tfmcp.cli import main
from tfmcp.estimators import FitConfig, hope
from tfmcp.metrics import explained_variability


@pytest.fixture
def sim_file(tmp_path):
    out = tmp_path / "x.tts"
    code = main([
        "simulate", "--dims", "5", "6", "--r", "2", "--T", "60", "--w", "4",
        "--delta", "0.2", "--seed", "11", "--out", str(out),
        "--truth-out", str(tmp_path / "truth.json"),
    ])
    assert code == 0
    return out


class TestSimulate:
    def test_writes_series_and_truth(self, sim_file, tmp_path):
        x = tio.read_series(sim_file)
        assert x.shape == (60, 5, 6)
        truth = tio.read_model(tmp_path / "truth.json")
        assert truth.dims == (5, 6)

    def test_named_config_with_overrides(self, tmp_path, capsys):
        out = tmp_path / "c.tts"
        code = main([
            "simulate", "--config", "I", "--T", "30", "--dims", "6", "6",
            "--seed", "3", "--out", str(out),
        ])
        assert code == 0
        meta = json.loads(capsys.readouterr().out)
        assert meta["T"] == 30 and meta["dims"] == [6, 6] and meta["w"] == 6.0
        assert tio.read_series(out).shape == (30, 6, 6)

    def test_seed_logged_when_omitted(self, tmp_path, capsys):
        code = main([
            "simulate", "--dims", "4", "4", "--r", "1", "--T", "20",
            "--w", "2", "--out", str(tmp_path / "x.tts"),
        ])
        assert code == 0
        err = capsys.readouterr().err
        assert "using seed" in err


class TestSimulateUsage:
    def test_missing_required_params_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--out", str(tmp_path / "x.tts")])
        assert exc.value.code == 2


class TestFit:
    def test_matches_library_field_for_field(self, sim_file, tmp_path):
        result_path = tmp_path / "fit.json"
        code = main([
            "fit", "--input", str(sim_file), "--r", "2", "--method", "hope",
            "--out", str(result_path),
        ])
        assert code == 0
        payload = json.loads(result_path.read_text())

        x = tio.read_series(sim_file)
        res = hope(x, FitConfig(r=2))
        assert payload["method"] == "HOPE"
        assert payload["iterations"] == res.iterations
        assert payload["converged"] == res.converged
        np.testing.assert_array_equal(payload["weights"], res.weights)
        np.testing.assert_array_equal(payload["factors"], np.asarray(res.factors))
        for got, want in zip(payload["loadings"], res.loadings):
            np.testing.assert_array_equal(np.asarray(got), want)
        np.testing.assert_array_equal(payload["lambda_hat"], res.lambda_hat)
        assert payload["explained_variability"] == explained_variability(x, res)

    def test_result_validates_against_schema(self, sim_file, tmp_path):
        import jsonschema
        from importlib import resources

        result_path = tmp_path / "fit.json"
        assert main([
            "fit", "--input", str(sim_file), "--r", "2", "--out", str(result_path),
        ]) == 0
        schema = json.loads(
            resources.files("tfmcp").joinpath("schemas/fit_result.schema.json").read_text()
        )
        jsonschema.validate(json.loads(result_path.read_text()), schema)

    def test_csv_input_route(self, tmp_path):
        x = np.random.default_rng(0).standard_normal((12, 3, 4))
        csv_path = tmp_path / "x.csv"
        tio.write_csv_matrix_series(x, csv_path)
        code = main([
            "fit", "--input", str(csv_path), "--csv-dims", "3", "4",
            "--r", "1", "--method", "cpca", "--out", str(tmp_path / "f.json"),
        ])
        assert code == 0

    def test_zero_r_is_usage_error(self, sim_file):
        with pytest.raises(SystemExit) as exc:
            main(["fit", "--input", str(sim_file), "--r", "0"])
        assert exc.value.code == 2

    def test_missing_input_is_runtime_error(self, tmp_path, capsys):
        code = main(["fit", "--input", str(tmp_path / "nope.tts"), "--r", "1"])
        assert code == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert "error" in err and "message" in err


class TestLagScan:
    def test_single_row_and_selection(self, sim_file, capsys):
        code = main(["lag-scan", "--input", str(sim_file), "--h-max", "1", "--r", "2"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "h,explained_fraction"
        assert len(lines) == 3
        assert lines[-1] == "selected,1"

    def test_selected_is_argmax_of_table(self, sim_file, capsys):
        code = main(["lag-scan", "--input", str(sim_file), "--h-max", "4", "--r", "2"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        table = [ln.split(",") for ln in lines[1:-1]]
        fractions = {int(h): float(v) for h, v in table}
        selected = int(lines[-1].split(",")[1])
        assert fractions[selected] == max(fractions.values())


class TestBenchmarkCommand:
    def spec_file(self, tmp_path):
        spec = {
            "config": {"dims": [5, 5], "r": 2, "T": 60, "w": 4.0, "delta": 0.2},
            "sweep": {"variable": "delta", "grid": [0.1, 0.3]},
            "methods": ["cPCA", "HOPE"],
            "replications": 2,
            "seed": 5,
        }
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec))
        return path

    def test_end_to_end_and_rerun_identical(self, tmp_path, capsys):
        spec = self.spec_file(tmp_path)
        out1 = tmp_path / "run1"
        out2 = tmp_path / "run2"
        assert main(["benchmark", "--spec", str(spec), "--out-dir", str(out1)]) == 0
        assert main(["benchmark", "--spec", str(spec), "--out-dir", str(out2)]) == 0
        assert (out1 / "rows.csv").read_bytes() == (out2 / "rows.csv").read_bytes()
        assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()
        rows = (out1 / "rows.csv").read_text().strip().splitlines()
        assert rows[0] == "method,sweep_value,replication,max_error,matched_error,iterations,error"
        assert len(rows) == 1 + 2 * 2 * 2
        assert (out1 / "timings.csv").exists()

    def test_spec_validates_against_shipped_schema(self, tmp_path):
        import jsonschema
        from importlib import resources

        schema = json.loads(
            resources.files("tfmcp").joinpath("schemas/benchmark_spec.schema.json").read_text()
        )
        jsonschema.validate(json.loads(self.spec_file(tmp_path).read_text()), schema)


class TestEntryPoint:
    def test_console_script_usage_exit_code(self):
        proc = subprocess.run(
            [sys.executable, "-m", "tfmcp.cli", "fit", "--r", "1"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2

    def test_module_help(self):
        proc = subprocess.run(
            [sys.executable, "-m", "tfmcp.cli", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "simulate" in proc.stdout and "benchmark" in proc.stdout
