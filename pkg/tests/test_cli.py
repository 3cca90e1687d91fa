import csv
import json

import numpy as np
import pytest

from porous_curves.cli import build_oracle, main, run_experiment
from porous_curves.config import Settings, get_settings, require_settings
from porous_curves.engine.errors import ConfigError
from porous_curves.reports import RunReport, emit_plot_data, format_cell, write_csv, write_report
from porous_curves.schemas import get_schema, list_experiments, validate_config

THIRD = "0.3333333333333333"


def halving_config():
    return {
        "oracle": {"type": "ternary", "depth": 4},
        "curve": {"type": "line", "start": [THIRD, "0"], "velocity": [0, 1]},
        "engine": {"sigma": "0.8", "eps": "0.01", "lambda": "16", "rounds": 5},
    }


@pytest.fixture
def settings(tmp_path):
    return Settings(log_level="INFO", out_dir=tmp_path, default_seed=0, max_bisection_depth=40)


class TestSettings:
    """Environment-driven defaults."""

    def test_defaults(self, monkeypatch):
        for name in ("POROUS_LOG_LEVEL", "POROUS_OUT_DIR", "POROUS_DEFAULT_SEED", "POROUS_MAX_BISECTION_DEPTH"):
            monkeypatch.delenv(name, raising=False)
        settings = get_settings()
        assert settings.log_level == "INFO"
        assert settings.default_seed == 0 and settings.max_bisection_depth == 40

    def test_bad_level(self, monkeypatch):
        monkeypatch.setenv("POROUS_LOG_LEVEL", "chatty")
        with pytest.raises(ValueError, match="POROUS_LOG_LEVEL"):
            get_settings()

    def test_bad_integer(self, monkeypatch):
        monkeypatch.setenv("POROUS_DEFAULT_SEED", "seven")
        with pytest.raises(ValueError, match="must be an integer"):
            get_settings()

    def test_depth_must_be_positive(self, monkeypatch):
        monkeypatch.setenv("POROUS_MAX_BISECTION_DEPTH", "0")
        with pytest.raises(ValueError):
            get_settings()

    def test_required_variables(self, monkeypatch):
        monkeypatch.delenv("POROUS_EXTRA_ONE", raising=False)
        monkeypatch.setenv("POROUS_EXTRA_TWO", "x")
        with pytest.raises(ValueError, match="Missing required environment variables: POROUS_EXTRA_ONE"):
            require_settings(["POROUS_EXTRA_ONE", "POROUS_EXTRA_TWO"])


class TestSchemas:
    def test_experiment_names(self):
        names = [experiment["name"] for experiment in list_experiments()]
        assert names == ["avoid", "halving", "martingale", "sigma-schedule", "counterexample", "porosity-check"]

    def test_unknown_experiment(self):
        with pytest.raises(ValueError, match="Unknown experiment"):
            get_schema("tangle")

    def test_valid_config_passes(self):
        config = halving_config()
        assert validate_config("halving", config) is config

    def test_lambda_required_in_desk_mode(self):
        config = halving_config()
        del config["engine"]["lambda"]
        with pytest.raises(ConfigError) as info:
            validate_config("halving", config)
        assert info.value.path == "engine.lambda"
        assert "engine.lambda" in str(info.value)

    def test_lambda_optional_in_strict_mode(self):
        config = halving_config()
        del config["engine"]["lambda"]
        config["engine"]["mode"] = "paper-strict"
        validate_config("halving", config)

    def test_bad_decimal_string(self):
        config = halving_config()
        config["engine"]["sigma"] = "0.8.1"
        with pytest.raises(ConfigError) as info:
            validate_config("halving", config)
        assert info.value.path == "engine.sigma"

    def test_unknown_key(self):
        config = halving_config()
        config["oracle"]["colour"] = "red"
        with pytest.raises(ConfigError) as info:
            validate_config("halving", config)
        assert info.value.path == "oracle"


class TestBuildOracle:
    def test_ternary_is_c_porous_only(self):
        with pytest.raises(ConfigError) as info:
            build_oracle({"type": "ternary", "depth": 3, "mode": "power", "p": 2})
        assert info.value.path == "oracle.mode"

    def test_depth_required(self):
        with pytest.raises(ConfigError) as info:
            build_oracle({"type": "fat-cantor", "mu": "0.3"}, "pieces.1")
        assert info.value.path == "pieces.1.depth"

    def test_power_needs_exponent(self):
        with pytest.raises(ConfigError):
            build_oracle({"type": "fat-cantor", "mu": "0.3", "depth": 4, "mode": "power"})


class TestReports:
    """Byte-stable CSV tables."""

    def test_cells(self):
        assert format_cell(0.1) == "0.1"
        assert format_cell(np.float64(1e-20)) == "1e-20"
        assert format_cell(np.int64(3)) == "3"
        assert format_cell(True) == "true" and format_cell(np.bool_(False)) == "false"

    def test_csv_bytes(self, tmp_path):
        path = write_csv(tmp_path / "t.csv", ("a", "b"), [(0.1, True), (1.0 / 3.0, 2)])
        assert path.read_bytes() == b"a,b\n0.1,true\n0.3333333333333333,2\n"

    def test_unknown_table(self, tmp_path):
        report = RunReport(kind="halving", config={}, seed=0)
        with pytest.raises(ValueError, match="Unknown table id"):
            report.add_table("scatter", [])
        with pytest.raises(ValueError, match="Unknown table id"):
            emit_plot_data(report, "audit", tmp_path)

    def test_summary_only(self, tmp_path):
        report = RunReport(kind="halving", config={}, seed=3)
        report.add_table("schedule", [(0, 0, 1.0)])
        report.check("always", True)
        written = write_report(report, tmp_path, fmt="summary")
        assert written == [tmp_path / "halving" / "summary.json"]
        summary = json.loads(written[0].read_text())
        assert summary["passed"] and summary["seed"] == 3 and summary["tables"] == ["schedule"]


class TestRunExperiment:
    def test_porosity_check_interval_strip(self, settings, tmp_path):
        config = {"oracle": {"type": "fat-cantor", "mu": "0.3", "depth": 2}, "samples": 5, "scales": ["0.2"],
                  "witness_queries": 0}
        report = run_experiment("porosity-check", config, settings=settings)
        assert report.passed
        with open(tmp_path / "porosity-check" / "interval-strip.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["round", "label", "lo", "hi"]
        assert len(rows) == 1 + 4

    def test_seed_flag_overrides_config(self, settings):
        config = {"oracle": {"type": "ternary", "depth": 2}, "samples": 2, "scales": ["0.2"],
                  "witness_queries": 0, "seed": 5, "format": "summary"}
        assert run_experiment("porosity-check", config, seed=9, settings=settings).seed == 9
        assert run_experiment("porosity-check", config, settings=settings).seed == 5

    def test_invalid_config_runs_nothing(self, settings, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment("porosity-check", {"samples": 3}, settings=settings)
        assert not (tmp_path / "porosity-check").exists()


class TestMain:
    """The porous-curves command line."""

    def test_halving_run(self, tmp_path, capsys):
        config_path = tmp_path / "halving.json"
        config_path.write_text(json.dumps(halving_config()))
        out_dir = tmp_path / "out"
        main(["halving", "--config", str(config_path), "--out-dir", str(out_dir), "--seed", "0"])
        printed = json.loads(capsys.readouterr().out)
        assert printed == {"experiment": "halving", "passed": True, "seed": 0}
        summary = json.loads((out_dir / "halving" / "summary.json").read_text())
        assert summary["summary"]["halved"] and summary["summary"]["rounds"] == 1
        header = (out_dir / "halving" / "measure-vs-round.csv").read_text().splitlines()[0]
        assert header == "round,measure,measure_error,bound_rhs"
        assert (out_dir / "halving" / "audit.csv").exists()

    def test_invalid_config_exits_with_error_record(self, tmp_path, capsys):
        config = halving_config()
        del config["engine"]["lambda"]
        config_path = tmp_path / "halving.json"
        config_path.write_text(json.dumps(config))
        with pytest.raises(SystemExit) as info:
            main(["halving", "--config", str(config_path), "--out-dir", str(tmp_path / "out")])
        assert info.value.code == 1
        record = json.loads(capsys.readouterr().out)
        assert "engine.lambda" in record["error"]
        assert record["experiment"] == "halving"

    def test_missing_config_file(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as info:
            main(["avoid", "--config", str(tmp_path / "absent.json")])
        assert info.value.code == 1
        assert "error" in json.loads(capsys.readouterr().out)
