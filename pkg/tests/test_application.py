import json, os

import pytest
from click.testing import CliRunner

from application import cli

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), os.pardir, "data")


def _density(name):
    return os.path.join(DATA_DIR, name + ".density")


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


def _run(runner, *args, **kwargs):
    return runner.invoke(cli, [str(arg) for arg in args], **kwargs)


class TestAnalyze:

    def test_always_double(self, runner):
        result = _run(runner, "analyze", _density("abs_exp"))
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["validation"]["passed"]
        assert report["regime"] == "AlwaysDouble"
        assert report["V0"]["value"] == 0.0
        assert report["lambda"] == []

    def test_finite_blowup(self, runner):
        result = _run(runner, "analyze", _density("sqrt_shift"), "--samples", 4, "--point", "1,1")
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["regime"] == "FiniteBlowup"
        assert report["L"]["verdict"] == "Converged"
        assert report["M"]["value"] == pytest.approx(0.5, abs=1e-8)
        lo, hi = report["V0"]["bracket"]
        assert lo <= report["V0"]["value"] <= hi
        assert len(report["lambda"]) == 4
        assert report["points"][0]["verdict"] == "Double"

    def test_no_blowup(self, runner):
        result = _run(runner, "analyze", _density("borell"), "--samples", 2)
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["regime"] == "NoBlowup"
        assert report["V0"]["value"] == "inf"
        assert report["L"]["value"] == "inf"

    def test_no_blowup_ladder_stops_before_rounding(self, runner):
        result = _run(runner, "analyze", _density("arctan"))
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["regime"] == "NoBlowup"
        assert "lost in rounding" in report["lambda_note"] or "stays nonnegative" in report["lambda_note"]
        assert 0 < len(report["lambda"]) < 8
        assert all(sample["V1"] < 32 and sample["V1"] < sample["lambda"] < 2.0 ** 50 for sample in report["lambda"])

    def test_trace_dir(self, runner, tmp_path):
        traceDir = tmp_path / "traces"
        result = _run(runner, "analyze", _density("sqrt_shift"), "--samples", 0, "--trace-dir", traceDir)
        assert result.exit_code == 0, result.stderr
        for name in ("L_trace.csv", "M_trace.csv"):
            assert (traceDir / name).read_text().startswith("k,V,value\n")

    def test_validation_failure(self, runner, densityFile):
        result = _run(runner, "analyze", densityFile("coordinate = volume\nf = 1 + abs(V)\n"))
        assert result.exit_code == 2
        report = json.loads(result.stdout)
        assert not report["validation"]["passed"]
        assert "strict_convexity" in result.stderr

    def test_inconclusive_limits(self, runner, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"Limit Max Exponent": 10}))
        result = _run(runner, "--config", config, "analyze", _density("sqrt_shift"))
        assert result.exit_code == 3
        assert json.loads(result.stdout)["M"]["verdict"] == "Inconclusive"

    def test_config_from_environment(self, runner, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"Limit Max Exponent": 10}))
        result = _run(runner, "analyze", _density("sqrt_shift"), env={"BUBBLELINE_CONFIG": str(config)})
        assert result.exit_code == 3

    def test_malformed_density_file(self, runner, densityFile):
        result = _run(runner, "analyze", densityFile("coordinate = volume\n"))
        assert result.exit_code == 4
        assert "missing required key 'f'" in result.stderr

    def test_malformed_point(self, runner):
        result = _run(runner, "analyze", _density("abs_exp"), "--point", "1;2")
        assert result.exit_code == 4


class TestClassify:

    def test_equal_volumes(self, runner):
        result = _run(runner, "classify", _density("sqrt_shift"), "--v1", 1, "--v2", 1)
        assert result.exit_code == 0, result.stderr
        section = json.loads(result.stdout)
        assert section["verdict"] == "Double"
        assert section["mu"] == pytest.approx(0.7361, abs=1e-4)

    def test_unordered_volumes(self, runner):
        result = _run(runner, "classify", _density("sqrt_shift"), "--v1", 2, "--v2", 1)
        assert result.exit_code == 4

    def test_missing_option(self, runner):
        assert _run(runner, "classify", _density("sqrt_shift"), "--v1", 1).exit_code == 4


class TestTieCurve:

    def test_csv_and_svg(self, runner, tmp_path):
        out, svg = tmp_path / "tie.csv", tmp_path / "tie.svg"
        result = _run(runner, "tie-curve", _density("sqrt_shift"), "--samples", 4, "--out", out, "--svg", svg)
        assert result.exit_code == 0, result.stderr
        lstLines = out.read_text().splitlines()
        assert lstLines[0] == "v1,lambda,mu_at_tie"
        assert len(lstLines) == 5
        assert "<svg" in svg.read_text()

    def test_stdout(self, runner):
        result = _run(runner, "tie-curve", _density("borell"), "--v1-min", 0.5, "--v1-max", 2, "--samples", 3)
        assert result.exit_code == 0, result.stderr
        assert result.stdout.splitlines()[0] == "v1,lambda,mu_at_tie"

    def test_refused_when_always_double(self, runner):
        result = _run(runner, "tie-curve", _density("abs_exp"))
        assert result.exit_code == 1
        assert "no tie curve: V0=0" in result.stderr


class TestPhase:

    def test_csv_and_svg(self, runner, tmp_path):
        out, svg = tmp_path / "phase.csv", tmp_path / "phase.svg"
        result = _run(runner, "phase", _density("sqrt_shift"), "--v1-max", 1, "--v2-max", 4, "--grid", 3,
                      "--out", out, "--svg", svg)
        assert result.exit_code == 0, result.stderr
        lstLines = out.read_text().splitlines()
        assert lstLines[0] == "v1,v2,mu,p2,p3,verdict"
        assert len(lstLines) == 1 + 9
        assert "<svg" in svg.read_text()

    def test_grid_too_small(self, runner):
        result = _run(runner, "phase", _density("sqrt_shift"), "--v1-max", 1, "--v2-max", 4, "--grid", 1)
        assert result.exit_code == 4


class TestOracle:

    def test_agreement(self, runner):
        result = _run(runner, "oracle", _density("sqrt_shift"), "--v1", 1, "--v2", 1, "--max-intervals", 1)
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["agrees"]
        assert report["configuration"]["topology"] == "double"

    def test_interval_cap(self, runner):
        result = _run(runner, "oracle", _density("sqrt_shift"), "--v1", 1, "--v2", 1, "--max-intervals", 5)
        assert result.exit_code == 4


class TestVerify:

    def test_passes(self, runner):
        result = _run(runner, "verify", _density("sqrt_shift"), "--grid", 3)
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["passed"]
        assert report["density"] == "sqrt_shift"
