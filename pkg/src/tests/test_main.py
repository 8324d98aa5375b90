"""End-to-end tests of the command-line runner."""

import json

import pandas as pd
import pytest

from src import main as cli
from src.core.errors import TrialFailure
from src.main import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, ExperimentSpec, main, parse_theta_range
from src.utils.reports import deterministic_view, report_digest


def read_report(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestSpec:
    def test_scientific_trials(self, isolated_env):
        spec = ExperimentSpec(command="parity", trials="1e6", seed=1)
        assert spec.trials == 1_000_000

    def test_fractional_trials_rejected(self):
        with pytest.raises(ValueError):
            ExperimentSpec(command="parity", trials="1.5", seed=1)

    def test_command_defaults(self):
        assert ExperimentSpec(command="validate", seed=1).alpha == 2.0
        assert ExperimentSpec(command="cnot", seed=1).alpha == 100.0

    def test_theta_range_inclusive(self):
        thetas = parse_theta_range("0.05:0.5:0.05")
        assert len(thetas) == 10
        assert thetas[-1] == pytest.approx(0.5)

    def test_dump_omits_execution_hints(self):
        dumped = ExperimentSpec(command="bell", seed=1, jobs=4, out="x.json").model_dump(by_alias=True)
        assert "jobs" not in dumped and "out" not in dumped
        assert dumped["noiseSigma"] == 0.0


class TestCommands:
    def test_sweep_json(self, isolated_env):
        out = isolated_env / "sweep.json"
        assert main(["sweep", "--theta", "0.05:0.5:0.05", "--target-xd", "10", "--out", str(out)]) == EXIT_OK
        report = read_report(out)
        assert report["schemaVersion"] == 1
        rows = report["results"]["rows"]
        assert len(rows) == 11
        eit = rows[-1]
        assert eit["theta"] == 0.01
        assert eit["alpha"] == pytest.approx(1e5, rel=0.02)

    def test_sweep_csv(self, isolated_env):
        out = isolated_env / "sweep.csv"
        assert main(["sweep", "--theta", "0.1:0.3:0.1", "--format", "csv", "--out", str(out)]) == EXIT_OK
        frame = pd.read_csv(out)
        assert list(frame.columns)[:3] == ["theta", "targetXd", "alpha"]
        assert len(frame) == 4
        assert (isolated_env / "sweep.json").exists()

    def test_sweep_csv_to_stdout_keeps_report(self, isolated_env, capsys):
        assert main(["sweep", "--theta", "0.1:0.3:0.1", "--format", "csv"]) == EXIT_OK
        captured = capsys.readouterr()
        assert captured.out.splitlines()[0].startswith("theta,targetXd,alpha")
        report = json.loads(captured.err[captured.err.index('{\n  "metadata"'):])
        assert report["schemaVersion"] == 1
        assert len(report["results"]["rows"]) == 4

    def test_parity_density_csv(self, isolated_env):
        out = isolated_env / "parity.csv"
        assert main(["parity", "--trials", "100", "--format", "csv", "--out", str(out)]) == EXIT_OK
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["x", "density"]
        assert len(frame) == 2001
        assert frame["density"].sum() * (frame["x"][1] - frame["x"][0]) == pytest.approx(1.0, abs=1e-6)

    def test_validate(self, isolated_env):
        out = isolated_env / "validate.json"
        assert main(["validate", "--alpha", "2", "--theta", "0.5", "--out", str(out)]) == EXIT_OK
        results = read_report(out)["results"]
        assert results["passed"]
        assert results["maxDensityDelta"] <= 1e-8

    def test_detector(self, isolated_env):
        out = isolated_env / "detector.json"
        argv = ["detector", "--alpha", "10.15", "--theta", "0.3", "--trials", "2e4", "--out", str(out)]
        assert main(argv) == EXIT_OK
        results = read_report(out)["results"]
        assert results["monteCarlo"]["engine"] == "batch"
        assert results["errorModel"]["pErrDetector"] == pytest.approx(results["expected"])

    def test_parity_reproducible_across_jobs(self, isolated_env):
        first, second = isolated_env / "a.json", isolated_env / "b.json"
        base = ["parity", "--trials", "300", "--seed", "7"]
        assert main(base + ["--out", str(first)]) == EXIT_OK
        assert main(base + ["--out", str(second), "--jobs", "2"]) == EXIT_OK
        assert deterministic_view(read_report(first)) == deterministic_view(read_report(second))
        assert read_report(first)["metadata"]["digest"] == read_report(second)["metadata"]["digest"]
        assert read_report(first)["metadata"]["digest"] == report_digest(read_report(first))
        assert read_report(first)["results"]["forcedPeakFidelity"]["odd"] == pytest.approx(1.0, abs=1e-10)

    def test_cnot_truth_table(self, isolated_env):
        out = isolated_env / "cnot.json"
        assert main(["cnot", "--trials", "20", "--seed", "42", "--out", str(out)]) == EXIT_OK
        results = read_report(out)["results"]
        assert results["allRowsCorrect"]
        assert [row["expected"] for row in results["truthTable"]] == ["HH", "HV", "VV", "VH"]
        assert results["entangling"]["meanFidelity"] >= 0.999

    def test_bell_single_input(self, isolated_env):
        out = isolated_env / "bell.json"
        assert main(["bell", "--input", "psi-", "--trials", "20", "--out", str(out)]) == EXIT_OK
        confusion = read_report(out)["results"]["confusion"]
        assert confusion == {"psi-": {"phi+": 0.0, "phi-": 0.0, "psi+": 0.0, "psi-": 1.0}}


class TestConfiguration:
    def test_env_seed_default(self, isolated_env, monkeypatch):
        monkeypatch.setenv("KERRSIM_SEED", "1234")
        out = isolated_env / "r.json"
        assert main(["sweep", "--theta", "0.1:0.1:0.1", "--out", str(out)]) == EXIT_OK
        assert read_report(out)["spec"]["seed"] == 1234

    def test_flags_override_file(self, isolated_env):
        config = isolated_env / "run.yaml"
        config.write_text("alpha: 50\ntheta: 0.2\ntarget-xd: 6\n", encoding="utf-8")
        out = isolated_env / "r.json"
        argv = ["sweep", "--config", str(config), "--theta", "0.1:0.2:0.1", "--alpha", "60", "--out", str(out)]
        assert main(argv) == EXIT_OK
        spec = read_report(out)["spec"]
        assert spec["alpha"] == 60.0
        assert spec["targetXd"] == 6.0

    def test_json_config_file(self, isolated_env):
        config = isolated_env / "run.json"
        config.write_text(json.dumps({"thetaRange": "0.1:0.2:0.1"}), encoding="utf-8")
        out = isolated_env / "r.json"
        assert main(["sweep", "--config", str(config), "--out", str(out)]) == EXIT_OK


class TestErrors:
    def _error(self, capsys):
        return json.loads(capsys.readouterr().out)["error"]

    def test_theta_out_of_range(self, isolated_env, capsys):
        assert main(["parity", "--theta", "2.0"]) == EXIT_USAGE
        assert self._error(capsys)["type"] == "config_error"

    def test_unknown_flag(self, isolated_env, capsys):
        assert main(["parity", "--bogus", "1"]) == EXIT_USAGE
        assert "bogus" in self._error(capsys)["message"]

    def test_unknown_bell_label(self, isolated_env, capsys):
        assert main(["bell", "--input", "chi", "--trials", "1"]) == EXIT_USAGE
        assert self._error(capsys)["type"] == "invalid_input"

    def test_missing_config_file(self, isolated_env, capsys):
        assert main(["sweep", "--theta", "0.1:0.2:0.1", "--config", "nope.yaml"]) == EXIT_USAGE

    def test_sweep_needs_range(self, isolated_env, capsys):
        assert main(["sweep"]) == EXIT_USAGE

    def test_numerical_failures_exit_three(self, isolated_env, capsys, monkeypatch):
        def explode(spec):
            raise TrialFailure(5, ValueError("nan"))

        monkeypatch.setitem(cli.RUNNERS, cli.Command.DETECTOR, explode)
        assert main(["detector", "--trials", "10"]) == EXIT_NUMERICAL
        assert self._error(capsys)["trial_index"] == 5
