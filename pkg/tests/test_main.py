"""
Tests for the command-line entry point and its exit codes
"""

import json
import os
from unittest.mock import AsyncMock, patch

import pytest

from app.main import main
from app.models.response import CheckResult, Report

TYPE3_FLAGS = ["--family", "bianchi3", "--param", "epsilon=1", "--param", "gamma0=0.5", "--param", "lambda=-3"]


class TestVerifyCommand:
    """verify subcommand."""

    def test_passing_report_file(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["verify", *TYPE3_FLAGS, "--grid", "halton:4", "--check", "einstein", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text(encoding="utf-8"))
        assert report["family"] == "bianchi3"
        assert report["checks"][0]["name"] == "einstein"
        assert report["checks"][0]["status"] == "pass"

    def test_csv_to_stdout(self, capsys):
        code = main(["verify", *TYPE3_FLAGS, "--grid", "halton:3", "--check", "einstein", "--format", "csv"])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("check,status")
        assert lines[1].startswith("einstein,pass,")

    def test_failing_check_exit_code(self, capsys):
        code = main(["verify", "--family", "bianchi5_euclid", "--param", "lambda=1", "--grid", "halton:3",
                     "--check", "einstein", "--tol", "einstein=1e-300"])
        assert code == 2
        assert '"status": "fail"' in capsys.readouterr().out

    def test_config_file(self, tmp_path, capsys):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({
            "family": "bianchi5_special",
            "params": {"lambda": 3.0},
            "grid": {"mode": "halton", "count": 3, "seed": 2},
            "checks": ["einstein", "killing"],
        }), encoding="utf-8")
        assert main(["verify", "--config", str(config)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["seed"] == 2
        assert [c["name"] for c in report["checks"]] == ["einstein", "killing"]

    def test_geodesic_check_writes_trajectory(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["verify", *TYPE3_FLAGS, "--grid", "halton:2", "--check", "geodesic", "--out", str(out)])
        assert code == 0
        assert os.path.exists(tmp_path / "report.trajectory.csv")

    @pytest.mark.parametrize("argv", [
        ["verify", "--family", "nope"],
        ["verify"],
        ["verify", "--family", "bianchi3", "--param", "epsilon"],
        ["verify", "--family", "bianchi3", "--param", "epsilon=1", "--param", "lambda=-3"],
        ["verify", *TYPE3_FLAGS, "--grid", "halton:2", "--check", "einstein", "--tol", "einstein=-1"],
        ["verify", *TYPE3_FLAGS, "--grid", "regular:1x1x1x2", "--check", "einstein",
         "--config", "/nonexistent/run.json"],
    ])
    def test_configuration_errors(self, argv):
        assert main(argv) == 1

    def test_unwritable_output(self, tmp_path):
        out = tmp_path / "missing" / "report.json"
        assert main(["verify", *TYPE3_FLAGS, "--grid", "halton:2", "--check", "einstein", "--out", str(out)]) == 1


class TestOtherCommands:
    """classify, geodesic, elliptic-selftest and embed."""

    def test_classify(self, capsys):
        code = main(["classify", "--family", "bianchi5_special", "--param", "lambda=3", "--grid", "halton:3"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["checks"][0]["name"] == "petrov"
        assert report["checks"][0]["detail"]["labels"] == ["O"]

    def test_geodesic_summary(self, capsys):
        code = main(["geodesic", *TYPE3_FLAGS, "--x", "0.2,-0.3,0.1,1.0", "--p", "0.1,0.2,-0.1,0.3",
                     "--span", "1.0", "--rtol", "1e-12", "--atol", "1e-12"])
        summary = json.loads(capsys.readouterr().out)
        assert code == 0
        assert summary["worst_relative_drift"] < 1e-8
        assert summary["initial"]["p"] == [0.1, 0.2, -0.1, 0.3]

    def test_geodesic_csv_needs_out(self):
        assert main(["geodesic", *TYPE3_FLAGS, "--p", "0.1,0.2,-0.1,0.3", "--span", "0.5", "--format", "csv"]) == 1

    def test_geodesic_bad_vector(self):
        assert main(["geodesic", *TYPE3_FLAGS, "--p", "0.1,0.2"]) == 1

    def test_elliptic_selftest(self, capsys):
        assert main(["elliptic-selftest", "--param", "lambda=-1"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["checks"][0]["status"] == "pass"
        assert 0.0 < report["checks"][0]["detail"]["k2"] < 1.0

    def test_elliptic_selftest_needs_parameter(self):
        assert main(["elliptic-selftest"]) == 1

    def test_embed_polar(self, capsys):
        assert main(["embed", "--source", "polar"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["family"] == "bianchi3_complete"
        assert report["checks"][0]["detail"]["map"] == "polar"

    def test_embed_flattening(self, capsys):
        assert main(["embed", "--source", "flatten_type5", "--seed", "3"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["seed"] == 3
        assert report["checks"][0]["status"] == "pass"


class TestExitCodeMapping:
    """Report status to process exit code, with the service mocked out."""

    @pytest.fixture
    def mock_service(self):
        with patch("app.routes.verify.verification_service") as mock:
            mock.last_trajectory = None
            yield mock

    @pytest.mark.parametrize("status,code", [("pass", 0), ("flagged", 0), ("fail", 2)])
    def test_status_maps_to_exit_code(self, mock_service, status, code, capsys):
        check = CheckResult(name="einstein", status=status, worst_residual=0.5, tolerance=1e-9)
        mock_service.run = AsyncMock(return_value=Report(
            family="bianchi3", params={}, seed=0, tool_version="1.0.0", checks=[check],
        ))
        assert main(["verify", *TYPE3_FLAGS, "--check", "einstein"]) == code
        mock_service.run.assert_awaited_once()
        config = mock_service.run.call_args.args[0]
        assert config.checks == ["einstein"]
        assert json.loads(capsys.readouterr().out)["checks"][0]["status"] == status


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
