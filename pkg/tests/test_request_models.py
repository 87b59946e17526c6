"""
Tests for run configuration and report models
"""

import pytest
from pydantic import ValidationError

from app.config.families import default_checks
from app.models.request import GridSpec, OutputSpec, RunConfig
from app.models.response import CheckResult, PetrovLabel, Report


class TestGridSpec:
    """Grid flags and validation."""

    def test_parse_halton(self):
        grid = GridSpec.parse_flag("halton:8", seed=4)
        assert (grid.mode, grid.count, grid.seed) == ("halton", 8, 4)

    def test_parse_regular(self):
        grid = GridSpec.parse_flag("regular:2x1x1x3")
        assert grid.mode == "regular"
        assert grid.counts == {"x": 2, "y": 1, "z": 1, "tau": 3}

    @pytest.mark.parametrize("flag", ["regular:2x2", "sobol:8"])
    def test_bad_flags(self, flag):
        with pytest.raises(ValueError):
            GridSpec.parse_flag(flag)

    @pytest.mark.parametrize("data", [
        {"count": 0},
        {"ranges": {"w": (0.0, 1.0)}},
        {"ranges": {"tau": (2.0, 1.0)}},
        {"counts": {"x": 0}},
    ])
    def test_invalid(self, data):
        with pytest.raises(ValidationError):
            GridSpec(**data)


class TestRunConfig:
    """Family, parameter and check validation."""

    def test_defaults_to_family_checks(self):
        config = RunConfig(family="bianchi5_special", params={"lambda": 3.0})
        assert config.checks == default_checks("bianchi5_special")
        assert config.grid.mode == "halton"
        assert config.output.format == "json"

    def test_unknown_family(self):
        with pytest.raises(ValidationError):
            RunConfig(family="bianchi9", params={})

    def test_missing_parameter(self):
        with pytest.raises(ValidationError):
            RunConfig(family="bianchi3", params={"epsilon": 1, "lambda": -3.0})

    def test_unexpected_parameter(self):
        with pytest.raises(ValidationError):
            RunConfig(family="bianchi5_special", params={"lambda": 3.0, "m": 1.0})

    def test_lambda_stands_in_for_theta(self):
        config = RunConfig(family="bianchi5_minkowski", params={"lambda": -1.0}, checks=["einstein"])
        assert config.params == {"lambda": -1.0}

    @pytest.mark.parametrize("checks", [["einstein", "einstein"], ["curvature"]])
    def test_bad_checks(self, checks):
        with pytest.raises(ValidationError):
            RunConfig(family="bianchi5_special", params={"lambda": 3.0}, checks=checks)

    @pytest.mark.parametrize("tolerances", [{"einstein": 0.0}, {"curvature": 1e-6}])
    def test_bad_tolerances(self, tolerances):
        with pytest.raises(ValidationError):
            RunConfig(family="bianchi5_special", params={"lambda": 3.0}, tolerances=tolerances)

    def test_output_format(self):
        with pytest.raises(ValidationError):
            OutputSpec(format="xml")


class TestReportModels:
    """Statuses and exit codes."""

    def test_exit_codes(self):
        passing = CheckResult(name="einstein", status="pass", worst_residual=1e-12, tolerance=1e-9)
        flagged = CheckResult(name="yano", status="flagged", tolerance=1e-7)
        failing = CheckResult(name="weyl", status="fail", worst_residual=1.0, tolerance=1e-6)
        report = Report(family="bianchi3", seed=0, tool_version="1.0.0", checks=[passing, flagged])
        assert report.passed and report.exit_code == 0
        report = Report(family="bianchi3", seed=0, tool_version="1.0.0", checks=[passing, failing])
        assert not report.passed and report.exit_code == 2

    def test_invalid_status(self):
        with pytest.raises(ValidationError):
            CheckResult(name="einstein", status="maybe", tolerance=1e-9)

    def test_petrov_label(self):
        assert PetrovLabel(signature="euclidean", plus="D", minus="O").label == "(D,O)"
        assert PetrovLabel(signature="lorentzian", plus="I", minus="I").label == "I"
        with pytest.raises(ValidationError):
            PetrovLabel(signature="euclidean", plus="N", minus="O")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
