"""
Tests for the verification pipeline: grids, check dispatch and reports
"""

from unittest.mock import patch

import numpy as np
import pytest

from app.models.request import GridSpec, RunConfig
from app.services import catalog_service
from app.services.catalog_service import build_metric
from app.services.verification_service import (
    GridDomainError,
    ReportWriteError,
    VerificationService,
    build_grid,
    expected_petrov,
    serialize_report,
    trajectory_sidecar_path,
    weyl_closed_form,
    weyl_residual,
    write_text,
)

TYPE3_PARAMS = {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0}


@pytest.fixture
def service():
    return VerificationService(max_workers=2)


@pytest.fixture
def type3():
    return build_metric("bianchi3", TYPE3_PARAMS)


def run_config(**overrides) -> RunConfig:
    data = {
        "family": "bianchi3",
        "params": TYPE3_PARAMS,
        "grid": {"mode": "halton", "count": 5, "seed": 3},
        "checks": ["einstein", "killing"],
    }
    data.update(overrides)
    return RunConfig(**data)


class TestGrid:
    """Sample points over the chart."""

    def test_halton_is_seeded(self, type3):
        first = build_grid(type3, GridSpec(count=6, seed=9))
        second = build_grid(type3, GridSpec(count=6, seed=9))
        assert len(first) == 6
        assert all(np.array_equal(a, b) for a, b in zip(first, second))

    def test_halton_stays_in_window(self, type3):
        lower, upper = type3.sample_window
        for point in build_grid(type3, GridSpec(count=16, seed=1)):
            assert lower <= point[3] <= upper
            assert np.all(np.abs(point[:3]) <= 1.0)

    def test_regular_grid_size(self, type3):
        points = build_grid(type3, GridSpec.parse_flag("regular:2x1x3x2"))
        assert len(points) == 12
        assert {p[1] for p in points} == {0.0}

    def test_points_outside_domain(self, type3):
        with pytest.raises(GridDomainError):
            build_grid(type3, GridSpec(ranges={"tau": (-1.0, 1.0)}))


class TestVerificationService:
    """Check dispatch and status assignment."""

    @pytest.mark.asyncio
    async def test_passing_run(self, service):
        report = await service.run(run_config())
        assert [c.name for c in report.checks] == ["einstein", "killing"]
        assert all(c.status == "pass" for c in report.checks)
        assert report.exit_code == 0
        assert report.checks[1].detail["vectors"] == ["L1", "L2", "L3", "L4"]

    @pytest.mark.asyncio
    async def test_reports_are_deterministic(self, service):
        config = run_config(checks=["einstein", "ode"])
        first = serialize_report(await service.run(config))
        second = serialize_report(await service.run(config))
        assert first == second

    @pytest.mark.asyncio
    async def test_tight_tolerance_fails(self, service):
        config = run_config(family="bianchi5_euclid", params={"lambda": 1.0}, checks=["einstein"],
                            tolerances={"einstein": 1e-300})
        report = await service.run(config)
        assert report.checks[0].status == "fail"
        assert report.exit_code == 2

    @pytest.mark.asyncio
    async def test_missing_structure_is_flagged(self, service):
        config = run_config(family="bianchi5_special", params={"lambda": 3.0}, checks=["yano", "elliptic-selftest"])
        report = await service.run(config)
        assert [c.status for c in report.checks] == ["flagged", "flagged"]
        assert report.checks[0].detail["applicable"] is False
        assert report.exit_code == 0

    @pytest.mark.asyncio
    async def test_conformally_flat_petrov(self, service):
        config = run_config(family="bianchi5_special", params={"lambda": 3.0}, checks=["petrov"])
        report = await service.run(config)
        assert report.checks[0].status == "pass"

    @pytest.mark.asyncio
    async def test_grid_outside_domain_raises(self, service):
        with pytest.raises(GridDomainError):
            await service.run(run_config(grid={"ranges": {"tau": (-2.0, 2.0)}}))


class TestGeodesicCheck:
    """Conservation, involution and Hamilton-Jacobi grading of the geodesic check."""

    @pytest.mark.asyncio
    @pytest.mark.parametrize("family,params", [
        ("bianchi3", TYPE3_PARAMS),
        ("bianchi3_complete", {"lambda": -3.0}),
    ])
    async def test_integrable_families_pass(self, service, family, params):
        config = run_config(family=family, params=params, checks=["geodesic"],
                            grid={"mode": "halton", "count": 2, "seed": 0})
        report = await service.run(config)
        check = report.checks[0]
        assert check.status == "pass", check.detail
        assert check.worst_residual < 1e-8
        assert service.last_trajectory is not None

    @pytest.mark.asyncio
    async def test_reports_brackets_and_separation(self, service):
        report = await service.run(run_config(checks=["geodesic"], grid={"mode": "halton", "count": 2, "seed": 0}))
        detail = report.checks[0].detail
        assert sorted(detail["involution"]) == ["H,L2", "H,L4", "H,S", "L2,L4", "S,L2", "S,L4"]
        assert detail["involution_residual"] < 1e-6
        assert detail["hj_residual"] < 1e-6
        assert detail["hj_points_checked"] == report.checks[0].detail["steps"]
        assert detail["integrability_tolerance"] == 1e-6

    @pytest.mark.asyncio
    async def test_type_two_reports_its_charges(self, service):
        config = run_config(family="bianchi2", params={"epsilon": 1, "m": 1.0, "l": 1.0, "lambda": -0.3},
                            checks=["geodesic"], grid={"mode": "halton", "count": 2, "seed": 1})
        detail = (await service.run(config)).checks[0].detail
        assert "L1,L4" in detail["involution"]
        assert detail["involution_residual"] < 1e-6
        assert detail["hj_residual"] < 1e-6

    @pytest.mark.asyncio
    async def test_separation_failure_fails_the_check(self, service):
        with patch("app.services.geodesic_service.hj_rhs", return_value=1e3):
            report = await service.run(run_config(checks=["geodesic"], grid={"mode": "halton", "count": 2, "seed": 0}))
        check = report.checks[0]
        assert check.detail["hj_residual"] > 1e-6
        assert check.status == "fail"

    @pytest.mark.asyncio
    async def test_type_five_skips_integrability(self, service):
        config = run_config(family="bianchi5_special", params={"lambda": 3.0}, checks=["geodesic"],
                            grid={"mode": "halton", "count": 2, "seed": 0})
        detail = (await service.run(config)).checks[0].detail
        assert "involution" not in detail
        assert "hj_residual" not in detail


class TestWeylResidual:
    """Closed-form Weyl comparisons."""

    def test_vanishing_self_dual_block(self):
        # 3m + 8λl³ = 0
        metric = build_metric("bianchi2", {"epsilon": 1, "m": 0.8, "l": 1.0, "lambda": -0.3})
        lower, upper = metric.sample_window
        x = np.array([0.1, 0.2, -0.1, 0.5 * (lower + upper)])
        plus, minus = weyl_closed_form(metric, x[3])
        assert np.max(np.abs(plus)) < 1e-12
        assert np.max(np.abs(minus)) > 1e-3
        assert weyl_residual(metric, x) < 1e-6

    @pytest.mark.asyncio
    async def test_vanishing_self_dual_block_passes(self, service):
        config = run_config(family="bianchi2", params={"epsilon": 1, "m": 0.8, "l": 1.0, "lambda": -0.3},
                            checks=["weyl"])
        assert (await service.run(config)).checks[0].status == "pass"

    def test_psi2_uses_relative_error(self):
        metric = build_metric("bianchi3", {"epsilon": -1, "gamma0": 0.5, "lambda": 3.0})
        lower, upper = metric.sample_window
        x = np.array([0.1, 0.2, -0.1, 0.5 * (lower + upper)])
        assert abs(catalog_service.bianchi3_psi2_closed_form(metric, x[3])) < 1.0
        assert weyl_residual(metric, x) < 1e-6

        original = catalog_service.bianchi3_psi2_closed_form
        with patch.object(catalog_service, "bianchi3_psi2_closed_form",
                          side_effect=lambda m, tau: 1.0001 * original(m, tau)):
            assert weyl_residual(metric, x) > 5e-5


class TestExpectedPetrov:
    """Labels the catalog predicts."""

    @pytest.mark.parametrize("family,params,label", [
        ("bianchi2_selfdual", {"b": -1.0, "lambda": -3.0}, "(O,D)"),
        ("bianchi3", TYPE3_PARAMS, "(D,D)"),
        ("bianchi3", {"epsilon": 1, "gamma0": 0.0, "lambda": -3.0}, "(O,O)"),
        ("bianchi5_special", {"lambda": 3.0}, "O"),
        ("bianchi5_euclid", {"lambda": 1.0}, "(I,I)"),
    ])
    def test_labels(self, family, params, label):
        assert expected_petrov(build_metric(family, params)) == label


class TestSerialization:
    """Report text forms and files."""

    @pytest.mark.asyncio
    async def test_csv(self, service):
        report = await service.run(run_config(checks=["einstein"]))
        lines = serialize_report(report, "csv").splitlines()
        assert lines[0] == "check,status,worst_residual,tolerance,worst_point"
        assert lines[1].startswith("einstein,pass,")
        assert len(lines) == 2

    @pytest.mark.asyncio
    async def test_unknown_format(self, service):
        report = await service.run(run_config(checks=["einstein"]))
        with pytest.raises(ValueError):
            serialize_report(report, "xml")

    def test_write_to_missing_directory(self, tmp_path):
        with pytest.raises(ReportWriteError):
            write_text("{}", str(tmp_path / "missing" / "report.json"))

    def test_sidecar_path(self):
        assert trajectory_sidecar_path("out/report.json") == "out/report.trajectory.csv"
        assert trajectory_sidecar_path("out/report") == "out/report.trajectory.csv"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
