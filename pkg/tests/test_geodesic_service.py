"""
Tests for the Hamiltonian geodesic flow
"""

import csv

import numpy as np
import pytest

from app.services.catalog_service import build_metric
from app.services.geodesic_service import (
    ForbiddenRegionError,
    IntegratorConfig,
    PhaseState,
    charge_bilinear_fit,
    conserved_quantities,
    explicit_hamiltonian,
    export_csv,
    hamilton_equations,
    hamiltonian,
    hj_rhs,
    hj_separation_check,
    involution_matrix,
    integrate,
    poisson_bracket,
    quantity_function,
    separation_constants,
    time_reversal_error,
)
from app.services.geometry_service import DomainBoundaryError

TIGHT = IntegratorConfig(rtol=1e-12, atol=1e-12)


@pytest.fixture
def type2():
    return build_metric("bianchi2", {"epsilon": 1, "m": 1.0, "l": 1.0, "lambda": -0.3})


@pytest.fixture
def type3():
    return build_metric("bianchi3", {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0})


def midpoint_state(metric, p) -> PhaseState:
    lower, upper = metric.sample_window
    return PhaseState(np.array([0.2, -0.3, 0.1, 0.5 * (lower + upper)]), np.asarray(p, dtype=float))


class TestHamiltonian:
    """Generic and chart-specific Hamiltonians."""

    @pytest.mark.parametrize("epsilon", [1, -1])
    def test_explicit_matches_generic_type_two(self, epsilon):
        metric = build_metric("bianchi2", {"epsilon": epsilon, "m": 1.0, "l": 1.0, "lambda": -0.3})
        state = midpoint_state(metric, [0.4, -0.2, 0.7, 0.3])
        assert explicit_hamiltonian(metric, state) == pytest.approx(hamiltonian(metric, state), rel=1e-12)

    def test_explicit_matches_generic_type_three(self, type3):
        state = midpoint_state(type3, [0.4, -0.2, 0.7, 0.3])
        assert explicit_hamiltonian(type3, state) == pytest.approx(hamiltonian(type3, state), rel=1e-12)

    def test_no_explicit_form_for_type_five(self):
        metric = build_metric("bianchi5_special", {"lambda": 3.0})
        with pytest.raises(ValueError):
            explicit_hamiltonian(metric, midpoint_state(metric, [0.1, 0.1, 0.1, 0.1]))

    def test_declared_quantities(self, type2):
        state = midpoint_state(type2, [0.1, 0.2, 0.3, 0.4])
        assert sorted(conserved_quantities(type2, state)) == ["H", "L1", "L2", "L3", "L4", "S"]
        metric = build_metric("bianchi5_special", {"lambda": 3.0})
        assert sorted(conserved_quantities(metric, midpoint_state(metric, [0.1, 0.2, 0.3, 0.4]))) == [
            "H", "L1", "L2", "L3",
        ]

    def test_invalid_phase_state(self):
        with pytest.raises(ValueError):
            PhaseState(np.array([0.0, 0.0, 0.0, np.nan]), np.zeros(4))

    def test_invalid_tolerances(self):
        with pytest.raises(ValueError):
            IntegratorConfig(rtol=0.0, atol=1e-12)
        with pytest.raises(ValueError):
            IntegratorConfig(boundary_margin=0.0)


class TestIntegration:
    """Conservation along integrated geodesics."""

    @pytest.mark.parametrize("family", ["type2", "type3"])
    def test_conserved_quantities_drift(self, family, request):
        metric = request.getfixturevalue(family)
        state = midpoint_state(metric, [0.1, 0.2, -0.1, 0.3])
        trajectory = integrate(metric, state, (0.0, 2.0), TIGHT)
        assert set(trajectory.report.quantities) >= {"H", "S"}
        assert trajectory.report.worst_relative_drift() < 1e-8

    def test_time_reversal(self, type3):
        state = midpoint_state(type3, [0.1, 0.2, -0.1, 0.3])
        assert time_reversal_error(type3, state, 1.0, TIGHT) < 1e-8

    def test_truncation_at_chart_boundary(self):
        metric = build_metric("flat_type5", {})
        state = PhaseState(np.array([0.0, 0.0, 0.0, 1.0]), np.array([0.0, 0.0, 0.0, 1.0]))
        trajectory = integrate(metric, state, (0.0, 5.0), TIGHT)
        assert trajectory.truncated
        assert trajectory.exit_parameter == pytest.approx(1.0, abs=1e-5)
        assert trajectory.report.worst_relative_drift() < 1e-10

    def test_truncation_respects_margin(self):
        metric = build_metric("flat_type5", {})
        state = PhaseState(np.array([0.0, 0.0, 0.0, 1.0]), np.array([0.0, 0.0, 0.0, 1.0]))
        cfg = IntegratorConfig(rtol=1e-12, atol=1e-12, boundary_margin=1e-2)
        trajectory = integrate(metric, state, (0.0, 5.0), cfg)
        assert trajectory.truncated
        assert trajectory.exit_parameter == pytest.approx(0.99, abs=1e-8)
        assert trajectory.final_state.x[3] == pytest.approx(1e-2, abs=1e-8)

    def test_boundary_approach_with_spatial_momentum_truncates(self):
        metric = build_metric("flat_type5", {})
        state = PhaseState(np.array([0.0, 0.0, 0.0, 1.0]), np.array([0.1, 0.0, 0.0, 1.0]))
        trajectory = integrate(metric, state, (0.0, 5.0))
        assert trajectory.truncated
        assert trajectory.exit_parameter < 1.0
        assert metric.boundary_distance(trajectory.final_state.x) < 1e-3

    def test_rhs_rejects_singular_points(self):
        metric = build_metric("flat_type5", {})
        rhs = hamilton_equations(metric)
        for tau in (1e-8, 0.0, -1.0):
            z = np.array([0.0, 0.0, 0.0, tau, 0.1, 0.0, 0.0, 1.0])
            assert np.all(np.isnan(rhs(0.0, z)))
        assert np.all(np.isfinite(rhs(0.0, np.array([0.0, 0.0, 0.0, 0.5, 0.1, 0.0, 0.0, 1.0]))))

    @pytest.mark.parametrize("family,params", [
        ("bianchi3", {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0}),
        ("bianchi3_complete", {"lambda": -3.0}),
    ])
    def test_long_span_does_not_raise(self, family, params):
        metric = build_metric(family, params)
        state = midpoint_state(metric, [0.3, -0.4, 0.2, -0.6])
        trajectory = integrate(metric, state, (0.0, 10.0), IntegratorConfig(boundary_margin=1e-2))
        assert trajectory.report.worst_relative_drift() < 1e-8
        if trajectory.truncated:
            assert trajectory.exit_parameter <= 10.0

    def test_initial_point_outside_domain(self, type3):
        with pytest.raises(DomainBoundaryError):
            integrate(type3, PhaseState(np.array([0.0, 0.0, 0.0, -1.0]), np.ones(4)), (0.0, 1.0))

    def test_export_csv(self, type3, tmp_path):
        trajectory = integrate(type3, midpoint_state(type3, [0.1, 0.2, -0.1, 0.3]), (0.0, 0.5))
        path = tmp_path / "trajectory.csv"
        export_csv(trajectory, str(path))
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        assert rows[0][:9] == ["affine", "x", "y", "z", "tau", "p_x", "p_y", "p_z", "p_tau"]
        assert "H" in rows[0]
        assert len(rows) == trajectory.affine.size + 1

    def test_export_to_missing_directory(self, type3, tmp_path):
        trajectory = integrate(type3, midpoint_state(type3, [0.1, 0.2, -0.1, 0.3]), (0.0, 0.1))
        with pytest.raises(OSError):
            export_csv(trajectory, str(tmp_path / "missing" / "trajectory.csv"))


class TestPoissonBrackets:
    """Involution of the conserved quantities."""

    def test_quantities_commute_with_hamiltonian(self, type2):
        state = midpoint_state(type2, [0.4, -0.2, 0.7, 0.3])
        brackets = involution_matrix(type2, state, ["H", "L1", "L2", "L3", "L4", "S"])
        for name in ("H,L1", "H,L2", "H,L3", "H,L4", "H,S"):
            assert abs(brackets[name]) < 1e-6, name

    def test_heisenberg_bracket(self, type2):
        state = midpoint_state(type2, [0.4, -0.2, 0.7, 0.3])
        value = poisson_bracket(quantity_function(type2, "L2"), quantity_function(type2, "L3"), state)
        assert abs(value) == pytest.approx(0.4, abs=1e-8)


class TestHamiltonJacobi:
    """Separated action against integrated momenta."""

    @pytest.mark.parametrize("family,params", [
        ("bianchi2", {"epsilon": 1, "m": 1.0, "l": 1.0, "lambda": -0.3}),
        ("bianchi2", {"epsilon": -1, "m": 1.0, "l": 1.0, "lambda": -0.3}),
        ("bianchi3", {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0}),
        ("bianchi3_complete", {"lambda": -3.0}),
    ])
    def test_rhs_reproduces_time_momentum(self, family, params):
        metric = build_metric(family, params)
        state = midpoint_state(metric, [0.4, -0.2, 0.7, 0.3])
        energy, p, q, separation = separation_constants(metric, state)
        value = hj_rhs(metric, energy, p, q, separation, state.x[3])
        assert value == pytest.approx(state.p[3] ** 2, rel=1e-10)

    def test_rhs_homogeneity(self, type3):
        state = midpoint_state(type3, [0.4, -0.2, 0.7, 0.3])
        energy, p, q, separation = separation_constants(type3, state)
        tau = state.x[3]
        scaled = hj_rhs(type3, 4.0 * energy, 2.0 * p, 2.0 * q, 4.0 * separation, tau)
        assert scaled == pytest.approx(4.0 * hj_rhs(type3, energy, p, q, separation, tau), rel=1e-12)

    def test_rhs_needs_separable_family(self):
        metric = build_metric("bianchi5_special", {"lambda": 3.0})
        with pytest.raises(ValueError):
            hj_rhs(metric, 1.0, 0.0, 0.0, 1.0, 1.0)

    def test_reconstruction_through_turning_point(self, type3):
        state = midpoint_state(type3, [0.1, 0.1, 0.1, 0.0])
        trajectory = integrate(type3, state, (0.0, 0.5), TIGHT)
        energy, p, q, separation = separation_constants(type3, state)
        taus = trajectory.states[3]
        grid = np.linspace(taus.min(), taus.max(), 20)
        result = hj_separation_check(type3, energy, p, q, separation, grid, trajectory, tol=1e-10)
        assert result.residual < 1e-8

    def test_separation_residual(self, type3):
        state = midpoint_state(type3, [0.1, 0.1, 0.1, 1.0])
        trajectory = integrate(type3, state, (0.0, 1.0), TIGHT)
        energy, p, q, separation = separation_constants(type3, state)
        taus = trajectory.states[3]
        grid = np.linspace(taus.min(), taus.max(), 20)
        result = hj_separation_check(type3, energy, p, q, separation, grid, trajectory)
        assert result.points_checked == trajectory.affine.size
        assert result.residual < 1e-8
        assert result.action_increment > 0.0
        assert result.turning_points == []

    def test_forbidden_region(self, type3):
        with pytest.raises(ForbiddenRegionError):
            hj_separation_check(type3, 0.0, 0.0, 0.5, 1.0, [1.0, 1.5, 2.0])


class TestCasimirFit:
    """The quadratic constant as a bilinear in the Killing charges."""

    def test_type_two(self, type2):
        fit = charge_bilinear_fit(type2, seed=1)
        assert fit.residual < 1e-10
        assert fit.coefficients["L2*L2"] == pytest.approx(1.0, abs=1e-8)
        assert fit.coefficients["L3*L3"] == pytest.approx(1.0, abs=1e-8)
        assert fit.coefficients["L1*L4"] == pytest.approx(-2.0, abs=1e-8)

    def test_type_three(self, type3):
        fit = charge_bilinear_fit(type3, seed=1)
        assert fit.residual < 1e-10
        assert fit.coefficients["L1*L1"] == pytest.approx(1.0, abs=1e-8)
        assert fit.coefficients["L3*L4"] == pytest.approx(-2.0, abs=1e-8)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
