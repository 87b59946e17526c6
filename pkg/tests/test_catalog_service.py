"""
Tests for the metric catalog

Every family must satisfy Ric = λg in its own chart; first integrals,
the Kähler structure and the type II rescaling are checked separately.
"""

import numpy as np
import pytest

from app.config.families import UnknownFamilyError, family_names
from app.services.catalog_service import (
    CONSTRUCTORS,
    build_metric,
    flat_metrics,
    kahler_checks,
    kahler_form,
    ode_residual,
    product_block_constants,
    rescaling_residual,
)
from app.services.frames_service import ParameterDomainError
from app.services.geometry_service import einstein_residual

EINSTEIN_CASES = [
    ("bianchi2", {"epsilon": 1, "m": 1.0, "l": 1.0, "lambda": -0.3}, 1e-6),
    ("bianchi2", {"epsilon": -1, "m": 1.0, "l": 1.0, "lambda": -0.3}, 1e-6),
    ("bianchi2_euclid_neg", {"m": 1.0, "l": 1.0, "lambda": -0.3}, 1e-6),
    ("bianchi2_selfdual", {"b": -1.0, "lambda": -3.0}, 1e-6),
    ("bianchi2_kahler", {"l": 1.0, "lambda": -3.0}, 1e-6),
    ("bianchi3", {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0}, 1e-6),
    ("bianchi3", {"epsilon": -1, "gamma0": 0.5, "lambda": 3.0}, 1e-6),
    ("bianchi3_complete", {"lambda": -3.0}, 1e-6),
    ("bianchi3_product", {"epsilon": 1, "gamma0": 1.0, "lambda": -1.0}, 1e-6),
    ("bianchi3_product", {"epsilon": -1, "gamma0": 1.0, "lambda": -1.0}, 1e-6),
    ("bianchi3_product_tau", {"lambda": -1.0, "gamma0_sign": 1}, 1e-6),
    ("bianchi3_product_tau", {"lambda": -1.0, "gamma0_sign": 0}, 1e-6),
    ("bianchi3_product_tau", {"lambda": -1.0, "gamma0_sign": -1}, 1e-6),
    ("bianchi5_special", {"lambda": 3.0}, 1e-6),
    ("bianchi5_special", {"lambda": -3.0}, 1e-6),
    ("bianchi5_special", {"lambda": -3.0, "euclidean": 1}, 1e-6),
    ("bianchi5_euclid", {"lambda": -1.0}, 1e-6),
    ("bianchi5_euclid", {"lambda": -1.0, "outer": 1}, 1e-6),
    ("bianchi5_euclid", {"lambda": 1.0}, 1e-6),
    ("bianchi5_minkowski", {"theta": 0.5}, 1e-5),
    ("bianchi5_minkowski", {"theta": -0.5}, 1e-5),
    ("flat_type3", {}, 1e-6),
    ("flat_type5", {}, 1e-6),
]

ODE_CASES = [
    ("bianchi2", {"epsilon": 1, "m": 1.0, "l": 1.0, "lambda": -0.3}),
    ("bianchi2", {"epsilon": -1, "m": 1.0, "l": 1.0, "lambda": -0.3}),
    ("bianchi2_euclid_neg", {"m": 1.0, "l": 1.0, "lambda": -0.3}),
    ("bianchi2_kahler", {"l": 1.0, "lambda": -3.0}),
    ("bianchi3", {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0}),
    ("bianchi3_complete", {"lambda": -3.0}),
    ("bianchi3_product", {"epsilon": 1, "gamma0": 1.0, "lambda": -1.0}),
    ("bianchi5_special", {"lambda": 3.0}),
    ("bianchi5_euclid", {"lambda": 1.0}),
]


def midpoint(metric) -> np.ndarray:
    lower, upper = metric.sample_window
    return np.array([0.3, -0.2, 0.4, 0.5 * (lower + upper)])


class TestEinsteinCondition:
    """Ric = λg at the window midpoint of each family."""

    @pytest.mark.parametrize("family,params,tolerance", EINSTEIN_CASES)
    def test_einstein_residual(self, family, params, tolerance):
        metric = build_metric(family, params)
        assert einstein_residual(metric, midpoint(metric), metric.lam) < tolerance

    def test_wrong_lambda_is_detected(self):
        metric = build_metric("bianchi3", {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0})
        assert einstein_residual(metric, midpoint(metric), -2.9) > 1e-2

    def test_every_registered_family_has_a_constructor(self):
        assert sorted(CONSTRUCTORS) == family_names()


class TestFirstIntegrals:
    """ODE first integrals of the coefficient functions."""

    @pytest.mark.parametrize("family,params", ODE_CASES)
    def test_ode_residual(self, family, params):
        metric = build_metric(family, params)
        assert ode_residual(metric, midpoint(metric)[3]) < 1e-9

    @pytest.mark.parametrize("params", [
        {"theta": 0.5},
        {"theta": 1.5, "c": 2.0},
        {"theta": -0.5},
        {"theta": 0.5, "swap": 1},
    ])
    def test_minkowski_ode_residual(self, params):
        metric = build_metric("bianchi5_minkowski", params)
        lower, upper = metric.sample_window
        for tau in np.linspace(lower, upper, 5):
            assert ode_residual(metric, float(tau)) < 1e-9

    def test_wrong_energy_is_detected(self):
        metric = build_metric("bianchi2", {"epsilon": 1, "m": 1.0, "l": 1.0, "lambda": -0.3})
        assert ode_residual(metric, midpoint(metric)[3], {"E": 1.0}) > 1e-2

    def test_wrong_lambda_is_detected(self):
        metric = build_metric("bianchi3", {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0})
        assert ode_residual(metric, midpoint(metric)[3], {"lambda": -2.0}) > 1e-2

    def test_family_without_first_integral(self):
        metric = build_metric("bianchi2_selfdual", {"b": -1.0, "lambda": -3.0})
        with pytest.raises(ParameterDomainError):
            ode_residual(metric, midpoint(metric)[3])


class TestTypeTwoStructure:
    """Kähler form and the inessential parameter l."""

    def test_kahler_checks(self):
        metric = build_metric("bianchi2_kahler", {"l": 1.0, "lambda": -3.0})
        residuals = kahler_checks(metric, midpoint(metric))
        assert set(residuals) == {"closure", "almost_complex", "compatibility", "parallel"}
        for value in residuals.values():
            assert value < 1e-8

    def test_kahler_form_is_antisymmetric(self):
        J, dJ = kahler_form(np.array([0.3, -0.2, 0.4, 1.5]))
        np.testing.assert_array_equal(J, -J.T)
        np.testing.assert_array_equal(dJ, -np.transpose(dJ, (0, 2, 1)))
        assert J[3, 0] == 1.0
        assert J[1, 2] == pytest.approx(1.5)

    def test_kahler_form_partials(self):
        x = np.array([0.3, -0.2, 0.4, 1.5])
        _, dJ = kahler_form(x)
        h = 1e-3
        for k in range(4):
            step = np.zeros(4)
            step[k] = h
            expected = (kahler_form(x + step)[0] - kahler_form(x - step)[0]) / (2.0 * h)
            np.testing.assert_allclose(dJ[k], expected, atol=1e-12)

    def test_rescaling_removes_l(self):
        x = np.array([0.1, 0.2, 0.3, 3.0])
        assert rescaling_residual({"m": 1.0, "l": 2.0, "lambda": -0.01}, x) < 1e-10


class TestProductMetrics:
    """2d blocks of the type III product metrics."""

    @pytest.mark.parametrize("family,params", [
        ("bianchi3_product", {"epsilon": 1, "gamma0": 1.0, "lambda": -2.0}),
        ("bianchi3_product_tau", {"lambda": -2.0, "gamma0_sign": 1}),
        ("bianchi3_product_tau", {"lambda": -2.0, "gamma0_sign": -1}),
    ])
    def test_block_constants_equal_lambda(self, family, params):
        metric = build_metric(family, params)
        first, second = product_block_constants(metric)
        assert first == pytest.approx(-2.0, abs=1e-8)
        assert second == pytest.approx(-2.0, abs=1e-8)


class TestParameterValidation:
    """Registry and domain errors."""

    def test_unknown_family(self):
        with pytest.raises(UnknownFamilyError):
            build_metric("bianchi9", {})

    def test_missing_parameter(self):
        with pytest.raises(ParameterDomainError):
            build_metric("bianchi2", {"epsilon": 1, "m": 1.0, "l": 1.0})

    def test_unexpected_parameter(self):
        with pytest.raises(ParameterDomainError):
            build_metric("bianchi3_complete", {"lambda": -3.0, "mass": 1.0})

    def test_lambda_alias_for_minkowski(self):
        metric = build_metric("bianchi5_minkowski", {"lambda": 2.0 * np.sinh(0.5)})
        assert metric.params["theta"] == pytest.approx(0.5)

    @pytest.mark.parametrize("family,params", [
        ("bianchi2", {"epsilon": 1, "m": 0.0, "l": 1.0, "lambda": 0.0}),
        ("bianchi2", {"epsilon": 2, "m": 1.0, "l": 1.0, "lambda": -0.3}),
        ("bianchi2", {"epsilon": 1, "m": 1.0, "l": -1.0, "lambda": -0.3}),
        ("bianchi2_selfdual", {"b": -1.0, "lambda": 3.0}),
        ("bianchi3_complete", {"lambda": 1.0}),
        ("bianchi3_product", {"epsilon": 1, "gamma0": 1.0, "lambda": 1.0}),
        ("bianchi3_product_tau", {"lambda": -1.0, "gamma0_sign": 2}),
        ("bianchi5_special", {"lambda": 3.0, "euclidean": 1}),
        ("bianchi5_euclid", {"lambda": 0.0}),
        ("bianchi5_euclid", {"lambda": 1.0, "outer": 1}),
        ("bianchi5_minkowski", {"theta": 0.0}),
    ])
    def test_domain_errors(self, family, params):
        with pytest.raises(ParameterDomainError):
            build_metric(family, params)

    def test_no_flat_type_two(self):
        with pytest.raises(ParameterDomainError):
            flat_metrics("II")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
