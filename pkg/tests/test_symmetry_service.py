"""
Tests for Killing vectors, Killing-Yano and Killing-Stäckel tensors
"""

import numpy as np
import pytest

from app.services.catalog_service import build_metric
from app.services.symmetry_service import (
    CHART,
    X,
    Y,
    SymmetryError,
    TensorField,
    VectorField,
    bianchi_killing_vectors,
    desitter_chart_metric,
    desitter_killing_catalog,
    family_killing_vectors,
    killing_residual,
    killing_yano_residual,
    ks_residual,
    lie_bracket,
    random_antisymmetric_form,
    structure_constants_residual,
    type2_killing_staeckel,
    type2_killing_yano,
    type3_killing_staeckel,
    type3_killing_yano,
    yano_square,
    yano_square_field,
)

FAMILIES = [
    ("bianchi2", {"epsilon": 1, "m": 1.0, "l": 1.0, "lambda": -0.3}),
    ("bianchi2", {"epsilon": -1, "m": 1.0, "l": 1.0, "lambda": -0.3}),
    ("bianchi2_kahler", {"l": 1.0, "lambda": -3.0}),
    ("bianchi3", {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0}),
    ("bianchi3_product", {"epsilon": -1, "gamma0": 1.0, "lambda": -1.0}),
    ("bianchi5_special", {"lambda": 3.0}),
    ("bianchi5_euclid", {"lambda": 1.0}),
    ("flat_type3", {}),
]


def sample(metric, count: int = 4, seed: int = 11):
    rng = np.random.default_rng(seed)
    lower, upper = metric.sample_window
    return [np.array([*rng.uniform(-1.0, 1.0, size=3), rng.uniform(lower, upper)]) for _ in range(count)]


class TestKillingVectors:
    """Generators of the isometry algebra."""

    @pytest.mark.parametrize("bianchi_class", ["II", "III", "V"])
    def test_structure_constants(self, bianchi_class):
        for x in (np.array([0.3, -0.7, 1.1, 0.5]), np.array([-1.2, 0.4, 0.2, 2.0])):
            assert structure_constants_residual(bianchi_class, x) < 1e-12

    @pytest.mark.parametrize("family,params", FAMILIES)
    def test_family_vectors_are_killing(self, family, params):
        metric = build_metric(family, params)
        vectors = family_killing_vectors(metric)
        for x in sample(metric):
            for vector in vectors:
                assert killing_residual(vector, metric, x) < 1e-7, vector.name

    def test_extra_generator_only_on_biaxial_families(self):
        metric = build_metric("bianchi2", {"epsilon": 1, "m": 1.0, "l": 1.0, "lambda": -0.3})
        assert [v.name for v in family_killing_vectors(metric)] == ["L1", "L2", "L3", "L4"]
        metric = build_metric("bianchi5_special", {"lambda": 3.0})
        assert [v.name for v in family_killing_vectors(metric)] == ["L1", "L2", "L3"]

    def test_non_killing_field_is_detected(self):
        metric = build_metric("bianchi3", {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0})
        dilation = VectorField.from_sympy("D", CHART, [X, Y, 0, 0])
        assert killing_residual(dilation, metric, sample(metric)[0]) > 1e-3

    def test_lie_bracket_of_commuting_translations(self):
        L1, L2, L3 = bianchi_killing_vectors("III", include_extra=False)
        assert np.max(np.abs(lie_bracket(L2, L3, np.array([0.1, 0.2, 0.3, 1.0])))) == 0.0

    def test_charge(self):
        L1 = bianchi_killing_vectors("II")[0]
        assert L1.charge(np.zeros(4), np.array([2.0, 1.0, 1.0, 1.0])) == 2.0

    def test_malformed_fields(self):
        with pytest.raises(SymmetryError):
            VectorField.from_sympy("bad", CHART, [X, Y])
        with pytest.raises(SymmetryError):
            bianchi_killing_vectors("IX")


class TestKillingYano:
    """Killing-Yano 2-forms and their squares."""

    @pytest.mark.parametrize("epsilon", [1, -1])
    def test_type_two(self, epsilon):
        metric = build_metric("bianchi2", {"epsilon": epsilon, "m": 1.0, "l": 1.0, "lambda": -0.3})
        Yf = type2_killing_yano(epsilon, 1.0)
        S = type2_killing_staeckel(epsilon, 1.0)
        for x in sample(metric):
            assert killing_yano_residual(Yf, metric, x) < 1e-8
            assert ks_residual(S, metric, x) < 1e-8
            expected = S.components(x) + epsilon * metric.components(x)
            assert np.max(np.abs(yano_square(Yf, metric, x) - expected)) < 1e-8

    @pytest.mark.parametrize("params", [
        {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0},
        {"epsilon": -1, "gamma0": 0.5, "lambda": 3.0},
    ])
    def test_type_three(self, params):
        metric = build_metric("bianchi3", params)
        Yf, S = type3_killing_yano(), type3_killing_staeckel()
        for x in sample(metric):
            assert killing_yano_residual(Yf, metric, x) < 1e-8
            assert ks_residual(S, metric, x) < 1e-8
            assert np.max(np.abs(yano_square(Yf, metric, x) - S.components(x))) < 1e-8

    def test_square_of_yano_is_staeckel(self):
        metric = build_metric("bianchi3", {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0})
        square = yano_square_field(type3_killing_yano(), metric)
        for x in sample(metric, count=2):
            assert ks_residual(square, metric, x) < 1e-8

    def test_metric_is_trivially_staeckel(self):
        metric = build_metric("bianchi5_special", {"lambda": 3.0})
        assert ks_residual(TensorField.from_metric(metric), metric, sample(metric)[0]) < 1e-10

    def test_random_form_fails(self):
        metric = build_metric("bianchi3", {"epsilon": 1, "gamma0": 0.5, "lambda": -3.0})
        form = random_antisymmetric_form(seed=5)
        assert killing_yano_residual(form, metric, sample(metric)[0]) > 1e-6


class TestDeSitterCharts:
    """Ten Killing vectors on each conformally flat chart."""

    @pytest.mark.parametrize("source,points", [
        ("type3", [np.array([0.7, 0.3, -0.4, 0.9]), np.array([1.3, 2.0, 0.5, 1.7])]),
        ("type5", [np.array([0.2, -0.5, 0.8, 0.6]), np.array([-0.3, 0.4, 1.5, 1.2])]),
    ])
    def test_catalog_is_killing(self, source, points):
        metric = desitter_chart_metric(source)
        vectors = desitter_killing_catalog(source)
        assert len(vectors) == 10
        for x in points:
            for vector in vectors:
                assert killing_residual(vector, metric, x) < 1e-7, vector.name

    def test_unknown_source(self):
        with pytest.raises(SymmetryError):
            desitter_chart_metric("type7")
        with pytest.raises(SymmetryError):
            desitter_killing_catalog("type7")

    def test_chart_domain(self):
        metric = desitter_chart_metric("type5")
        assert metric.in_domain(np.array([0.0, 0.0, 1.0, 1.0]))
        assert not metric.in_domain(np.array([0.0, 0.0, -1.0, 1.0]))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
