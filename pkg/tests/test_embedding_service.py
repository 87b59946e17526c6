"""
Tests for flattening maps, constrained embeddings and the product split
"""

import math

import numpy as np
import pytest

from app.services.embedding_service import (
    DESITTER_SOURCES,
    EmbeddingError,
    EmbeddingMap,
    JacobianRankError,
    block_offdiagonal_residual,
    desitter_map,
    desitter_source_metric,
    embedding_report,
    fd_jacobian,
    flattening_map,
    flattening_source,
    polar_deviation,
    polar_regularity_check,
    product_split_map,
    pullback,
    resolve_type3_ads_embedding,
    sample_points,
    split_phi,
)
from app.services.symmetry_service import T, X, Y, Z


class TestFlattening:
    """Minkowski coordinates for the flat catalog metrics."""

    @pytest.mark.parametrize("bianchi_class", ["III", "V"])
    def test_pullback_is_the_flat_metric(self, bianchi_class):
        mapping, metric = flattening_map(bianchi_class), flattening_source(bianchi_class)
        report = embedding_report(mapping, metric, sample_points(metric, 8, seed=2))
        assert report.constraint_residual == 0.0
        assert report.pullback_residual < 1e-9
        assert report.points == 8

    def test_exact_jacobian_matches_finite_differences(self):
        mapping = flattening_map("V")
        x = np.array([0.3, -0.4, 0.2, 1.5])
        assert np.max(np.abs(mapping.jacobian(x) - fd_jacobian(mapping, x))) < 1e-7

    def test_unknown_class(self):
        with pytest.raises(EmbeddingError):
            flattening_map("II")


class TestConstrainedEmbeddings:
    """5d constrained coordinates of the conformally flat special cases."""

    @pytest.mark.parametrize("source", DESITTER_SOURCES)
    def test_constraint_and_pullback(self, source):
        metric = desitter_source_metric(source, 3.0)
        mapping = desitter_map(source, 3.0)
        report = embedding_report(mapping, metric, sample_points(metric, 6, seed=4))
        assert report.constraint_residual < 1e-10
        assert report.pullback_residual < 1e-8

    def test_only_the_shrinking_radius_anti_de_sitter_map_verifies(self):
        metric = desitter_source_metric("type3_lambda_neg", -3.0)
        points = sample_points(metric, 6, seed=4)
        resolution = resolve_type3_ads_embedding(-3.0, points)
        assert resolution["verified"] == "radius_minus"
        assert resolution["reports"]["radius_plus"].pullback_residual > 1e-3

    def test_scale_follows_lambda(self):
        metric = desitter_source_metric("type5_lambda_pos", 0.75)
        report = embedding_report(desitter_map("type5_lambda_pos", 0.75), metric, sample_points(metric, 4))
        assert report.pullback_residual < 1e-8

    def test_invalid_requests(self):
        with pytest.raises(EmbeddingError):
            desitter_map("type3_lambda_pos", 0.0)
        with pytest.raises(EmbeddingError):
            desitter_map("type4", 3.0)
        with pytest.raises(EmbeddingError):
            desitter_source_metric("type4", 3.0)
        with pytest.raises(EmbeddingError):
            desitter_map("type3_lambda_neg", -3.0, variant="guessed")


class TestProductSplit:
    """H² × AdS₂ coordinates of the Minkowskian type III product metric."""

    def test_split_is_an_isometry_without_block_coupling(self):
        mapping, metric = product_split_map(-1.0)
        points = sample_points(metric, 6, seed=7)
        report = embedding_report(mapping, metric, points)
        assert report.pullback_residual < 1e-8
        for x in points:
            assert block_offdiagonal_residual(mapping, metric, x) < 1e-10

    def test_phi_keeps_quadrant(self):
        mapping, _ = product_split_map(-1.0)
        for x, z in ((0.3, 0.5), (-0.6, -0.2), (0.1, -0.9)):
            assert mapping(np.array([x, 0.0, z, 0.1]))[1] == pytest.approx(split_phi(x, z))


class TestPolarRegularity:
    """Smooth closing of the complete type III metric at its double root."""

    def test_regular_period_gives_full_cone_angle(self):
        report = polar_regularity_check(-1.0)
        assert report.cone_angle == pytest.approx(2.0 * math.pi, abs=1e-6)
        assert report.y_period == pytest.approx(8.0 * math.pi / 3.0)

    def test_deviation_is_quadratic(self):
        report = polar_regularity_check(-4.0)
        for ratio in report.ratios:
            assert ratio == pytest.approx(100.0, rel=1e-2)
        assert report.far_deviation > report.deviation[0]
        assert polar_deviation(-4.0, 0.0) == 0.0

    def test_needs_negative_lambda(self):
        with pytest.raises(EmbeddingError):
            polar_regularity_check(1.0)


class TestEmbeddingMap:
    """Map plumbing."""

    def test_rank_deficient_jacobian(self):
        mapping = EmbeddingMap("collapse", [X, Y, Z, 0 * T], ambient_signature=(1, 1, 1, 1))
        with pytest.raises(JacobianRankError):
            pullback(mapping, np.array([0.1, 0.2, 0.3, 1.0]))

    def test_needs_ambient_form(self):
        with pytest.raises(ValueError):
            EmbeddingMap("bare", [X, Y, Z, T])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
