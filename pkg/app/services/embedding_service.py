"""
Embedding Service

Coordinate changes and isometric embeddings of catalog metrics: flattening
maps of the flat type III/V metrics, constrained-coordinate embeddings of the
conformally flat special cases into 5d pseudo-Euclidean space, the H²×AdS₂
split of the type III product metric and the polar regularity check of the
complete type III metric.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.integrate import quad

from app.services import BianchiError
from app.services.catalog_service import build_metric, flat_metrics
from app.services.frames_service import TIME_INDEX, DiagonalBianchiMetric
from app.services.geometry_service import MetricField
from app.services.symmetry_service import CHART, T, X, Y, Z

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
DESITTER_SOURCES = (
    "type3_lambda_pos",
    "type3_lambda_neg",
    "type3_euclid",
    "type5_lambda_pos",
    "type5_lambda_neg",
    "type5_euclid",
)
TYPE3_ADS_VARIANTS = ("radius_plus", "radius_minus")


class JacobianRankError(BianchiError):
    """Raised when an embedding Jacobian is rank deficient at a point."""
    pass


class EmbeddingError(BianchiError):
    """Raised when an embedding is requested for an unsupported source."""
    pass


class EmbeddingMap:
    """
    Map from the chart (x, y, z, τ) into a target space.

    Args:
        name (str): label
        expressions (Sequence[sp.Expr]): target coordinates in the chart symbols
        ambient_signature (Sequence[int]): diagonal ±1 pattern of the flat ambient form
        scale (float): overall factor of the ambient form
        constraint_value (Optional[float]): value of Σ η_i z_i² on the image, if constrained
        target_metric: z -> matrix, replaces the flat ambient form when given
    """

    def __init__(
        self,
        name: str,
        expressions: Sequence[sp.Expr],
        ambient_signature: Optional[Sequence[int]] = None,
        scale: float = 1.0,
        constraint_value: Optional[float] = None,
        target_metric: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        coordinates: Sequence[sp.Symbol] = CHART,
    ):
        if ambient_signature is None and target_metric is None:
            raise ValueError("an embedding needs an ambient signature or a target metric")
        self.name = name
        self.expressions = list(expressions)
        self.target_dim = len(self.expressions)
        self.ambient_signature = np.asarray(ambient_signature, dtype=float) if ambient_signature is not None else None
        self.scale = scale
        self.constraint_value = constraint_value
        self._target_metric = target_metric
        jacobian = sp.Matrix(self.expressions).jacobian(list(coordinates))
        self._map_fn = sp.lambdify(list(coordinates), self.expressions, "numpy")
        self._jac_fn = sp.lambdify(list(coordinates), jacobian.tolist(), "numpy")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.array(self._map_fn(*np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return np.array(self._jac_fn(*np.asarray(x, dtype=float)), dtype=float).reshape(self.target_dim, -1)

    def ambient(self, z: np.ndarray) -> np.ndarray:
        if self._target_metric is not None:
            return np.asarray(self._target_metric(z), dtype=float)
        return self.scale * np.diag(self.ambient_signature)

    def constraint(self, z: np.ndarray) -> float:
        if self.ambient_signature is None:
            raise EmbeddingError(f"{self.name} has no quadratic constraint")
        return float(np.sum(self.ambient_signature * z ** 2))

    def constraint_residual(self, x: np.ndarray) -> float:
        """|Σ η_i z_i² − constraint value|, 0 for unconstrained maps."""
        if self.constraint_value is None:
            return 0.0
        return abs(self.constraint(self(x)) - self.constraint_value)

    @classmethod
    def identity(cls, metric: MetricField) -> "EmbeddingMap":
        return cls(f"identity:{metric.name}", list(CHART), target_metric=metric.components)


def pullback(embedding: EmbeddingMap, x: np.ndarray) -> np.ndarray:
    """
    J^T G J at x.

    Raises:
        JacobianRankError: if J has rank below the chart dimension
    """
    J = embedding.jacobian(x)
    singular_values = np.linalg.svd(J, compute_uv=False)
    if singular_values[-1] < RANK_TOL * max(1.0, singular_values[0]):
        raise JacobianRankError(f"{embedding.name}: Jacobian rank deficient at {np.asarray(x).tolist()}")
    return J.T @ embedding.ambient(embedding(x)) @ J


def pullback_residual(embedding: EmbeddingMap, metric: MetricField, x: np.ndarray) -> float:
    """max |(J^T η J)_{μν} − g_{μν}(x)|."""
    x = metric.require_domain(x)
    return float(np.max(np.abs(pullback(embedding, x) - metric.components(x))))


def fd_jacobian(embedding: EmbeddingMap, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian, used as a cross-check of the exact one."""
    x = np.asarray(x, dtype=float)
    columns = []
    for k in range(x.size):
        h = step * max(1.0, abs(x[k]))
        e = np.zeros_like(x)
        e[k] = h
        columns.append((embedding(x + e) - embedding(x - e)) / (2.0 * h))
    return np.stack(columns, axis=1)


# ---------------------------------------------------------------------------
# Hyperbolic building blocks
# ---------------------------------------------------------------------------

def _type3_hyperbolic_plane():
    """(w1, w2, w0) with w1² + w2² − w0² = −1 and induced metric dx² + e^{−2x}dz²."""
    w1 = Z * sp.exp(-X)
    w2 = sp.sinh(X) + sp.exp(-X) * Z ** 2 / 2
    w0 = sp.cosh(X) + sp.exp(-X) * Z ** 2 / 2
    return w1, w2, w0


def _type5_hyperbolic_space():
    """(r⃗, x0) with r⃗² − x0² = −1 and induced metric dx² + e^{2x}(dy² + dz²)."""
    r2 = Y ** 2 + Z ** 2
    r = [sp.exp(X) * Y, sp.exp(X) * Z, -sp.sinh(X) + sp.exp(X) * r2 / 2]
    x0 = sp.cosh(X) + sp.exp(X) * r2 / 2
    return r, x0


def flattening_map(bianchi_class: str) -> EmbeddingMap:
    """
    Minkowski coordinates of the flat type III and type V metrics.

    III: σ2² + t²(σ1² + σ3²) − dt² = dX1² + dX2² + dy² − dX0²
    V: t²(σ1² + σ2² + σ3²) − dt² = dr⃗·dr⃗ − dτ²
    """
    if bianchi_class == "III":
        w1, w2, w0 = _type3_hyperbolic_plane()
        return EmbeddingMap("flatten_type3", [T * w1, T * w2, Y, T * w0], ambient_signature=(1, 1, 1, -1))
    if bianchi_class == "V":
        r, x0 = _type5_hyperbolic_space()
        return EmbeddingMap("flatten_type5", [T * r[0], T * r[1], T * r[2], T * x0], ambient_signature=(1, 1, 1, -1))
    raise EmbeddingError(f"no flattening map for class {bianchi_class}")


def flattening_source(bianchi_class: str) -> DiagonalBianchiMetric:
    return flat_metrics(bianchi_class)


# ---------------------------------------------------------------------------
# Constrained 5d embeddings
# ---------------------------------------------------------------------------

def desitter_source_metric(source: str, lam: float) -> DiagonalBianchiMetric:
    """
    Special-case catalog metric embedded by desitter_map(source).

    type3_*: γ0 = 0 type III metric; type5_*: the E = c = 0 type V metric.
    """
    if source == "type3_lambda_pos":
        return build_metric("bianchi3", {"epsilon": -1, "gamma0": 0.0, "lambda": abs(lam)})
    if source == "type3_lambda_neg":
        return build_metric("bianchi3", {"epsilon": -1, "gamma0": 0.0, "lambda": -abs(lam)})
    if source == "type3_euclid":
        return build_metric("bianchi3", {"epsilon": 1, "gamma0": 0.0, "lambda": -abs(lam)})
    if source == "type5_lambda_pos":
        return build_metric("bianchi5_special", {"lambda": abs(lam)})
    if source == "type5_lambda_neg":
        return build_metric("bianchi5_special", {"lambda": -abs(lam)})
    if source == "type5_euclid":
        return build_metric("bianchi5_special", {"lambda": -abs(lam), "euclidean": 1})
    raise EmbeddingError(f"unknown embedding source '{source}', expected one of {DESITTER_SOURCES}")


def desitter_map(source: str, lam: float, variant: str = "radius_minus") -> EmbeddingMap:
    """
    5d constrained coordinates of the conformally flat special cases.

    Args:
        source (str): one of DESITTER_SOURCES
        lam (float): Einstein constant, only |λ| is used
        variant (str): for type3_lambda_neg, "radius_plus" (√(1+t²) radius, constraint +1)
            or "radius_minus" (√(1−t²) radius, constraint −1)

    Returns:
        EmbeddingMap: map from the source chart with ambient scale 3/|λ|
    """
    if lam == 0.0:
        raise EmbeddingError("λ = 0 has no de Sitter embedding")
    k = sp.sqrt(sp.Float(abs(lam)) / 3)
    scale = 3.0 / abs(lam)

    if source.startswith("type3"):
        t, u = k * T, k * Y
        w1, w2, w0 = _type3_hyperbolic_plane()
        head = [t * w1, t * w2]
        if source == "type3_lambda_pos":
            R = sp.sqrt(1 + t ** 2)
            expressions = head + [R * sp.cos(u), t * w0, R * sp.sin(u)]
            return EmbeddingMap("desitter_type3", expressions, (1, 1, 1, -1, 1), scale, 1.0)
        if source == "type3_lambda_neg":
            if variant not in TYPE3_ADS_VARIANTS:
                raise EmbeddingError(f"variant must be one of {TYPE3_ADS_VARIANTS}, got {variant}")
            R = sp.sqrt(1 + t ** 2) if variant == "radius_plus" else sp.sqrt(1 - t ** 2)
            constraint = 1.0 if variant == "radius_plus" else -1.0
            expressions = head + [R * sp.cosh(u), t * w0, R * sp.sinh(u)]
            return EmbeddingMap(f"antidesitter_type3_{variant}", expressions, (1, 1, -1, -1, 1), scale, constraint)
        if source == "type3_euclid":
            R = sp.sqrt(t ** 2 - 1)
            expressions = head + [R * sp.cos(u), t * w0, R * sp.sin(u)]
            return EmbeddingMap("hyperbolic_type3", expressions, (1, 1, 1, -1, 1), scale, -1.0)

    if source.startswith("type5"):
        S = k * T
        r, x0 = _type5_hyperbolic_space()
        if source == "type5_euclid":
            cosh_theta = S
            sinh_theta = sp.sqrt(S ** 2 - 1)
            expressions = [cosh_theta * r[0], cosh_theta * r[1], cosh_theta * r[2], cosh_theta * x0, sinh_theta]
            return EmbeddingMap("hyperbolic_type5", expressions, (1, 1, 1, -1, 1), scale, -1.0)
        if source == "type5_lambda_pos":
            # √(λ/3) s = 2t/(1 − t²)
            t = (sp.sqrt(1 + S ** 2) - 1) / S
            d = 1 - t ** 2
            expressions = [(1 + t ** 2) / d] + [2 * t * ri / d for ri in r] + [2 * t * x0 / d]
            return EmbeddingMap("desitter_type5", expressions, (1, 1, 1, 1, -1), scale, 1.0)
        if source == "type5_lambda_neg":
            # √(|λ|/3) s = 2t/(1 + t²)
            t = (1 - sp.sqrt(1 - S ** 2)) / S
            d = 1 + t ** 2
            expressions = [(1 - t ** 2) / d] + [2 * t * ri / d for ri in r] + [2 * t * x0 / d]
            return EmbeddingMap("antidesitter_type5", expressions, (-1, 1, 1, 1, -1), scale, -1.0)

    raise EmbeddingError(f"unknown embedding source '{source}', expected one of {DESITTER_SOURCES}")


@dataclass
class EmbeddingReport:
    name: str
    constraint_residual: float
    pullback_residual: float
    points: int


def embedding_report(embedding: EmbeddingMap, metric: MetricField, points: Sequence[np.ndarray]) -> EmbeddingReport:
    """Worst constraint and pullback residuals over sample points."""
    constraint, pull = 0.0, 0.0
    for x in points:
        constraint = max(constraint, embedding.constraint_residual(x))
        pull = max(pull, pullback_residual(embedding, metric, x))
    return EmbeddingReport(embedding.name, constraint, pull, len(points))


def resolve_type3_ads_embedding(lam: float, points: Sequence[np.ndarray], tol: float = 1e-8) -> Dict[str, object]:
    """
    Check both type III λ < 0 Minkowskian maps and name the one that verifies.

    Returns:
        Dict[str, object]: per-variant reports and the verified variant (or None)
    """
    metric = desitter_source_metric("type3_lambda_neg", lam)
    reports = {}
    verified = None
    for variant in TYPE3_ADS_VARIANTS:
        report = embedding_report(desitter_map("type3_lambda_neg", lam, variant), metric, points)
        reports[variant] = report
        if report.constraint_residual < tol and report.pullback_residual < tol and verified is None:
            verified = variant
    if verified != "radius_plus":
        logger.warning(
            f"⚠️ √(1+t²) type III AdS map fails (pullback {reports['radius_plus'].pullback_residual:.3e}), "
            f"verified variant: {verified}"
        )
    return {"reports": reports, "verified": verified}


# ---------------------------------------------------------------------------
# H² × AdS₂ split
# ---------------------------------------------------------------------------

def product_split_map(lam: float = -1.0) -> Tuple[EmbeddingMap, DiagonalBianchiMetric]:
    """
    (x, y, z, t) -> (μ, φ, y, t) with μ = ½[eˣ + (1+z²)e^{−x}], tan φ = (e^{2x}+z²−1)/(2z).

    The target metric is (1/|λ|)[dμ²/(μ²−1) + (μ²−1)dφ² + (1−t²)dy² − dt²/(1−t²)],
    the H²×AdS₂ form of the Minkowskian type III product metric with γ0 = 1.

    Returns:
        Tuple[EmbeddingMap, DiagonalBianchiMetric]: the map and its source metric
    """
    source = build_metric("bianchi3_product", {"epsilon": -1, "gamma0": 1.0, "lambda": -abs(lam)})
    w1, w2, w0 = _type3_hyperbolic_plane()
    # atan2 keeps the quadrant; its exact derivative is branch free
    phi = sp.atan2(w2, w1)
    scale = 1.0 / abs(lam)

    def target_metric(z: np.ndarray) -> np.ndarray:
        mu, _, _, t = z
        q = mu ** 2 - 1.0
        return scale * np.diag([1.0 / q, q, 1.0 - t ** 2, -1.0 / (1.0 - t ** 2)])

    embedding = EmbeddingMap("product_split", [w0, phi, Y, T], target_metric=target_metric)
    return embedding, source


def split_phi(x: float, z: float) -> float:
    """Quadrant-aware φ of the split map."""
    return math.atan2(math.exp(2.0 * x) + z ** 2 - 1.0, 2.0 * z)


def block_offdiagonal_residual(embedding: EmbeddingMap, metric: MetricField, x: np.ndarray) -> float:
    """Largest coupling between the (μ, φ) and (y, t) blocks of g written in split coordinates."""
    J_inv = np.linalg.inv(embedding.jacobian(x))
    g_split = J_inv.T @ metric.components(x) @ J_inv
    return float(np.max(np.abs(g_split[:2, 2:])))


# ---------------------------------------------------------------------------
# Polar regularity of the complete type III metric
# ---------------------------------------------------------------------------

def _complete_h(offset: float) -> float:
    """h(u) = (u − 2)(u + 1)²/(3u) at u = 2 + offset."""
    return offset * (3.0 + offset) ** 2 / (3.0 * (2.0 + offset))


@dataclass
class PolarRegularityReport:
    xi: List[float]
    deviation: List[float]
    ratios: List[float]
    cone_angle: float
    y_period: float
    far_deviation: float


def polar_deviation(lam: float, xi: float) -> float:
    """
    Relative deviation of the complete metric from (1/|λ|)(4(σ1²+σ3²) + ξ²dỹ² + dξ²).

    u = 2 + δ with δ = (3/8)ξ² and ỹ = (3/4)√|λ| y. The three terms are
    u²/4 − 1, 16h/(9ξ²) − 1 and (du/dξ)²/h − 1, simplified in δ.
    """
    delta = 3.0 * xi ** 2 / 8.0
    deviations = [
        delta * (1.0 + delta / 4.0),
        delta * (3.0 + 2.0 * delta) / (9.0 * (2.0 + delta)),
        delta * (1.5 + delta) / (3.0 + delta) ** 2,
    ]
    return max(deviations)


def cone_angle(lam: float, y_period: float, offset: float = 1e-10) -> float:
    """Circumference over proper radius of the ỹ-circle at u = 2 + offset."""
    root_lam = math.sqrt(abs(lam))
    # u = 2 + w², the integrand of ∫ du/√(|λ|h) becomes smooth in w
    radius, _ = quad(
        lambda w: 2.0 * math.sqrt(3.0 * (2.0 + w ** 2)) / ((3.0 + w ** 2) * root_lam),
        0.0,
        math.sqrt(offset),
    )
    circumference = y_period * math.sqrt(_complete_h(offset))
    return circumference / radius


def polar_regularity_check(lam: float, xis: Sequence[float] = (1e-2, 1e-3, 1e-4)) -> PolarRegularityReport:
    """
    Local product form near the double root u = 2 of the complete type III metric.

    Args:
        lam (float): negative Einstein constant
        xis (Sequence[float]): decreasing ξ sequence

    Returns:
        PolarRegularityReport: deviations, successive ratios (≈100 for O(ξ²) when ξ shrinks by 10),
            the cone angle for the regular y-period 8π/(3√|λ|) and the deviation at ξ = 1
    """
    if lam >= 0.0:
        raise EmbeddingError(f"the complete type III metric needs λ < 0, got {lam}")
    deviation = [polar_deviation(lam, xi) for xi in xis]
    ratios = [a / b for a, b in zip(deviation[:-1], deviation[1:]) if b > 0.0]
    period = 8.0 * math.pi / (3.0 * math.sqrt(abs(lam)))
    angle = cone_angle(lam, period)
    report = PolarRegularityReport(
        xi=list(xis),
        deviation=deviation,
        ratios=ratios,
        cone_angle=angle,
        y_period=period,
        far_deviation=polar_deviation(lam, 1.0),
    )
    logger.info(f"✅ Polar check: cone angle {angle:.12f}, deviations {deviation}")
    return report


def sample_points(metric: DiagonalBianchiMetric, count: int = 20, seed: int = 0,
                  window: Optional[Tuple[float, float]] = None) -> List[np.ndarray]:
    """Seeded chart points with τ inside the metric's sampling window."""
    rng = np.random.default_rng(seed)
    lower, upper = window or metric.sample_window
    points = []
    for _ in range(count):
        x = rng.uniform(-1.0, 1.0, size=4)
        x[TIME_INDEX] = rng.uniform(lower, upper)
        points.append(x)
    return points
