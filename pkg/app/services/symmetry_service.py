"""
Symmetry Service

Killing vectors, Killing-Yano 2-forms and Killing-Stäckel tensors of the
catalog metrics, with numerical residuals of their defining equations.
Vector and tensor fields are written once in sympy; components and exact
Jacobians are compiled with sp.lambdify.
"""

import logging
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from app.services import BianchiError
from app.services.geometry_service import (
    MetricField,
    SymbolicMetric,
    christoffel_from_partials,
    inverse_metric,
    partials,
)

logger = logging.getLogger(__name__)

# Chart symbols (x, y, z, τ)
X, Y, Z, T = sp.symbols("x y z t", real=True)
CHART = (X, Y, Z, T)


class SymmetryError(BianchiError):
    """Raised for malformed vector or tensor fields."""
    pass


class VectorField:
    """
    Vector field ξ^μ(x) with Jacobian J[μ, ν] = ∂_ν ξ^μ.

    Args:
        name: label
        components: x -> (n,) array
        jacobian: x -> (n, n) array
    """

    def __init__(self, name: str, components: Callable[[np.ndarray], np.ndarray],
                 jacobian: Callable[[np.ndarray], np.ndarray]):
        self.name = name
        self._components = components
        self._jacobian = jacobian

    @classmethod
    def from_sympy(cls, name: str, coordinates: Sequence[sp.Symbol], expressions: Sequence[sp.Expr]) -> "VectorField":
        coordinates = list(coordinates)
        expressions = [sp.sympify(e) for e in expressions]
        if len(expressions) != len(coordinates):
            raise SymmetryError(f"{name}: {len(expressions)} components for {len(coordinates)} coordinates")
        n = len(coordinates)
        jac = sp.Matrix(expressions).jacobian(coordinates)
        value_fn = sp.lambdify(coordinates, expressions, "numpy")
        jac_fn = sp.lambdify(coordinates, jac.tolist(), "numpy")

        def components(x):
            return np.array(value_fn(*x), dtype=float).reshape(n)

        def jacobian(x):
            return np.array(jac_fn(*x), dtype=float).reshape(n, n)

        field = cls(name, components, jacobian)
        field.expressions = expressions
        return field

    def components(self, x: np.ndarray) -> np.ndarray:
        return self._components(np.asarray(x, dtype=float))

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return self._jacobian(np.asarray(x, dtype=float))

    def charge(self, x: np.ndarray, p: np.ndarray) -> float:
        """Linear momentum charge ξ^μ Π_μ."""
        return float(np.dot(self.components(x), p))

    def __repr__(self) -> str:
        return f"VectorField({self.name})"


class TensorField:
    """
    Rank-2 covariant tensor field with partials dT[k, μ, ν] = ∂_k T_μν.
    """

    def __init__(self, name: str, components: Callable[[np.ndarray], np.ndarray],
                 partials: Callable[[np.ndarray], np.ndarray]):
        self.name = name
        self._components = components
        self._partials = partials

    @classmethod
    def from_sympy(cls, name: str, coordinates: Sequence[sp.Symbol], matrix: sp.Matrix) -> "TensorField":
        coordinates = list(coordinates)
        array = sp.Array(sp.Matrix(matrix).tolist())
        first = sp.derive_by_array(array, coordinates)
        n = len(coordinates)
        value_fn = sp.lambdify(coordinates, array.tolist(), "numpy")
        first_fn = sp.lambdify(coordinates, first.tolist(), "numpy")

        def components(x):
            return np.array(value_fn(*x), dtype=float).reshape(n, n)

        def derivatives(x):
            return np.array(first_fn(*x), dtype=float).reshape(n, n, n)

        return cls(name, components, derivatives)

    @classmethod
    def from_metric(cls, metric: MetricField) -> "TensorField":
        def components(x):
            return metric.components(x)

        def derivatives(x):
            return partials(metric, x, order=1).first

        return cls(f"{metric.name}:g", components, derivatives)

    @classmethod
    def constant(cls, name: str, matrix: np.ndarray) -> "TensorField":
        matrix = np.asarray(matrix, dtype=float)
        n = matrix.shape[0]
        return cls(name, lambda x: matrix.copy(), lambda x: np.zeros((n, n, n)))

    def components(self, x: np.ndarray) -> np.ndarray:
        return self._components(np.asarray(x, dtype=float))

    def partials(self, x: np.ndarray) -> np.ndarray:
        return self._partials(np.asarray(x, dtype=float))


# Antisymmetric and symmetric flavours share the representation
KillingYanoField = TensorField
KillingStaeckelField = TensorField


def _connection(metric: MetricField, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = partials(metric, x, order=1)
    return d.metric, d.first, christoffel_from_partials(inverse_metric(d.metric), d.first)


def killing_residual(xi: VectorField, metric: MetricField, x: np.ndarray) -> float:
    """
    max |(L_ξ g)_μν| = max |∇_μ ξ_ν + ∇_ν ξ_μ|.

    Args:
        xi (VectorField): candidate Killing vector
        metric (MetricField): the metric
        x (np.ndarray): chart point

    Returns:
        float: worst component of the Lie derivative of g
    """
    g, dg, _ = _connection(metric, x)
    v = xi.components(x)
    J = xi.jacobian(x)
    lie = np.einsum("k,kmn->mn", v, dg) + np.einsum("kn,km->mn", g, J) + np.einsum("mk,kn->mn", g, J)
    return float(np.max(np.abs(lie)))


def lie_bracket(xi: VectorField, eta: VectorField, x: np.ndarray) -> np.ndarray:
    """[ξ, η]^μ = ξ^ν ∂_ν η^μ − η^ν ∂_ν ξ^μ."""
    return eta.jacobian(x) @ xi.components(x) - xi.jacobian(x) @ eta.components(x)


def covariant_derivative(field: TensorField, metric: MetricField, x: np.ndarray) -> np.ndarray:
    """D[λ, μ, ν] = ∇_λ T_μν."""
    _, _, gamma = _connection(metric, x)
    T_ = field.components(x)
    return (
        field.partials(x)
        - np.einsum("slm,sn->lmn", gamma, T_)
        - np.einsum("sln,ms->lmn", gamma, T_)
    )


def killing_yano_residual(Y: KillingYanoField, metric: MetricField, x: np.ndarray) -> float:
    """max |∇_μ Y_νρ + ∇_ν Y_μρ|."""
    D = covariant_derivative(Y, metric, x)
    return float(np.max(np.abs(D + np.einsum("mnr->nmr", D))))


def ks_residual(S: KillingStaeckelField, metric: MetricField, x: np.ndarray) -> float:
    """max |∇_(μ S_νρ)| as the cyclic sum of ∇S."""
    D = covariant_derivative(S, metric, x)
    cyclic = D + np.einsum("nrm->mnr", D) + np.einsum("rmn->mnr", D)
    return float(np.max(np.abs(cyclic)))


def yano_square(Y: KillingYanoField, metric: MetricField, x: np.ndarray) -> np.ndarray:
    """K_μν = Y_μλ g^λσ Y_νσ at x."""
    g_inv = inverse_metric(metric.components(x))
    Yx = Y.components(x)
    return Yx @ g_inv @ Yx.T


def yano_square_field(Y: KillingYanoField, metric: MetricField) -> KillingStaeckelField:
    """K = Y g⁻¹ Yᵀ as a field, partials by the product rule."""
    def components(x):
        return yano_square(Y, metric, x)

    def derivatives(x):
        d = partials(metric, x, order=1)
        g_inv = inverse_metric(d.metric)
        d_inv = -np.einsum("am,kmn,nb->kab", g_inv, d.first, g_inv)
        Yx, dY = Y.components(x), Y.partials(x)
        return (
            np.einsum("kma,ab,nb->kmn", dY, g_inv, Yx)
            + np.einsum("ma,kab,nb->kmn", Yx, d_inv, Yx)
            + np.einsum("ma,ab,knb->kmn", Yx, g_inv, dY)
        )

    return TensorField(f"{Y.name}^2", components, derivatives)


# ---------------------------------------------------------------------------
# Family catalogs
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def bianchi_killing_vectors(bianchi_class: str, include_extra: bool = True) -> Tuple[VectorField, ...]:
    """
    Group generators L1..L3 and, for types II and III, the extra isotropy generator L4.

    Args:
        bianchi_class (str): II, III or V
        include_extra (bool): add L4 where the metric has the bi-axial symmetry
    """
    half = sp.Rational(1, 2)
    if bianchi_class == "II":
        fields = [
            ("L1", [1, 0, 0, 0]),
            ("L2", [-Z, 1, 0, 0]),
            ("L3", [0, 0, 1, 0]),
            ("L4", [-half * (Y ** 2 - Z ** 2), -Z, Y, 0]),
        ]
    elif bianchi_class == "III":
        fields = [
            ("L1", [1, 0, Z, 0]),
            ("L2", [0, 1, 0, 0]),
            ("L3", [0, 0, 1, 0]),
            ("L4", [Z, 0, half * (Z ** 2 - sp.exp(2 * X)), 0]),
        ]
    elif bianchi_class == "V":
        fields = [
            ("L1", [1, -Y, -Z, 0]),
            ("L2", [0, 1, 0, 0]),
            ("L3", [0, 0, 1, 0]),
        ]
    else:
        raise SymmetryError(f"unsupported Bianchi class '{bianchi_class}'")
    if not include_extra:
        fields = fields[:3]
    return tuple(VectorField.from_sympy(name, CHART, expressions) for name, expressions in fields)


# [A, B] = Σ coefficient · generator
STRUCTURE_CONSTANTS: Dict[str, Dict[Tuple[str, str], Dict[str, float]]] = {
    "II": {
        ("L2", "L3"): {"L1": 1.0},
        ("L4", "L2"): {"L3": -1.0},
        ("L4", "L3"): {"L2": 1.0},
        ("L1", "L2"): {},
        ("L1", "L3"): {},
        ("L1", "L4"): {},
    },
    "III": {
        ("L1", "L4"): {"L4": 1.0},
        ("L3", "L4"): {"L1": 1.0},
        ("L3", "L1"): {"L3": 1.0},
        ("L2", "L1"): {},
        ("L2", "L3"): {},
        ("L2", "L4"): {},
    },
    "V": {
        ("L1", "L2"): {"L2": 1.0},
        ("L3", "L1"): {"L3": -1.0},
        ("L2", "L3"): {},
    },
}


def structure_constants_residual(bianchi_class: str, x: np.ndarray) -> float:
    """Worst componentwise mismatch of the Lie algebra relations at x."""
    fields = {f.name: f for f in bianchi_killing_vectors(bianchi_class)}
    worst = 0.0
    for (a, b), combination in STRUCTURE_CONSTANTS[bianchi_class].items():
        expected = np.zeros(4)
        for name, coefficient in combination.items():
            expected += coefficient * fields[name].components(x)
        worst = max(worst, float(np.max(np.abs(lie_bracket(fields[a], fields[b], x) - expected))))
    return worst


def family_killing_vectors(metric) -> List[VectorField]:
    """Killing vectors declared for a catalog metric."""
    name = getattr(metric, "name", "")
    bi_axial = name.startswith("bianchi2") or name in (
        "bianchi3", "bianchi3_complete", "bianchi3_product", "bianchi3_product_tau", "flat_type3",
    )
    return list(bianchi_killing_vectors(metric.bianchi_class, include_extra=bi_axial))


def type2_killing_yano(epsilon: int, l: float) -> KillingYanoField:
    """Y = εl e⁰∧e¹ + t e²∧e³ on the unified type II metric, c = t² − εl²."""
    c = T ** 2 - epsilon * l ** 2
    Yl = sp.zeros(4, 4)
    Yl[3, 0] = 2 * epsilon * l ** 2
    Yl[3, 2] = 2 * epsilon * l ** 2 * Y
    Yl[1, 2] = T * c
    return TensorField.from_sympy("Y_II", CHART, Yl - Yl.T)


def type2_killing_staeckel(epsilon: int, l: float) -> KillingStaeckelField:
    """S = c((e²)² + (e³)²) = c²(dy² + dz²)."""
    c = T ** 2 - epsilon * l ** 2
    return TensorField.from_sympy("S_II", CHART, sp.diag(0, c ** 2, c ** 2, 0))


def type3_killing_yano() -> KillingYanoField:
    """Y = s e³∧e¹ on g = s²(σ1² + σ3²) + fσ2² + ε ds²/f."""
    Yl = sp.zeros(4, 4)
    Yl[2, 0] = T ** 3 * sp.exp(-X)
    return TensorField.from_sympy("Y_III", CHART, Yl - Yl.T)


def type3_killing_staeckel() -> KillingStaeckelField:
    """S = s²((e¹)² + (e³)²) = s⁴(dx² + e^{−2x} dz²)."""
    return TensorField.from_sympy("S_III", CHART, sp.diag(T ** 4, 0, T ** 4 * sp.exp(-2 * X), 0))


def random_antisymmetric_form(seed: int = 0) -> KillingYanoField:
    rng = np.random.default_rng(seed)
    matrix = rng.normal(size=(4, 4))
    return TensorField.constant("random", matrix - matrix.T)


# ---------------------------------------------------------------------------
# de Sitter charts
# ---------------------------------------------------------------------------

DESITTER_SOURCES = ("type3", "type5")


def desitter_chart_metric(source: str, lam: float = 3.0) -> SymbolicMetric:
    """
    Conformally flat charts carrying ten Killing vectors.

    type3: (3/λ)[t²(dz² + dv²)/v² + (1+t²)du² − dt²/(1+t²)] on (v, u, z, t)
    type5: (3/λ)[sinh²θ (dy² + dz² + dv²)/v² − dθ²] on (y, z, v, θ)
    """
    scale = sp.Float(3.0 / lam)
    if source == "type3":
        v, u, z, t = sp.symbols("v u z t", real=True)
        matrix = scale * sp.diag(t ** 2 / v ** 2, 1 + t ** 2, t ** 2 / v ** 2, -1 / (1 + t ** 2))
        coordinates = [v, u, z, t]
    elif source == "type5":
        y, z, v, theta = sp.symbols("y z v theta", real=True)
        w = sp.sinh(theta) ** 2 / v ** 2
        matrix = scale * sp.diag(w, w, w, -1)
        coordinates = [y, z, v, theta]
    else:
        raise SymmetryError(f"unknown de Sitter source '{source}', expected one of {DESITTER_SOURCES}")

    def domain(x):
        return bool(x[2] > 0.0 and x[3] > 0.0) if source == "type5" else bool(x[0] > 0.0 and x[3] > 0.0)

    return SymbolicMetric(coordinates, matrix, signature=-1, domain=domain, name=f"desitter_{source}")


def desitter_killing_catalog(source: str) -> List[VectorField]:
    """
    The ten Killing vectors of a de Sitter chart.

    Returns:
        List[VectorField]: fields on the coordinates of desitter_chart_metric(source)
    """
    half = sp.Rational(1, 2)
    if source == "type3":
        v, u, z, t = sp.symbols("v u z t", real=True)
        f = sp.sqrt(1 + t ** 2) / t

        def combo(du, radial):
            # radial = (a_v, a_z, a_t) multiplying (f/v)(·)
            return [f * radial[0] / v, du, f * radial[1] / v, f * radial[2] / v]

        cos, sin = sp.cos(u), sp.sin(u)
        base = (v, 0, t)
        second = (z * v, -v ** 2, z * t)
        third = ((v ** 2 - z ** 2) * v, 2 * v ** 2 * z, -(v ** 2 + z ** 2) * t)
        vectors = [
            ("K1", [v, 0, z, 0]),
            ("K2", [0, 1, 0, 0]),
            ("K3", [0, 0, 1, 0]),
            ("K4", [z * v, 0, (z ** 2 - v ** 2) / 2, 0]),
            ("P1c", combo(-sin / (v * f), [cos * a for a in base])),
            ("P1s", combo(cos / (v * f), [sin * a for a in base])),
            ("P2c", combo(-z * sin / (v * f), [cos * a for a in second])),
            ("P2s", combo(z * cos / (v * f), [sin * a for a in second])),
            ("P3c", combo((v ** 2 + z ** 2) * sin / (v * f), [cos * a for a in third])),
            ("P3s", combo(-(v ** 2 + z ** 2) * cos / (v * f), [sin * a for a in third])),
        ]
        coordinates = [v, u, z, t]
    elif source == "type5":
        y, z, v, theta = sp.symbols("y z v theta", real=True)
        coth = 1 / sp.tanh(theta)
        vectors = [
            ("P1", [1, 0, 0, 0]),
            ("P2", [0, 1, 0, 0]),
            ("M3", [-z, y, 0, 0]),
            ("Q1", [half * (-y ** 2 + z ** 2 + v ** 2), -y * z, -y * v, 0]),
            ("Q2", [-z * y, half * (y ** 2 - z ** 2 + v ** 2), -z * v, 0]),
            ("L3", [-y, -z, -v, 0]),
            ("C1", [0, 0, -coth, -1 / v]),
            ("C2", [coth * v, 0, -coth * y, -y / v]),
            ("C3", [0, coth * v, -coth * z, -z / v]),
            ("C4", [-v * coth * y, -v * coth * z, (y ** 2 + z ** 2 - v ** 2) * coth / 2,
                    (y ** 2 + z ** 2 + v ** 2) / (2 * v)]),
        ]
        coordinates = [y, z, v, theta]
    else:
        raise SymmetryError(f"unknown de Sitter source '{source}', expected one of {DESITTER_SOURCES}")
    return [VectorField.from_sympy(name, coordinates, expressions) for name, expressions in vectors]
