"""
Frames Service

Left-invariant one-forms of the Bianchi II, III and V groups on the chart
(x, y, z, τ), and the diagonal metric g = Σ_A c_A(τ) θ^A ⊗ θ^A built on the
coframe θ^0 = dτ, θ^a = σ_a. Exact metric partials come from the product
rule applied to the coefficient jets and the analytic frame derivatives.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from app.services import BianchiError
from app.services.geometry_service import MetricField, Tetrad

logger = logging.getLogger(__name__)

FRAME_CLASSES = ("II", "III", "V")
TIME_INDEX = 3

# Symbols shared by every coefficient expression
TAU = sp.Symbol("tau", real=True)


class ParameterDomainError(BianchiError):
    """Raised when family parameters or chart points leave the positivity domain."""
    pass


@dataclass(frozen=True)
class Interval:
    """Open interval of the time coordinate, possibly unbounded."""
    lower: float
    upper: float

    def contains(self, value: float) -> bool:
        return self.lower < value < self.upper

    def distance_to_boundary(self, value: float) -> float:
        return min(value - self.lower, self.upper - value)

    def window(self, margin: float = 0.1, span: float = 4.0) -> Tuple[float, float]:
        """Finite sampling window strictly inside the interval."""
        lower, upper = self.lower, self.upper
        if np.isinf(lower) and np.isinf(upper):
            return -span / 2.0, span / 2.0
        if np.isinf(upper):
            step = max(abs(lower), 1.0)
            return lower + margin * step, lower + (margin + span) * step
        if np.isinf(lower):
            step = max(abs(upper), 1.0)
            return upper - (margin + span) * step, upper - margin * step
        width = upper - lower
        return lower + margin * width, upper - margin * width


class BianchiFrame:
    """
    Invariant coframe (σ1, σ2, σ3) of a Bianchi group.

    Rows of `sigma(x)` are the three one-forms as covectors on (x, y, z, τ).
    """

    def __init__(self, bianchi_class: str):
        if bianchi_class not in FRAME_CLASSES:
            raise ValueError(f"unsupported Bianchi class '{bianchi_class}'")
        self.bianchi_class = bianchi_class

    def sigma(self, x: np.ndarray) -> np.ndarray:
        X, Y = x[0], x[1]
        s = np.zeros((3, 4))
        if self.bianchi_class == "II":
            s[0] = [1.0, 0.0, Y, 0.0]
            s[1, 1] = 1.0
            s[2, 2] = 1.0
        elif self.bianchi_class == "III":
            s[0, 0] = 1.0
            s[1, 1] = 1.0
            s[2, 2] = np.exp(-X)
        else:
            s[0, 0] = 1.0
            s[1, 1] = np.exp(X)
            s[2, 2] = np.exp(X)
        return s

    def sigma_partials(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """First d[k, a, μ] = ∂_k σ_aμ and second dd[k, l, a, μ]."""
        X = x[0]
        d = np.zeros((4, 3, 4))
        dd = np.zeros((4, 4, 3, 4))
        if self.bianchi_class == "II":
            d[1, 0, 2] = 1.0
        elif self.bianchi_class == "III":
            d[0, 2, 2] = -np.exp(-X)
            dd[0, 0, 2, 2] = np.exp(-X)
        else:
            d[0, 1, 1] = d[0, 2, 2] = np.exp(X)
            dd[0, 0, 1, 1] = dd[0, 0, 2, 2] = np.exp(X)
        return d, dd

    def exterior_derivative(self, x: np.ndarray) -> np.ndarray:
        """(dσ_a)_μν = ∂_μ σ_aν − ∂_ν σ_aμ."""
        d, _ = self.sigma_partials(x)
        return np.einsum("man->amn", d) - np.einsum("nam->amn", d)

    def structure_prediction(self, x: np.ndarray) -> np.ndarray:
        """Maurer-Cartan right-hand sides as 2-form components."""
        s = self.sigma(x)

        def wedge(a: int, b: int) -> np.ndarray:
            return np.outer(s[a], s[b]) - np.outer(s[b], s[a])

        rhs = np.zeros((3, 4, 4))
        if self.bianchi_class == "II":
            rhs[0] = wedge(1, 2)
        elif self.bianchi_class == "III":
            rhs[2] = wedge(2, 0)
        else:
            rhs[1] = wedge(0, 1)
            rhs[2] = wedge(0, 2)
        return rhs

    def maurer_cartan_residual(self, x: np.ndarray) -> float:
        return float(np.max(np.abs(self.exterior_derivative(x) - self.structure_prediction(x))))

    def coframe(self, x: np.ndarray) -> np.ndarray:
        """Rows θ^0 = dτ, θ^1..θ^3 = σ_1..σ_3."""
        theta = np.zeros((4, 4))
        theta[0, TIME_INDEX] = 1.0
        theta[1:] = self.sigma(x)
        return theta

    def coframe_partials(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        d, dd = self.sigma_partials(x)
        d_theta = np.zeros((4, 4, 4))
        dd_theta = np.zeros((4, 4, 4, 4))
        d_theta[:, 1:] = d
        dd_theta[:, :, 1:] = dd
        return d_theta, dd_theta


class CoefficientJet:
    """
    Compiled τ-jets [c, c′, c″] of four coefficient expressions.

    Args:
        expressions: four sympy expressions in TAU and the parameter symbols
        parameters: ordered parameter symbols
    """

    def __init__(self, expressions: Sequence[sp.Expr], parameters: Sequence[sp.Symbol]):
        expressions = [sp.sympify(e) for e in expressions]
        first = [sp.diff(e, TAU) for e in expressions]
        second = [sp.diff(e, TAU) for e in first]
        self.parameters = list(parameters)
        self._function = sp.lambdify([TAU] + self.parameters, [expressions, first, second], "numpy")

    def __call__(self, tau: float, values: Sequence[float]) -> np.ndarray:
        return np.array(self._function(np.float64(tau), *values), dtype=float).reshape(3, 4)


class DiagonalBianchiMetric(MetricField):
    """
    g = Σ_A c_A(τ) θ^A ⊗ θ^A on a Bianchi coframe.

    Args:
        frame (BianchiFrame): invariant one-forms
        coefficient_jet: τ -> (3, 4) array of values, first and second τ-derivatives
        interval (Interval): open validity interval of τ
        signature (int): +1 Euclidean, -1 Minkowskian
        name (str): family name
        params (Dict[str, float]): family parameters, kept for reports
        lam (float): Einstein constant
        exact (bool): whether the jet derivatives are exact
        orientation (int): tetrad orientation used for the self-dual split
        axis_leg (int): spatial leg aligned with the principal null directions
        domain_guard: extra τ predicate beyond the interval
    """

    def __init__(
        self,
        frame: BianchiFrame,
        coefficient_jet: Callable[[float], np.ndarray],
        interval: Interval,
        signature: int,
        name: str,
        params: Dict[str, float],
        lam: float,
        exact: bool = True,
        orientation: int = 1,
        axis_leg: int = 1,
        domain_guard: Optional[Callable[[float], bool]] = None,
        sample_window: Optional[Tuple[float, float]] = None,
        coefficient_values: Optional[Callable[[float], np.ndarray]] = None,
    ):
        self.frame = frame
        self.interval = interval
        self.params = dict(params)
        self.lam = lam
        self.exact_coefficients = exact
        self.orientation = orientation
        self.axis_leg = axis_leg
        self._coefficient_jet = coefficient_jet
        self._coefficient_values = coefficient_values
        self._domain_guard = domain_guard
        self._sample_window = sample_window

        def domain(x: np.ndarray) -> bool:
            tau = x[TIME_INDEX]
            if not interval.contains(tau):
                return False
            return True if domain_guard is None else bool(domain_guard(tau))

        super().__init__(
            components=self._components_at,
            signature=signature,
            jet=self._jet_at if exact else None,
            domain=domain,
            dimension=4,
            name=name,
        )

    @property
    def bianchi_class(self) -> str:
        return self.frame.bianchi_class

    @property
    def sample_window(self) -> Tuple[float, float]:
        return self._sample_window or self.interval.window()

    def coefficients(self, tau: float) -> np.ndarray:
        """Signed coefficients (c_τ, c_1, c_2, c_3) at τ."""
        if self._coefficient_values is not None:
            return np.asarray(self._coefficient_values(tau), dtype=float)
        return self._coefficient_jet(tau)[0]

    def coefficient_jet(self, tau: float) -> np.ndarray:
        return self._coefficient_jet(tau)

    def boundary_distance(self, x: np.ndarray) -> float:
        return self.interval.distance_to_boundary(float(x[TIME_INDEX]))

    def _components_at(self, x: np.ndarray) -> np.ndarray:
        c = self.coefficients(x[TIME_INDEX])
        theta = self.frame.coframe(x)
        return np.einsum("a,am,an->mn", c, theta, theta)

    def _jet_at(self, x: np.ndarray):
        jet = self._coefficient_jet(x[TIME_INDEX])
        c, c1, c2 = jet
        theta = self.frame.coframe(x)
        d_theta, dd_theta = self.frame.coframe_partials(x)

        dc = np.zeros((4, 4))
        dc[TIME_INDEX] = c1
        ddc = np.zeros((4, 4, 4))
        ddc[TIME_INDEX, TIME_INDEX] = c2

        def sym(t: np.ndarray) -> np.ndarray:
            return t + np.swapaxes(t, -1, -2)

        g = np.einsum("a,am,an->mn", c, theta, theta)
        dg = np.einsum("ka,am,an->kmn", dc, theta, theta) + sym(np.einsum("a,kam,an->kmn", c, d_theta, theta))
        ddg = (
            np.einsum("kla,am,an->klmn", ddc, theta, theta)
            + sym(np.einsum("ka,lam,an->klmn", dc, d_theta, theta))
            + sym(np.einsum("la,kam,an->klmn", dc, d_theta, theta))
            + sym(np.einsum("a,klam,an->klmn", c, dd_theta, theta))
            + sym(np.einsum("a,kam,lan->klmn", c, d_theta, d_theta))
        )
        return g, dg, ddg

    def tetrad(self, orientation: Optional[int] = None) -> Tetrad:
        """Orthonormal tetrad √|c_A| θ^A with η_A = sign(c_A), leg 0 along dτ."""
        def covectors(x: np.ndarray) -> np.ndarray:
            c = self.coefficients(x[TIME_INDEX])
            return np.sqrt(np.abs(c))[:, None] * self.frame.coframe(x)

        def eta_at(tau: float) -> np.ndarray:
            return np.sign(self.coefficients(tau))

        window = self.sample_window
        eta = eta_at(0.5 * (window[0] + window[1]))
        return Tetrad(covectors, eta, orientation if orientation is not None else self.orientation, time_leg=0)


def product_rule_check(metric: DiagonalBianchiMetric, x: np.ndarray) -> np.ndarray:
    """g reconstructed from the tetrad minus the component function."""
    tetrad = metric.tetrad()
    return tetrad.reconstruct(x) - metric.components(x)


def real_roots(coefficients: Sequence[float], tol: float = 1e-9) -> List[float]:
    roots = np.roots(np.asarray(coefficients, dtype=float))
    return sorted(float(r.real) for r in roots if abs(r.imag) <= tol * max(1.0, abs(r)))


def positivity_interval(
    positive: Callable[[float], bool],
    breakpoints: Sequence[float],
    anchor: Optional[float] = None,
) -> Interval:
    """
    Maximal open interval between consecutive breakpoints on which `positive` holds.

    Args:
        positive: predicate evaluated at interval midpoints
        breakpoints: sorted candidate boundaries (polynomial roots)
        anchor: preferred point; the interval containing it is returned when valid
    """
    edges = [-np.inf] + sorted(set(breakpoints)) + [np.inf]
    candidates = []
    for lower, upper in zip(edges[:-1], edges[1:]):
        if np.isinf(lower) and np.isinf(upper):
            trial = 0.0
        elif np.isinf(lower):
            trial = upper - 1.0
        elif np.isinf(upper):
            trial = lower + 1.0
        else:
            trial = 0.5 * (lower + upper)
        if positive(trial):
            candidates.append(Interval(lower, upper))
    if not candidates:
        raise ParameterDomainError("no interval where the metric coefficients have the required signs")
    if anchor is not None:
        for interval in candidates:
            if interval.contains(anchor):
                return interval
    # Prefer a bounded-below interval on the positive axis
    for interval in candidates:
        if interval.lower >= 0.0:
            return interval
    return candidates[-1]
