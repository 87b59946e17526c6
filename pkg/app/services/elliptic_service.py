"""
Elliptic Function Service

Jacobi elliptic functions, complete elliptic integrals and Jacobi theta
functions in the older H, H1, Theta, Theta1 notation, together with the
quartic change of variable that turns dρ/√P(ρ) into a multiple of dv.
All functions are pure and safe to call from several threads.
"""

import math
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from app.services import BianchiError

logger = logging.getLogger(__name__)

# Iteration limits
AGM_TOLERANCE = 1e-16
AGM_MAX_STEPS = 40
THETA_RELATIVE_CUTOFF = 1e-16
THETA_MAX_TERMS = 200
NEWTON_MAX_STEPS = 60
POLE_WINDOW = 1e-6

THETA_KINDS = ("H", "H1", "Theta", "Theta1")
BRANCHES = ("lambda_neg", "lambda_pos")


class EllipticDomainError(BianchiError):
    """Raised when a modulus or argument lies outside the supported domain."""
    pass


class PoleError(BianchiError):
    """Raised when an evaluation hits a zero of a theta function or ρ → ∞."""
    pass


class RootStructureError(BianchiError):
    """Raised when a quartic does not have two real roots and a complex pair."""
    pass


class PoleSample(NamedTuple):
    """Value close to a chart boundary, with a divergence flag."""
    value: float
    diverging: bool


@dataclass(frozen=True)
class EllipticContext:
    """Modulus, quarter-periods and nome shared by the theta evaluators."""
    k2: float
    K: float
    Kprime: float
    nome_q: float

    @classmethod
    def from_k2(cls, k2: float) -> "EllipticContext":
        _check_modulus(k2)
        K = complete_K(k2)
        if k2 == 0.0:
            return cls(k2=k2, K=K, Kprime=math.inf, nome_q=0.0)
        Kprime = complete_K(1.0 - k2)
        return cls(k2=k2, K=K, Kprime=Kprime, nome_q=math.exp(-math.pi * Kprime / K))


@dataclass(frozen=True)
class QuarticRoots:
    """Roots of P(ρ) = (ρ−a)(ρ−b)[(ρ−b1)² + a1²] with a > b and a1 > 0."""
    a: float
    b: float
    b1: float
    a1: float

    def polynomial(self) -> np.ndarray:
        """Monic coefficients, highest power first."""
        real_pair = np.poly([self.a, self.b])
        complex_pair = np.array([1.0, -2.0 * self.b1, self.b1 ** 2 + self.a1 ** 2])
        return np.polymul(real_pair, complex_pair)

    def evaluate(self, rho: float) -> float:
        return (rho - self.a) * (rho - self.b) * ((rho - self.b1) ** 2 + self.a1 ** 2)


@dataclass(frozen=True)
class ChangeOfVariable:
    """
    Map ρ ∈ [a, ∞) → v ∈ [0, v0) with dρ/√P(ρ) = (2/√(AB)) dv.

    Attributes:
        roots (QuarticRoots): roots of the quartic
        A (float): √((a−b1)² + a1²)
        B (float): √((b−b1)² + a1²)
        ctx (EllipticContext): context built on k² = ((A+B)² − (a−b)²)/(4AB)
        v0 (float): pole of ρ(v), sn v0 = √(2B/(A+B+a−b))
        xi (float): drift coefficient of the γ² closed form
    """
    roots: QuarticRoots
    A: float
    B: float
    ctx: EllipticContext
    v0: float
    xi: float

    @property
    def sqrt_AB(self) -> float:
        return math.sqrt(self.A * self.B)

    @property
    def sn_v0(self) -> float:
        r = self.roots
        return math.sqrt(2.0 * self.B / (self.A + self.B + r.a - r.b))


def _check_modulus(k2: float) -> None:
    if not (0.0 <= k2 < 1.0) or not math.isfinite(k2):
        raise EllipticDomainError(f"modulus k2={k2} outside [0, 1)")


def _agm_sequence(k2: float) -> Tuple[List[float], List[float]]:
    """Arithmetic-geometric mean ladder (a_n, c_n) started at (1, √(1−k²), k)."""
    a_values = [1.0]
    c_values = [math.sqrt(k2)]
    a, b = 1.0, math.sqrt(1.0 - k2)
    for _ in range(AGM_MAX_STEPS):
        if abs(c_values[-1]) <= AGM_TOLERANCE:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        a_values.append(a)
        c_values.append(c)
    return a_values, c_values


def complete_K(k2: float) -> float:
    """
    Complete elliptic integral of the first kind by the AGM.

    Args:
        k2 (float): modulus squared, 0 ≤ k² < 1

    Returns:
        float: K(k²)

    Raises:
        EllipticDomainError: if k² is outside [0, 1)
    """
    _check_modulus(k2)
    a_values, _ = _agm_sequence(k2)
    return math.pi / (2.0 * a_values[-1])


def jacobi_sncn_dn(v: float, k2: float) -> Tuple[float, float, float]:
    """
    Jacobi sn, cn, dn by descending Landen (AGM) iteration.

    Args:
        v (float): real argument
        k2 (float): modulus squared, 0 ≤ k² < 1

    Returns:
        Tuple[float, float, float]: (sn, cn, dn)

    Raises:
        EllipticDomainError: if k² is outside [0, 1) or v is not finite
    """
    _check_modulus(k2)
    if not math.isfinite(v):
        raise EllipticDomainError(f"argument v={v} is not finite")

    a_values, c_values = _agm_sequence(k2)
    steps = len(a_values) - 1
    if steps == 0:
        return math.sin(v), math.cos(v), 1.0

    phi = (2.0 ** steps) * a_values[-1] * v
    previous = phi
    for n in range(steps, 0, -1):
        previous = phi
        phi = 0.5 * (phi + math.asin(c_values[n] / a_values[n] * math.sin(phi)))

    sn, cn = math.sin(phi), math.cos(phi)
    dn = cn / math.cos(previous - phi)
    return sn, cn, dn


def _theta_with_derivative(kind: str, w: float, q: float) -> Tuple[float, float, float]:
    """
    q-series for θ1..θ4 at w.

    Returns:
        Tuple[float, float, float]: (value, d/dw value, sum of |terms|)
    """
    if kind in ("H", "H1"):
        value, slope, magnitude = 0.0, 0.0, 0.0
        leading = q ** 0.25
        sign = 1.0
        for n in range(THETA_MAX_TERMS):
            weight = 2.0 * q ** ((n + 0.5) ** 2)
            order = 2 * n + 1
            if kind == "H":
                term = sign * weight * math.sin(order * w)
                dterm = sign * weight * order * math.cos(order * w)
                sign = -sign
            else:
                term = weight * math.cos(order * w)
                dterm = -weight * order * math.sin(order * w)
            value += term
            slope += dterm
            magnitude += abs(term)
            if weight * order < THETA_RELATIVE_CUTOFF * max(abs(value), leading):
                break
        return value, slope, magnitude

    value, slope, magnitude = 1.0, 0.0, 1.0
    alternating = kind == "Theta"
    for n in range(1, THETA_MAX_TERMS):
        weight = 2.0 * q ** (n * n)
        if alternating and n % 2 == 1:
            weight = -weight
        order = 2 * n
        term = weight * math.cos(order * w)
        value += term
        slope += -weight * order * math.sin(order * w)
        magnitude += abs(term)
        if abs(weight) * order < THETA_RELATIVE_CUTOFF * abs(value):
            break
    return value, slope, magnitude


def _validate_kind(kind: str) -> None:
    if kind not in THETA_KINDS:
        raise EllipticDomainError(f"unknown theta kind '{kind}', expected one of {THETA_KINDS}")


def theta(kind: str, v: float, ctx: EllipticContext) -> float:
    """
    Jacobi theta function in the older notation.

    H(v)=θ1(w), H1(v)=θ2(w), Theta1(v)=θ3(w), Theta(v)=θ4(w), w=πv/2K.

    Args:
        kind (str): one of H, H1, Theta, Theta1
        v (float): real argument
        ctx (EllipticContext): modulus context

    Returns:
        float: the theta value
    """
    _validate_kind(kind)
    w = math.pi * v / (2.0 * ctx.K)
    value, _, _ = _theta_with_derivative(kind, w, ctx.nome_q)
    return value


def theta_logderivative(kind: str, v: float, ctx: EllipticContext) -> float:
    """
    d/dv log θ_kind(v) from the term-wise differentiated series.

    Raises:
        PoleError: if the theta function vanishes at v
    """
    _validate_kind(kind)
    w = math.pi * v / (2.0 * ctx.K)
    value, slope, magnitude = _theta_with_derivative(kind, w, ctx.nome_q)
    if magnitude == 0.0 or abs(value) <= 1e-14 * magnitude:
        raise PoleError(f"theta {kind} vanishes at v={v}")
    return (math.pi / (2.0 * ctx.K)) * slope / value


def _split_roots(coefficients: Sequence[float]) -> QuarticRoots:
    roots = np.roots(np.asarray(coefficients, dtype=float))
    if len(roots) != 4:
        raise RootStructureError(f"expected a quartic, got {len(roots)} roots")

    discriminant = 1.0 + 0.0j
    for i in range(4):
        for j in range(i + 1, 4):
            discriminant *= (roots[i] - roots[j]) ** 2
    scale = max(1.0, float(np.max(np.abs(roots)))) ** 12
    if discriminant.real >= -1e-12 * scale:
        raise RootStructureError(
            f"quartic needs two simple real roots and a complex pair (discriminant {discriminant.real:.3e})"
        )

    order = np.argsort(np.abs(roots.imag))
    real_pair = np.sort(roots[order[:2]].real)
    complex_root = roots[order[2]]
    return QuarticRoots(
        a=float(real_pair[1]),
        b=float(real_pair[0]),
        b1=float(complex_root.real),
        a1=float(abs(complex_root.imag)),
    )


def _invert_sn(target: float, ctx: EllipticContext) -> float:
    """Solve sn(v) = target on (0, K) by Newton with bisection fallback."""
    lower, upper = 0.0, ctx.K
    v = float(special.ellipkinc(math.asin(target), ctx.k2))
    if not (lower < v < upper):
        v = 0.5 * (lower + upper)

    for _ in range(NEWTON_MAX_STEPS):
        sn, cn, dn = jacobi_sncn_dn(v, ctx.k2)
        residual = sn - target
        if abs(residual) < 1e-15:
            break
        if residual > 0:
            upper = v
        else:
            lower = v
        slope = cn * dn
        step = residual / slope if slope > 0 else math.inf
        candidate = v - step
        if not (lower < candidate < upper):
            candidate = 0.5 * (lower + upper)
        if abs(candidate - v) < 1e-16 * max(1.0, v):
            v = candidate
            break
        v = candidate
    return v


def build_change_of_variable(coefficients: Sequence[float]) -> ChangeOfVariable:
    """
    Build the quartic change of variable ρ ↔ v.

    Args:
        coefficients (Sequence[float]): monic quartic coefficients, highest power first

    Returns:
        ChangeOfVariable: roots, A, B, elliptic context, v0 and ξ

    Raises:
        RootStructureError: unless P has two simple real roots and a complex pair
    """
    if len(coefficients) != 5 or abs(coefficients[0] - 1.0) > 1e-14:
        raise RootStructureError("expected five coefficients of a monic quartic")

    roots = _split_roots(coefficients)
    A = math.hypot(roots.a - roots.b1, roots.a1)
    B = math.hypot(roots.b - roots.b1, roots.a1)
    k2 = ((A + B) ** 2 - (roots.a - roots.b) ** 2) / (4.0 * A * B)
    ctx = EllipticContext.from_k2(k2)

    sn_v0 = math.sqrt(2.0 * B / (A + B + roots.a - roots.b))
    v0 = _invert_sn(sn_v0, ctx)
    xi = 2.0 * (
        -roots.b / math.sqrt(A * B)
        + theta_logderivative("Theta", v0, ctx)
        + theta_logderivative("H1", v0, ctx)
    )
    logger.debug(f"Change of variable built: k2={k2:.12f}, v0={v0:.12f}, xi={xi:.12f}")
    return ChangeOfVariable(roots=roots, A=A, B=B, ctx=ctx, v0=v0, xi=xi)


def type5_quartic(lam: float, c: float = 1.0, epsilon: int = -1) -> List[float]:
    """Coefficients of P(ρ) = ρ(ρ³ − 3ερ − ελ|c|)."""
    return [1.0, 0.0, -3.0 * epsilon, -epsilon * lam * abs(c), 0.0]


def _check_open_interval(v: float, cov: ChangeOfVariable) -> None:
    if v < 0.0 or not math.isfinite(v):
        raise EllipticDomainError(f"v={v} outside [0, v0)")
    if v >= cov.v0:
        raise PoleError(f"v={v} reached the pole v0={cov.v0}")


def _is_diverging(v: float, cov: ChangeOfVariable) -> bool:
    return (cov.v0 - v) < POLE_WINDOW * cov.v0


def rho_of_v(v: float, cov: ChangeOfVariable) -> PoleSample:
    """
    Inverse change of variable ρ(v) = (aBc² − bAs²d²)/(Bc² − As²d²).

    Args:
        v (float): 0 ≤ v < v0
        cov (ChangeOfVariable): the change of variable

    Returns:
        PoleSample: ρ(v) and whether v is inside the divergence window of v0

    Raises:
        PoleError: if v ≥ v0
    """
    _check_open_interval(v, cov)
    sn, cn, dn = jacobi_sncn_dn(v, cov.ctx.k2)
    r = cov.roots
    numerator = r.a * cov.B * cn ** 2 - r.b * cov.A * sn ** 2 * dn ** 2
    denominator = cov.B * cn ** 2 - cov.A * sn ** 2 * dn ** 2
    if denominator <= 0.0:
        raise PoleError(f"ρ(v) diverges at v={v}")
    return PoleSample(numerator / denominator, _is_diverging(v, cov))


def sn_squared_of_rho(rho: float, cov: ChangeOfVariable) -> float:
    """Forward map sn²v = 2B(ρ−a)/D₊."""
    r = cov.roots
    radius = math.hypot(rho - r.b1, r.a1)
    d_plus = cov.A * (rho - r.b) + cov.B * (rho - r.a) + (r.a - r.b) * radius
    return 2.0 * cov.B * (rho - r.a) / d_plus


def resolve_branch(cov: ChangeOfVariable, branch: Optional[str] = None) -> str:
    """Pick or validate the ξ branch: lambda_neg when b = 0, lambda_pos when b < 0."""
    b_vanishes = abs(cov.roots.b) <= 1e-12 * max(1.0, abs(cov.roots.a))
    inferred = "lambda_neg" if b_vanishes else "lambda_pos"
    if branch is None:
        return inferred
    if branch not in BRANCHES:
        raise EllipticDomainError(f"unknown branch '{branch}', expected one of {BRANCHES}")
    if branch == "lambda_neg" and not b_vanishes:
        raise EllipticDomainError(f"branch lambda_neg needs b = 0, got b={cov.roots.b}")
    return branch


def branch_xi(cov: ChangeOfVariable, branch: Optional[str] = None) -> float:
    branch = resolve_branch(cov, branch)
    xi = 2.0 * (theta_logderivative("Theta", cov.v0, cov.ctx) + theta_logderivative("H1", cov.v0, cov.ctx))
    if branch == "lambda_pos":
        xi += 2.0 * abs(cov.roots.b) / cov.sqrt_AB
    return xi


def gamma_squared_of_v(v: float, cov: ChangeOfVariable, branch: Optional[str] = None) -> PoleSample:
    """
    γ² = (e^{−ξv} H(v0+v)Θ1(v0+v) / (H(v0−v)Θ1(v0−v)))^{√3}.

    Args:
        v (float): 0 ≤ v < v0
        cov (ChangeOfVariable): the change of variable
        branch (Optional[str]): lambda_neg or lambda_pos, inferred from b when omitted

    Returns:
        PoleSample: γ²(v) and the divergence flag

    Raises:
        PoleError: at v = v0
    """
    _check_open_interval(v, cov)
    xi = branch_xi(cov, branch)
    ctx = cov.ctx
    log_ratio = (
        math.log(abs(theta("H", cov.v0 + v, ctx)))
        + math.log(abs(theta("Theta1", cov.v0 + v, ctx)))
        - math.log(abs(theta("H", cov.v0 - v, ctx)))
        - math.log(abs(theta("Theta1", cov.v0 - v, ctx)))
    )
    return PoleSample(math.exp(math.sqrt(3.0) * (log_ratio - xi * v)), _is_diverging(v, cov))


def gamma_log_derivative(v: float, cov: ChangeOfVariable, branch: Optional[str] = None) -> float:
    """d log γ²/dv from theta log-derivatives."""
    _check_open_interval(v, cov)
    xi = branch_xi(cov, branch)
    ctx = cov.ctx
    total = 0.0
    for argument in (cov.v0 + v, cov.v0 - v):
        total += theta_logderivative("H", argument, ctx) + theta_logderivative("Theta1", argument, ctx)
    return math.sqrt(3.0) * (total - xi)


def rho_jet(v: float, cov: ChangeOfVariable, P: Callable[[float], float], dP: Callable[[float], float]) -> np.ndarray:
    """[ρ, ρ′, ρ″] from the closed form and ρ′ = (2/√(AB))√P(ρ)."""
    rho = rho_of_v(v, cov).value
    scale = 2.0 / cov.sqrt_AB
    first = scale * math.sqrt(max(P(rho), 0.0))
    second = 0.5 * scale ** 2 * dP(rho)
    return np.array([rho, first, second])


def jacobian_identity_residual(cov: ChangeOfVariable, v_grid: Sequence[float], step: float = 1e-5) -> float:
    """
    Worst relative mismatch of dρ/dv (Richardson central differences) against (2/√(AB))√P(ρ).
    """
    worst = 0.0
    for v in v_grid:
        def rho(x: float) -> float:
            return rho_of_v(x, cov).value

        coarse = (rho(v + step) - rho(v - step)) / (2.0 * step)
        fine = (rho(v + step / 2) - rho(v - step / 2)) / step
        derivative = (4.0 * fine - coarse) / 3.0
        expected = 2.0 / cov.sqrt_AB * math.sqrt(cov.roots.evaluate(rho(v)))
        worst = max(worst, abs(derivative - expected) / abs(expected))
    return worst


def selftest(cov: ChangeOfVariable, samples: int = 16) -> Dict[str, float]:
    """
    Identity residuals of the elliptic layer on a v-grid inside (0, v0).

    Returns:
        Dict[str, float]: Jacobi identities, sn v0 against its closed form, γ²(0) − 1,
            ρ(0) − a and the dρ/√P = (2/√(AB)) dv identity
    """
    k2 = cov.ctx.k2
    grid = np.linspace(0.05, 0.9, samples) * cov.v0
    identities = 0.0
    for v in grid:
        sn, cn, dn = jacobi_sncn_dn(float(v), k2)
        identities = max(identities, abs(sn ** 2 + cn ** 2 - 1.0), abs(dn ** 2 + k2 * sn ** 2 - 1.0))
    return {
        "jacobi_identities": identities,
        "sn_v0": abs(jacobi_sncn_dn(cov.v0, k2)[0] - cov.sn_v0),
        "gamma_at_origin": abs(gamma_squared_of_v(0.0, cov).value - 1.0),
        "rho_at_origin": abs(rho_of_v(0.0, cov).value - cov.roots.a),
        "jacobian_identity": jacobian_identity_residual(cov, [float(v) for v in grid]),
    }
