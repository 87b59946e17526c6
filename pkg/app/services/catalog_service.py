"""
Catalog Service

Constructors for the diagonal Einstein metrics of Bianchi types II, III and V,
with their positivity intervals, tetrad orientation and closed-form Weyl
data. Also hosts the first-integral (ODE) residuals used to cross-check the
coefficient functions, the type II rescaling check and the Kähler checks.
"""

import math
import logging
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import sympy as sp

from app.config.families import FAMILIES, UnknownFamilyError, family_entry
from app.services import elliptic_service as ellipticfn
from app.services.frames_service import (
    TAU,
    TIME_INDEX,
    BianchiFrame,
    CoefficientJet,
    DiagonalBianchiMetric,
    Interval,
    ParameterDomainError,
    positivity_interval,
    real_roots,
)
from app.services.geometry_service import (
    MetricField,
    SymbolicMetric,
    christoffel,
    inverse_metric,
    riemann_ricci,
)

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
PRODUCT_FORMS = {1: "cos", 0: "inverse_square", -1: "sinh"}

# Parameter symbols
EPS, M, L, LAM, GAMMA0, B, C = sp.symbols("epsilon m l lam gamma0 b c", real=True)


def _sign(value: float, name: str) -> int:
    if value not in (1, -1, 1.0, -1.0):
        raise ParameterDomainError(f"{name} must be +1 or -1, got {value}")
    return int(value)


def _positive(value: float, name: str) -> float:
    if not value > 0.0:
        raise ParameterDomainError(f"{name} must be positive, got {value}")
    return float(value)


# ---------------------------------------------------------------------------
# Coefficient jets, compiled once per family
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _bianchi2_jet() -> CoefficientJet:
    t = TAU
    c = t ** 2 - EPS * L ** 2
    u = M * t + LAM * (EPS * L ** 4 + 2 * L ** 2 * t ** 2 - EPS * t ** 4 / 3)
    return CoefficientJet([EPS * c / u, 4 * L ** 2 * u / c, c, c], [EPS, M, L, LAM])


@lru_cache(maxsize=None)
def _bianchi2_euclid_neg_jet() -> CoefficientJet:
    t = TAU
    c = L ** 2 - t ** 2
    u = M * t - LAM * (L ** 4 + 2 * L ** 2 * t ** 2 - t ** 4 / 3)
    return CoefficientJet([c / u, 4 * L ** 2 * u / c, c, c], [M, L, LAM])


@lru_cache(maxsize=None)
def _bianchi2_selfdual_jet() -> CoefficientJet:
    t = TAU
    k = 3 / (2 * sp.Abs(LAM))
    return CoefficientJet(
        [
            k * t / ((t + B) * (t + 2 * B) ** 2),
            k * (t + B) / (t * (t + 2 * B) ** 2),
            k * t / (t + 2 * B) ** 2,
            k * t / (t + 2 * B) ** 2,
        ],
        [B, LAM],
    )


@lru_cache(maxsize=None)
def _bianchi2_kahler_jet() -> CoefficientJet:
    t = TAU
    delta = L / t - 2 * LAM * t ** 2 / 3
    return CoefficientJet([1 / delta, delta, t, t], [L, LAM])


@lru_cache(maxsize=None)
def _bianchi3_jet() -> CoefficientJet:
    s = TAU
    f = -EPS + GAMMA0 / s - EPS * LAM * s ** 2 / 3
    return CoefficientJet([EPS / f, s ** 2, f, s ** 2], [EPS, GAMMA0, LAM])


@lru_cache(maxsize=None)
def _bianchi3_product_jet() -> CoefficientJet:
    t = TAU
    gamma2 = GAMMA0 + EPS * t ** 2
    scale = 1 / sp.Abs(LAM)
    return CoefficientJet([scale * EPS / gamma2, scale, scale * gamma2, scale], [EPS, GAMMA0, LAM])


@lru_cache(maxsize=None)
def _bianchi3_product_tau_jet(form: str) -> CoefficientJet:
    t = TAU
    h = {"cos": 1 / sp.cos(t) ** 2, "inverse_square": 1 / t ** 2, "sinh": 1 / sp.sinh(t) ** 2}[form]
    scale = 1 / sp.Abs(LAM)
    return CoefficientJet([scale * h, scale, scale * h, scale], [LAM])


@lru_cache(maxsize=None)
def _bianchi5_special_jet() -> CoefficientJet:
    s = TAU
    return CoefficientJet([-1 / (1 + LAM * s ** 2 / 3), s ** 2, s ** 2, s ** 2], [LAM])


@lru_cache(maxsize=None)
def _bianchi5_euclid_jet(branch: str) -> CoefficientJet:
    s = TAU
    root3 = sp.sqrt(3)
    if branch == "negative_inner":
        prefactor = (3 - s ** 2) / (sp.Abs(LAM) * s ** 2)
        gamma2 = (1 + s) / (1 - s) * ((root3 - s) / (root3 + s)) ** root3
        leg = prefactor / (1 - s ** 2) ** 2
    elif branch == "negative_outer":
        prefactor = (3 - s ** 2) / (sp.Abs(LAM) * s ** 2)
        gamma2 = (1 + s) / (s - 1) * ((root3 - s) / (root3 + s)) ** root3
        leg = prefactor / (1 - s ** 2) ** 2
    else:
        prefactor = (1 - s ** 2) / LAM
        gamma2 = (root3 - s) / (root3 + s) * ((1 + s) / (1 - s)) ** root3
        leg = 3 * prefactor / (3 - s ** 2) ** 2
    return CoefficientJet([leg, prefactor, prefactor * gamma2, prefactor / gamma2], [LAM])


@lru_cache(maxsize=None)
def _flat_jet(bianchi_class: str) -> CoefficientJet:
    t = TAU
    if bianchi_class == "III":
        return CoefficientJet([-1 + 0 * t, t ** 2, 1 + 0 * t, t ** 2], [])
    return CoefficientJet([-1 + 0 * t, t ** 2, t ** 2, t ** 2], [])


def _bind(jet: CoefficientJet, values) -> Callable[[float], np.ndarray]:
    values = tuple(float(v) for v in values)

    def evaluate(tau: float) -> np.ndarray:
        return jet(tau, values)

    return evaluate


def _positive_coefficients(evaluate: Callable[[float], np.ndarray], signs: Tuple[int, int, int, int]) -> Callable[[float], bool]:
    def predicate(tau: float) -> bool:
        try:
            with np.errstate(all="ignore"):
                c = evaluate(tau)[0]
        except (ZeroDivisionError, ValueError):
            return False
        return bool(np.all(np.isfinite(c)) and np.all(np.sign(c) == np.asarray(signs)))

    return predicate


# ---------------------------------------------------------------------------
# Bianchi II
# ---------------------------------------------------------------------------

def bianchi2_metric(params: Dict[str, float]) -> DiagonalBianchiMetric:
    """
    Unified type II metric with c = t² − εl², u = mt + λ(εl⁴ + 2l²t² − εt⁴/3).

    g = ε(c/u) dt² + 4l²(u/c) σ1² + c(σ2² + σ3²)

    Args:
        params (Dict[str, float]): epsilon, m, l, lambda and optional anchor t0

    Returns:
        DiagonalBianchiMetric: metric on the maximal interval where c > 0 and u > 0

    Raises:
        ParameterDomainError: when no such interval exists
    """
    eps = _sign(params["epsilon"], "epsilon")
    m, l, lam = float(params["m"]), _positive(params["l"], "l"), float(params["lambda"])
    evaluate = _bind(_bianchi2_jet(), (eps, m, l, lam))

    u_poly = [-eps * lam / 3.0, 0.0, 2.0 * lam * l ** 2, m, eps * lam * l ** 4]
    c_poly = [1.0, 0.0, -eps * l ** 2]
    if all(abs(a) == 0.0 for a in u_poly):
        raise ParameterDomainError("u(t) vanishes identically for m = λ = 0")
    breakpoints = real_roots(u_poly) + real_roots(c_poly)
    signs = (eps, 1, 1, 1)
    interval = positivity_interval(_positive_coefficients(evaluate, signs), breakpoints, params.get("t0"))

    # Reported W+ carries the (t − l)⁻³ block
    orientation = -1 if eps == 1 else 1
    logger.info(f"✅ bianchi2 built on t ∈ ({interval.lower:.6g}, {interval.upper:.6g})")
    return DiagonalBianchiMetric(
        BianchiFrame("II"), evaluate, interval, signature=eps, name="bianchi2",
        params={"epsilon": eps, "m": m, "l": l, "lambda": lam}, lam=lam, orientation=orientation,
    )


def bianchi2_euclid_neg_metric(params: Dict[str, float]) -> DiagonalBianchiMetric:
    """Euclidean E < 0 mirror: c = l² − t², u = mt − λ(l⁴ + 2l²t² − t⁴/3)."""
    m, l, lam = float(params["m"]), _positive(params["l"], "l"), float(params["lambda"])
    evaluate = _bind(_bianchi2_euclid_neg_jet(), (m, l, lam))
    u_poly = [lam / 3.0, 0.0, -2.0 * lam * l ** 2, m, -lam * l ** 4]
    breakpoints = real_roots(u_poly) + [-l, l]
    interval = positivity_interval(_positive_coefficients(evaluate, (1, 1, 1, 1)), breakpoints, params.get("t0"))
    return DiagonalBianchiMetric(
        BianchiFrame("II"), evaluate, interval, signature=1, name="bianchi2_euclid_neg",
        params={"m": m, "l": l, "lambda": lam}, lam=lam, orientation=-1,
    )


def bianchi2_selfdual_metric(params: Dict[str, float]) -> DiagonalBianchiMetric:
    """
    Self-dual type II metric in the t-gauge where W+ = 0:

    g = 3/(2|λ|(t+2b)²) [ (t+b)/t σ1² + t/(t+b) dt² + t(σ2² + σ3²) ],  b < 0, λ < 0, t > −2b
    """
    b, lam = float(params["b"]), float(params["lambda"])
    if lam >= 0.0 or b >= 0.0:
        raise ParameterDomainError(f"self-dual type II needs λ < 0 and b < 0, got λ={lam}, b={b}")
    evaluate = _bind(_bianchi2_selfdual_jet(), (b, lam))
    interval = Interval(-2.0 * b, math.inf)
    l = math.sqrt(3.0 / (16.0 * abs(lam) * abs(b)))
    return DiagonalBianchiMetric(
        BianchiFrame("II"), evaluate, interval, signature=1, name="bianchi2_selfdual",
        params={"b": b, "lambda": lam, "l": l}, lam=lam, orientation=1,
    )


def bianchi2_kahler_metric(params: Dict[str, float]) -> DiagonalBianchiMetric:
    """
    Kähler-Einstein type II metric Δσ1² + dt²/Δ + t(σ2² + σ3²), Δ = l/t − (2λ/3)t².

    Raises:
        ParameterDomainError: if Δ ≤ 0 everywhere on t > 0
    """
    l, lam = float(params["l"]), float(params["lambda"])
    evaluate = _bind(_bianchi2_kahler_jet(), (l, lam))
    breakpoints = [0.0] + real_roots([-2.0 * lam / 3.0, 0.0, 0.0, l])
    interval = positivity_interval(_positive_coefficients(evaluate, (1, 1, 1, 1)), breakpoints, params.get("t0"))
    if interval.lower < 0.0:
        raise ParameterDomainError("Kähler type II metric needs t > 0")
    return DiagonalBianchiMetric(
        BianchiFrame("II"), evaluate, interval, signature=1, name="bianchi2_kahler",
        params={"l": l, "lambda": lam}, lam=lam,
    )


def kahler_form(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """J = dt∧σ1 + t σ2∧σ3 and its partials dJ[k, μ, ν]."""
    _, y, _, t = x
    J = np.zeros((4, 4))
    J[3, 0], J[3, 2], J[1, 2] = 1.0, y, t
    J = J - J.T
    dJ = np.zeros((4, 4, 4))
    dJ[1, 3, 2], dJ[1, 2, 3] = 1.0, -1.0
    dJ[3, 1, 2], dJ[3, 2, 1] = 1.0, -1.0
    return J, dJ


def kahler_checks(metric: MetricField, x: np.ndarray) -> Dict[str, float]:
    """
    Residuals of dJ = 0, J² = −1, g(J·, J·) = g and ∇J = 0.

    Returns:
        Dict[str, float]: closure, almost_complex, compatibility, parallel
    """
    J, dJ = kahler_form(x)
    g = metric.components(x)
    g_inv = inverse_metric(g)
    mixed = g_inv @ J
    closure = dJ + np.einsum("kmn->mnk", dJ) + np.einsum("kmn->nkm", dJ)
    gamma = christoffel(metric, x)
    nabla = dJ - np.einsum("skm,sn->kmn", gamma, J) - np.einsum("skn,ms->kmn", gamma, J)
    return {
        "closure": float(np.max(np.abs(closure))),
        "almost_complex": float(np.max(np.abs(mixed @ mixed + np.eye(4)))),
        "compatibility": float(np.max(np.abs(mixed.T @ g @ mixed - g))),
        "parallel": float(np.max(np.abs(nabla))),
    }


def bianchi2_weyl_closed_form(metric: DiagonalBianchiMetric, tau: float) -> Tuple[np.ndarray, np.ndarray]:
    """W± of the Euclidean E > 0 type II metric: multiples of diag(−2, 1, 1)."""
    m, l, lam = metric.params["m"], metric.params["l"], metric.params["lambda"]
    shape = np.diag([-2.0, 1.0, 1.0])
    plus = (3.0 * m + 8.0 * lam * l ** 3) / (6.0 * (tau - l) ** 3)
    minus = (3.0 * m - 8.0 * lam * l ** 3) / (6.0 * (tau + l) ** 3)
    return plus * shape, minus * shape


def rescaling_residual(params: Dict[str, float], x: np.ndarray) -> float:
    """
    Check that l is not essential for the Euclidean type II metric.

    (m, l, λ) with g/l⁴ and X = (x/l², y/l, z/l, t/l) equals (ml, 1, λl⁴).
    """
    l = _positive(params["l"], "l")
    original = bianchi2_metric({**params, "epsilon": 1, "t0": x[TIME_INDEX]})
    scaled_params = {"epsilon": 1, "m": params["m"] * l, "l": 1.0, "lambda": params["lambda"] * l ** 4,
                     "t0": x[TIME_INDEX] / l}
    scaled = bianchi2_metric(scaled_params)
    jacobian = np.diag([1.0 / l ** 2, 1.0 / l, 1.0 / l, 1.0 / l])
    mapped = jacobian @ np.asarray(x, dtype=float)
    pulled_back = jacobian.T @ scaled.components(mapped) @ jacobian
    return float(np.max(np.abs(original.components(x) / l ** 4 - pulled_back)))


# ---------------------------------------------------------------------------
# Bianchi III
# ---------------------------------------------------------------------------

def bianchi3_metric(params: Dict[str, float]) -> DiagonalBianchiMetric:
    """
    g = s²(σ1² + σ3²) + f σ2² + ε ds²/f with f = −ε + γ0/s − ελs²/3.

    Args:
        params (Dict[str, float]): epsilon, gamma0, lambda and optional anchor s0

    Raises:
        ParameterDomainError: if f has no positive stretch on s > 0
    """
    eps = _sign(params["epsilon"], "epsilon")
    gamma0, lam = float(params["gamma0"]), float(params["lambda"])
    evaluate = _bind(_bianchi3_jet(), (eps, gamma0, lam))
    # s·f = −ελs³/3 − εs + γ0
    breakpoints = [0.0] + real_roots([-eps * lam / 3.0, 0.0, -float(eps), gamma0], tol=1e-6)
    interval = positivity_interval(_positive_coefficients(evaluate, (eps, 1, 1, 1)), breakpoints, params.get("s0"))
    if interval.lower < 0.0:
        raise ParameterDomainError("type III metric needs s > 0")
    return DiagonalBianchiMetric(
        BianchiFrame("III"), evaluate, interval, signature=eps, name="bianchi3",
        params={"epsilon": eps, "gamma0": gamma0, "lambda": lam}, lam=lam, axis_leg=2,
    )


def bianchi3_complete_metric(params: Dict[str, float]) -> DiagonalBianchiMetric:
    """Double-root Euclidean type III metric: ε = 1, γ0 = −2/(3√|λ|), s > 2/√|λ|."""
    lam = float(params["lambda"])
    if lam >= 0.0:
        raise ParameterDomainError(f"complete type III metric needs λ < 0, got {lam}")
    gamma0 = -2.0 / (3.0 * math.sqrt(abs(lam)))
    metric = bianchi3_metric({"epsilon": 1, "gamma0": gamma0, "lambda": lam})
    metric.name = "bianchi3_complete"
    return metric


def bianchi3_weyl_closed_form(metric: DiagonalBianchiMetric, tau: float) -> Tuple[np.ndarray, np.ndarray]:
    """W± = (γ0/2s³) diag(1, −2, 1)."""
    value = metric.params["gamma0"] / (2.0 * tau ** 3)
    block = value * np.diag([1.0, -2.0, 1.0])
    return block, block.copy()


def bianchi3_psi2_closed_form(metric: DiagonalBianchiMetric, tau: float) -> float:
    return -metric.params["gamma0"] / (2.0 * tau ** 3)


def bianchi3_product_metric(params: Dict[str, float]) -> DiagonalBianchiMetric:
    """
    (1/|λ|)[σ1² + σ3² + γ²σ2² + ε dt²/γ²] with γ² = γ0 + εt², λ < 0.
    """
    eps = _sign(params["epsilon"], "epsilon")
    gamma0, lam = float(params["gamma0"]), float(params["lambda"])
    if lam >= 0.0:
        raise ParameterDomainError(f"type III product metric needs λ < 0, got {lam}")
    evaluate = _bind(_bianchi3_product_jet(), (eps, gamma0, lam))
    breakpoints = real_roots([float(eps), 0.0, gamma0]) if gamma0 != 0.0 else [0.0]
    interval = positivity_interval(_positive_coefficients(evaluate, (eps, 1, 1, 1)), breakpoints, params.get("t0"))
    return DiagonalBianchiMetric(
        BianchiFrame("III"), evaluate, interval, signature=eps, name="bianchi3_product",
        params={"epsilon": eps, "gamma0": gamma0, "lambda": lam}, lam=lam, axis_leg=2,
    )


def bianchi3_product_tau_metric(params: Dict[str, float]) -> DiagonalBianchiMetric:
    """Euclidean product forms (1/|λ|)[σ1² + σ3² + h(τ)(σ2² + dτ²)], h ∈ {1/cos²τ, 1/τ², 1/sinh²τ}."""
    lam = float(params["lambda"])
    sign = int(params.get("gamma0_sign", 0))
    if lam >= 0.0:
        raise ParameterDomainError(f"type III product metric needs λ < 0, got {lam}")
    if sign not in PRODUCT_FORMS:
        raise ParameterDomainError(f"gamma0_sign must be one of {sorted(PRODUCT_FORMS)}, got {sign}")
    form = PRODUCT_FORMS[sign]
    evaluate = _bind(_bianchi3_product_tau_jet(form), (lam,))
    interval = Interval(-math.pi / 2.0, math.pi / 2.0) if form == "cos" else Interval(0.0, math.inf)
    return DiagonalBianchiMetric(
        BianchiFrame("III"), evaluate, interval, signature=1, name="bianchi3_product_tau",
        params={"gamma0_sign": sign, "lambda": lam}, lam=lam, axis_leg=2,
    )


def product_block_constants(metric: DiagonalBianchiMetric, tau: Optional[float] = None) -> Tuple[float, float]:
    """
    Einstein constants of the two 2d blocks of a type III product metric.

    Returns:
        Tuple[float, float]: (hyperbolic (x, z) block, (y, t) block)
    """
    lam = metric.lam
    x, z, y, t = sp.symbols("x z y t", real=True)
    scale = 1 / sp.Abs(sp.Float(lam))
    hyperbolic = SymbolicMetric([x, z], sp.diag(scale, scale * sp.exp(-2 * x)), name="H2")

    if metric.name == "bianchi3_product":
        eps, gamma0 = metric.params["epsilon"], metric.params["gamma0"]
        gamma2 = sp.Float(gamma0) + eps * t ** 2
        other = SymbolicMetric([y, t], sp.diag(scale * gamma2, scale * eps / gamma2), signature=eps, name="yt")
    else:
        h = {"cos": 1 / sp.cos(t) ** 2, "inverse_square": 1 / t ** 2, "sinh": 1 / sp.sinh(t) ** 2}[
            PRODUCT_FORMS[metric.params["gamma0_sign"]]
        ]
        other = SymbolicMetric([y, t], sp.diag(scale * h, scale * h), name="yt")

    if tau is None:
        window = metric.sample_window
        tau = 0.5 * (window[0] + window[1])
    first = riemann_ricci(hyperbolic, np.array([0.3, 0.2])).scalar / 2.0
    second = riemann_ricci(other, np.array([0.0, tau])).scalar / 2.0
    return first, second


# ---------------------------------------------------------------------------
# Bianchi V
# ---------------------------------------------------------------------------

def bianchi5_special_metric(params: Dict[str, float]) -> DiagonalBianchiMetric:
    """
    g = s²(σ1² + σ2² + σ3²) − ds²/(1 + λs²/3).

    Args:
        params (Dict[str, float]): lambda and euclidean (0 or 1); euclidean = 1 needs λ < 0
    """
    lam = float(params["lambda"])
    euclidean = bool(int(params.get("euclidean", 0)))
    evaluate = _bind(_bianchi5_special_jet(), (lam,))
    if euclidean:
        if lam >= 0.0:
            raise ParameterDomainError("Euclidean branch of the special type V metric needs λ < 0")
        interval = Interval(math.sqrt(3.0 / abs(lam)), math.inf)
        signature = 1
    else:
        interval = Interval(0.0, math.sqrt(3.0 / abs(lam)) if lam < 0.0 else math.inf)
        signature = -1
    return DiagonalBianchiMetric(
        BianchiFrame("V"), evaluate, interval, signature=signature, name="bianchi5_special",
        params={"lambda": lam, "euclidean": int(euclidean)}, lam=lam,
    )


def bianchi5_euclid_metric(params: Dict[str, float]) -> DiagonalBianchiMetric:
    """
    Elementary Euclidean type V metrics.

    λ < 0: (3−s²)/(|λ|s²) [σ1² + γ²σ2² + γ⁻²σ3² + ds²/(1−s²)²],
           γ² = ((1+s)/|1−s|)((√3−s)/(√3+s))^√3, s ∈ (−1, 1) (outer = 0) or (1, √3) (outer = 1)
    λ > 0: (1−s²)/λ [σ1² + γ²σ2² + γ⁻²σ3² + 3ds²/(3−s²)²],
           γ² = ((√3−s)/(√3+s))((1+s)/(1−s))^√3, s ∈ (−1, 1)
    """
    lam = float(params["lambda"])
    outer = bool(int(params.get("outer", 0)))
    if lam == 0.0:
        raise ParameterDomainError("λ = 0 is excluded")
    if lam < 0.0:
        branch = "negative_outer" if outer else "negative_inner"
        interval = Interval(1.0, SQRT3) if outer else Interval(-1.0, 1.0)
        window = (1.1, 1.6) if outer else (0.15, 0.85)
    else:
        if outer:
            raise ParameterDomainError("λ > 0 type V Euclidean metric only lives on s ∈ (−1, 1)")
        branch = "positive"
        interval = Interval(-1.0, 1.0)
        window = (0.1, 0.85)
    evaluate = _bind(_bianchi5_euclid_jet(branch), (lam,))

    def guard(s: float) -> bool:
        return abs(s) > 1e-8

    return DiagonalBianchiMetric(
        BianchiFrame("V"), evaluate, interval, signature=1, name="bianchi5_euclid",
        params={"lambda": lam, "outer": int(outer)}, lam=lam, domain_guard=guard, sample_window=window,
    )


def bianchi5_euclid_weyl_entries(lam: float, s: float) -> Dict[str, float]:
    """w11, w22, w33 and |w23| of the elementary Euclidean type V metrics."""
    if lam > 0.0:
        d = 1.0 - s ** 2
        return {
            "w11": 8.0 * lam / (3.0 * d ** 3),
            "w22": (2.0 * lam / 3.0) * (SQRT3 * s ** 3 - 3.0 * SQRT3 * s - 2.0) / d ** 3,
            "w33": -(2.0 * lam / 3.0) * (SQRT3 * s ** 3 - 3.0 * SQRT3 * s + 2.0) / d ** 3,
            "w23": 2.0 * lam / d ** 2,
        }
    d = 3.0 - s ** 2
    return {
        "w11": -8.0 * lam * s ** 6 / (3.0 * d ** 3),
        "w22": (2.0 * lam / 3.0) * s ** 3 * (2.0 * s ** 3 - 9.0 * s ** 2 + 9.0) / d ** 3,
        "w33": (2.0 * lam / 3.0) * s ** 3 * (2.0 * s ** 3 + 9.0 * s ** 2 - 9.0) / d ** 3,
        "w23": 2.0 * abs(lam) * s ** 4 / d ** 2,
    }


def bianchi5_minkowski_metric(params: Dict[str, float]) -> DiagonalBianchiMetric:
    """
    Elliptic type V metric in the v-gauge:

    g = (|c|/ρ)(σ1² + γ²σ2² + γ⁻²σ3² − (3/AB) dv²),  P(ρ) = ρ(ρ³ + 3ρ + λ|c|)

    Args:
        params (Dict[str, float]): theta (λ = 2 sinh θ, θ ≠ 0) or lambda; c (default 1);
            swap = 1 exchanges γ² and γ⁻²

    Raises:
        ParameterDomainError: for θ = 0
    """
    if "theta" in params:
        theta = float(params["theta"])
        lam = 2.0 * math.sinh(theta)
    else:
        lam = float(params["lambda"])
        theta = math.asinh(lam / 2.0)
    if theta == 0.0:
        raise ParameterDomainError("θ = 0 (λ = 0) is excluded")
    c = float(params.get("c", 1.0))
    if c == 0.0:
        raise ParameterDomainError("c = 0 gives no elliptic change of variable")
    k = abs(c)
    swap = bool(int(params.get("swap", 0)))

    cov = ellipticfn.build_change_of_variable(ellipticfn.type5_quartic(lam, c, epsilon=-1))
    quartic = np.poly1d(ellipticfn.type5_quartic(lam, c, epsilon=-1))
    dquartic = quartic.deriv()
    sqrt_ab = cov.sqrt_AB
    ab = cov.A * cov.B

    def values(v: float) -> np.ndarray:
        rho = ellipticfn.rho_of_v(v, cov).value
        gamma2 = ellipticfn.gamma_squared_of_v(v, cov).value
        if swap:
            gamma2 = 1.0 / gamma2
        return np.array([-3.0 * k / (ab * rho), k / rho, k * gamma2 / rho, k / (gamma2 * rho)])

    def jet(v: float) -> np.ndarray:
        rho, d_rho, dd_rho = ellipticfn.rho_jet(v, cov, quartic, dquartic)
        G = ellipticfn.gamma_squared_of_v(v, cov).value
        L1 = 2.0 * SQRT3 * rho / sqrt_ab
        dL1 = 2.0 * SQRT3 * d_rho / sqrt_ab
        if swap:
            G, L1, dL1 = 1.0 / G, -L1, -dL1
        q = np.array([1.0 / rho, -d_rho / rho ** 2, -dd_rho / rho ** 2 + 2.0 * d_rho ** 2 / rho ** 3])
        g_jet = np.array([G, G * L1, G * (L1 ** 2 + dL1)])
        h_jet = np.array([1.0 / G, -L1 / G, (L1 ** 2 - dL1) / G])

        def product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
            return np.array([a[0] * b[0], a[1] * b[0] + a[0] * b[1], a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2]])

        columns = [-3.0 * k / ab * q, k * q, k * product(g_jet, q), k * product(h_jet, q)]
        return np.stack(columns, axis=1)

    interval = Interval(0.0, cov.v0)
    logger.info(f"✅ bianchi5_minkowski: λ={lam:.6g}, k²={cov.ctx.k2:.6g}, v0={cov.v0:.6g}")
    metric = DiagonalBianchiMetric(
        BianchiFrame("V"), jet, interval, signature=-1, name="bianchi5_minkowski",
        params={"theta": theta, "lambda": lam, "c": c, "swap": int(swap)}, lam=lam,
        sample_window=(0.1 * cov.v0, 0.7 * cov.v0), coefficient_values=values,
    )
    metric.change_of_variable = cov
    return metric


def bianchi5_minkowski_psi2(metric: DiagonalBianchiMetric, tau: float) -> float:
    """|Ψ2| = c²μ³/3 with μ = ρ/|c|."""
    c = abs(metric.params["c"])
    rho = ellipticfn.rho_of_v(tau, metric.change_of_variable).value
    return c ** 2 * (rho / c) ** 3 / 3.0


def flat_metrics(bianchi_class: str) -> DiagonalBianchiMetric:
    """Flat metrics σ2² + t²(σ1² + σ3²) − dt² (III) and t²Σσ² − dt² (V), t > 0."""
    if bianchi_class not in ("III", "V"):
        raise ParameterDomainError(f"no flat catalog metric for class {bianchi_class}")
    evaluate = _bind(_flat_jet(bianchi_class), ())
    return DiagonalBianchiMetric(
        BianchiFrame(bianchi_class), evaluate, Interval(0.0, math.inf), signature=-1,
        name=f"flat_type{'3' if bianchi_class == 'III' else '5'}", params={}, lam=0.0,
        axis_leg=2 if bianchi_class == "III" else 1,
    )


# ---------------------------------------------------------------------------
# First integrals
# ---------------------------------------------------------------------------

def _coefficient_derivatives(metric: DiagonalBianchiMetric, tau: float) -> Tuple[np.ndarray, np.ndarray]:
    """Coefficients and their exact τ-derivatives from the family's jet."""
    jet = metric.coefficient_jet(tau)
    return jet[0], jet[1]


def type2_first_integral(gamma2: float, d_gamma2: float, epsilon: int, energy: float) -> float:
    """|γ̇² − ε/(4γ²) − E| with γ̇² = (γ²)′²/(4γ²)."""
    return abs(d_gamma2 ** 2 / (4.0 * gamma2) - epsilon / (4.0 * gamma2) - energy)


def type3_first_integral(s: float, f: float, d_f: float, epsilon: int, lam: float, c: float = 1.0) -> float:
    """|c(γ²)˙ + c²γ² + ε(1 + λβ²)| with d/dt = s d/ds for c = 1, β = s."""
    if c == 0.0:
        return abs(epsilon * (1.0 + lam * s ** 2))
    return abs(c * s * d_f + c ** 2 * f + epsilon * (1.0 + lam * s ** 2))


def type5_first_integral(beta2: float, d_beta2: float, dt: float, c: float, epsilon: int, lam: float) -> float:
    """|μ̇²/(4μ²) − c²/3 + εμ⁻²(1 + λ/(3μ))| with μ = 1/β² and dt the τ-derivative of t."""
    mu = 1.0 / beta2
    d_mu = -d_beta2 / beta2 ** 2
    mu_dot = d_mu / dt
    return abs(mu_dot ** 2 / (4.0 * mu ** 2) - c ** 2 / 3.0 + epsilon / mu ** 2 * (1.0 + lam / (3.0 * mu)))


def ode_residual(metric: DiagonalBianchiMetric, tau: float, overrides: Optional[Dict[str, float]] = None) -> float:
    """
    Residual of the family's first integral at τ.

    Args:
        metric (DiagonalBianchiMetric): catalog metric
        tau (float): time coordinate value
        overrides (Optional[Dict[str, float]]): replace E, lambda or c to test the residual's sensitivity

    Returns:
        float: absolute residual

    Raises:
        ParameterDomainError: for families without a first integral in their chart
    """
    overrides = overrides or {}
    values, derivatives = _coefficient_derivatives(metric, tau)
    params = metric.params
    lam = overrides.get("lambda", metric.lam)
    name = metric.name

    if name in ("bianchi2", "bianchi2_euclid_neg", "bianchi2_kahler"):
        if name == "bianchi2_kahler":
            gamma2, d_gamma2, epsilon, energy = values[2], derivatives[2], 1, 0.0
        else:
            l = params["l"]
            epsilon = params.get("epsilon", 1)
            energy = (1.0 if name == "bianchi2" else -1.0) / (2.0 * l)
            gamma2, d_gamma2 = values[2] / (2.0 * l), derivatives[2] / (2.0 * l)
        return type2_first_integral(gamma2, d_gamma2, epsilon, overrides.get("E", energy))

    if name in ("bianchi3", "bianchi3_complete"):
        return type3_first_integral(tau, values[2], derivatives[2], params["epsilon"], lam, overrides.get("c", 1.0))

    if name == "bianchi3_product":
        return type3_first_integral(math.sqrt(values[1]), values[2], derivatives[2], params["epsilon"], lam, c=0.0)

    if name in ("bianchi5_special", "bianchi5_euclid", "bianchi5_minkowski"):
        epsilon = metric.signature
        if name == "bianchi5_special":
            c = 0.0
        elif name == "bianchi5_euclid":
            c = 2.0 / abs(metric.lam)
        else:
            c = abs(params["c"])
        c = overrides.get("c", c)
        beta2, d_beta2 = values[1], derivatives[1]
        dt = math.sqrt(abs(values[0]) / beta2 ** 3)
        residual = type5_first_integral(beta2, d_beta2, dt, c, epsilon, lam)
        if name == "bianchi5_minkowski":
            # theta-function log-derivative, independent of the jet's ρ closed form
            d_log_gamma2 = ellipticfn.gamma_log_derivative(tau, metric.change_of_variable)
            residual = max(residual, abs(abs(d_log_gamma2) - 2.0 * c * dt))
        elif c != 0.0:
            d_log_gamma2 = derivatives[2] / values[2] - derivatives[1] / values[1]
            residual = max(residual, abs(abs(d_log_gamma2) - 2.0 * c * dt))
        return residual

    raise ParameterDomainError(f"family {name} has no first integral in its chart")


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

CONSTRUCTORS: Dict[str, Callable[[Dict[str, float]], DiagonalBianchiMetric]] = {
    "bianchi2": bianchi2_metric,
    "bianchi2_euclid_neg": bianchi2_euclid_neg_metric,
    "bianchi2_selfdual": bianchi2_selfdual_metric,
    "bianchi2_kahler": bianchi2_kahler_metric,
    "bianchi3": bianchi3_metric,
    "bianchi3_complete": bianchi3_complete_metric,
    "bianchi3_product": bianchi3_product_metric,
    "bianchi3_product_tau": bianchi3_product_tau_metric,
    "bianchi5_special": bianchi5_special_metric,
    "bianchi5_euclid": bianchi5_euclid_metric,
    "bianchi5_minkowski": bianchi5_minkowski_metric,
    "flat_type3": lambda params: flat_metrics("III"),
    "flat_type5": lambda params: flat_metrics("V"),
}


def build_metric(family: str, params: Optional[Dict[str, float]] = None) -> DiagonalBianchiMetric:
    """
    Construct a catalog metric after checking the parameter schema.

    Raises:
        UnknownFamilyError: for names missing from the registry
        ParameterDomainError: for missing or unexpected parameters
    """
    entry = family_entry(family)
    params = dict(params or {})
    missing = [name for name in entry["required"] if name not in params]
    if family == "bianchi5_minkowski" and "lambda" in params and "theta" in missing:
        missing.remove("theta")
    if missing:
        raise ParameterDomainError(f"family {family} is missing parameters {missing}")
    allowed = set(entry["required"]) | set(entry["optional"]) | set(entry.get("aliases", []))
    unexpected = sorted(set(params) - allowed)
    if unexpected:
        raise ParameterDomainError(f"family {family} does not take parameters {unexpected}")
    merged = {**entry["optional"], **params}
    return CONSTRUCTORS[family](merged)


__all__ = ["CONSTRUCTORS", "FAMILIES", "UnknownFamilyError", "build_metric"]
