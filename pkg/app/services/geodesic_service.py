"""
Geodesic Service

Hamiltonian geodesic flow 2H = g^{μν}Π_μΠ_ν on catalog metrics: adaptive
DOP853 integration with chart-boundary events, conserved-quantity drift
reports, finite-difference Poisson brackets, Hamilton-Jacobi separation
checks, the Killing-charge bilinear fit and CSV export.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from app.config.settings import settings
from app.services import BianchiError
from app.services.frames_service import TIME_INDEX, DiagonalBianchiMetric
from app.services.geometry_service import MetricField, SingularMetricError, inverse_metric, partials
from app.services.symmetry_service import family_killing_vectors

logger = logging.getLogger(__name__)

POISSON_STEP = 1e-5
BOUNDARY_MARGIN = 1e-6
STALL_DISTANCE = 1e-3
INTEGRABLE_CLASSES = ("II", "III")
# H, 𝒮 and two commuting linear charges per class
INVOLUTIVE_QUANTITIES = {"II": ("H", "S", "L1", "L4"), "III": ("H", "S", "L2", "L4")}
HJ_FAMILIES = ("bianchi2", "bianchi3", "bianchi3_complete")


class ForbiddenRegionError(BianchiError):
    """Raised when a Hamilton-Jacobi right-hand side is negative on the requested grid."""
    pass


class IntegrationError(BianchiError):
    """Raised when the integrator fails for reasons other than a chart boundary."""
    pass


@dataclass
class PhaseState:
    """Point of the cotangent bundle: chart point x and momenta Π_μ."""
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.p))):
            raise ValueError("phase state must be finite")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "PhaseState":
        return cls(vector[:4], vector[4:])


@dataclass
class IntegratorConfig:
    """Integrator tolerances and method."""
    rtol: float = field(default_factory=lambda: settings.rtol)
    atol: float = field(default_factory=lambda: settings.atol)
    method: str = "DOP853"
    max_step: float = np.inf
    boundary_margin: float = BOUNDARY_MARGIN

    def __post_init__(self):
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise ValueError("integrator tolerances must be positive")
        if self.boundary_margin <= 0.0:
            raise ValueError("boundary margin must be positive")


@dataclass
class QuantityDrift:
    initial: float
    max_drift: float
    drift_rate: float
    relative_drift: float


@dataclass
class ConservationReport:
    """Drift of every declared conserved quantity along a trajectory."""
    quantities: Dict[str, QuantityDrift]
    span: float

    def worst_relative_drift(self) -> float:
        return max((q.relative_drift for q in self.quantities.values()), default=0.0)

    def to_dict(self) -> Dict[str, Dict[str, float]]:
        return {
            name: {
                "initial": q.initial,
                "max_drift": q.max_drift,
                "drift_rate": q.drift_rate,
                "relative_drift": q.relative_drift,
            }
            for name, q in sorted(self.quantities.items())
        }


@dataclass
class Trajectory:
    """Integrated geodesic sampled at the integrator steps."""
    affine: np.ndarray
    states: np.ndarray
    truncated: bool
    exit_parameter: Optional[float]
    turning_parameters: List[float]
    report: ConservationReport
    samples: Dict[str, np.ndarray]

    @property
    def final_state(self) -> PhaseState:
        return PhaseState.from_vector(self.states[:, -1])


def hamiltonian(metric: MetricField, state: PhaseState) -> float:
    """
    H = ½ g^{μν} Π_μ Π_ν.

    Raises:
        SingularMetricError: if g is not invertible at state.x
    """
    g_inv = inverse_metric(metric.components(state.x))
    return 0.5 * float(state.p @ g_inv @ state.p)


def explicit_hamiltonian(metric: DiagonalBianchiMetric, state: PhaseState) -> float:
    """
    Chart expressions of H for the integrable families.

    type II: 2H = (1/4l²)(c/u)Πx² + ε(u/c)Πt² + (1/c)(Πy² + (Πz − yΠx)²)
    type III: 2H = Πy²/f + (Πx² + e^{2x}Πz²)/s² + ε f Πs²
    """
    x, p = state.x, state.p
    tau = x[TIME_INDEX]
    coefficients = metric.coefficients(tau)
    if metric.bianchi_class == "II" and metric.name == "bianchi2":
        l, eps = metric.params["l"], metric.params["epsilon"]
        c = coefficients[2]
        u_over_c = coefficients[1] / (4.0 * l ** 2)
        two_h = (p[0] ** 2 / (4.0 * l ** 2 * u_over_c) + eps * u_over_c * p[3] ** 2
                 + (p[1] ** 2 + (p[2] - x[1] * p[0]) ** 2) / c)
        return 0.5 * two_h
    if metric.name in ("bianchi3", "bianchi3_complete"):
        eps = metric.params["epsilon"]
        f = coefficients[2]
        two_h = p[1] ** 2 / f + (p[0] ** 2 + math.exp(2.0 * x[0]) * p[2] ** 2) / tau ** 2 + eps * f * p[3] ** 2
        return 0.5 * two_h
    raise ValueError(f"no explicit Hamiltonian for {metric.name}")


def _separation_constant(metric: DiagonalBianchiMetric, state: PhaseState) -> float:
    x, p = state.x, state.p
    if metric.bianchi_class == "II":
        return p[1] ** 2 + (p[2] - x[1] * p[0]) ** 2
    if metric.bianchi_class == "III":
        return p[0] ** 2 + math.exp(2.0 * x[0]) * p[2] ** 2
    raise ValueError(f"no quadratic separation constant for class {metric.bianchi_class}")


def conserved_quantities(metric: DiagonalBianchiMetric, state: PhaseState) -> Dict[str, float]:
    """
    H, the Killing charges L̃i = ξ_i·Π and, for types II and III, the quadratic 𝒮.

    Args:
        metric (DiagonalBianchiMetric): catalog metric (its class selects the charges)
        state (PhaseState): phase point

    Returns:
        Dict[str, float]: labelled values
    """
    values = {"H": hamiltonian(metric, state)}
    for vector in family_killing_vectors(metric):
        values[vector.name] = vector.charge(state.x, state.p)
    if metric.bianchi_class in INTEGRABLE_CLASSES:
        values["S"] = _separation_constant(metric, state)
    return values


def _inverse_and_derivative(metric: MetricField, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    d = partials(metric, x, order=1)
    g_inv = inverse_metric(d.metric)
    d_inv = -np.einsum("am,kmn,nb->kab", g_inv, d.first, g_inv)
    return g_inv, d_inv


def hamilton_equations(
    metric: MetricField, margin: float = BOUNDARY_MARGIN
) -> Callable[[float, np.ndarray], np.ndarray]:
    """
    dx^μ/dλ = g^{μν}Π_ν, dΠ_μ/dλ = −½ ∂_μ g^{αβ} Π_α Π_β.

    Stages outside the chart, within a tenth of the margin of its boundary, or where g is
    numerically singular return NaN so the integrator rejects the step and shrinks it.
    """
    def rhs(_: float, z: np.ndarray) -> np.ndarray:
        x, p = z[:4], z[4:]
        if not metric.in_domain(x):
            return np.full(8, np.nan)
        if isinstance(metric, DiagonalBianchiMetric) and metric.boundary_distance(x) < 0.1 * margin:
            return np.full(8, np.nan)
        try:
            g_inv, d_inv = _inverse_and_derivative(metric, x)
        except SingularMetricError:
            return np.full(8, np.nan)
        return np.concatenate([g_inv @ p, -0.5 * np.einsum("kab,a,b->k", d_inv, p, p)])

    return rhs


def _boundary_event(metric: MetricField, margin: float) -> Callable[[float, np.ndarray], float]:
    def event(_: float, z: np.ndarray) -> float:
        x = z[:4]
        if isinstance(metric, DiagonalBianchiMetric):
            return metric.boundary_distance(x) - margin
        return 1.0 if metric.in_domain(x) else -1.0

    event.terminal = True
    event.direction = -1
    return event


def _turning_event(_: float, z: np.ndarray) -> float:
    return z[4 + TIME_INDEX]


_turning_event.terminal = False
_turning_event.direction = 0


def _stalled_at_boundary(metric: MetricField, x: np.ndarray) -> bool:
    return isinstance(metric, DiagonalBianchiMetric) and metric.boundary_distance(x) < STALL_DISTANCE


def _drift_report(samples: Dict[str, np.ndarray], span: float) -> ConservationReport:
    quantities = {}
    for name, series in samples.items():
        initial = float(series[0])
        drift = float(np.max(np.abs(series - initial)))
        quantities[name] = QuantityDrift(
            initial=initial,
            max_drift=drift,
            drift_rate=drift / span if span > 0.0 else 0.0,
            relative_drift=drift / max(1.0, abs(initial)),
        )
    return ConservationReport(quantities=quantities, span=span)


def integrate(
    metric: MetricField,
    initial: PhaseState,
    span: Tuple[float, float],
    cfg: Optional[IntegratorConfig] = None,
    quantities: Optional[Callable[[PhaseState], Dict[str, float]]] = None,
) -> Trajectory:
    """
    Integrate Hamilton's equations.

    Args:
        metric (MetricField): metric with first partials
        initial (PhaseState): starting point, inside the domain
        span (Tuple[float, float]): affine parameter interval
        cfg (Optional[IntegratorConfig]): tolerances, defaults from settings
        quantities: phase-space functions to monitor, default conserved_quantities or H

    Returns:
        Trajectory: states, conservation report and truncation info

    Raises:
        DomainBoundaryError: if the initial point is outside the domain
        IntegrationError: on integrator failure
    """
    cfg = cfg or IntegratorConfig()
    metric.require_domain(initial.x)
    if quantities is None:
        if isinstance(metric, DiagonalBianchiMetric):
            def quantities(state):
                return conserved_quantities(metric, state)
        else:
            def quantities(state):
                return {"H": hamiltonian(metric, state)}

    logger.info(f"🚀 Integrating geodesic on {metric.name} over {span}")
    solution = solve_ivp(
        hamilton_equations(metric, cfg.boundary_margin),
        span,
        initial.as_vector(),
        method=cfg.method,
        rtol=cfg.rtol,
        atol=cfg.atol,
        max_step=cfg.max_step,
        events=[_boundary_event(metric, cfg.boundary_margin), _turning_event],
    )
    truncated = solution.status == 1
    exit_parameter = float(solution.t_events[0][0]) if truncated and len(solution.t_events[0]) else None
    if solution.status == -1:
        if not _stalled_at_boundary(metric, solution.y[:4, -1]):
            raise IntegrationError(f"integration failed: {solution.message}")
        # step size collapsed against the boundary before the event fired
        truncated = True
        exit_parameter = float(solution.t[-1])
    if truncated:
        logger.warning(f"⏰ Trajectory left the chart at λ={exit_parameter}")

    series: Dict[str, List[float]] = {}
    for column in range(solution.y.shape[1]):
        for name, value in quantities(PhaseState.from_vector(solution.y[:, column])).items():
            series.setdefault(name, []).append(value)
    samples = {name: np.asarray(values) for name, values in series.items()}
    report = _drift_report(samples, abs(solution.t[-1] - solution.t[0]))
    return Trajectory(
        affine=solution.t,
        states=solution.y,
        truncated=truncated,
        exit_parameter=exit_parameter,
        turning_parameters=[float(t) for t in solution.t_events[1]],
        report=report,
        samples=samples,
    )


def time_reversal_error(metric: MetricField, initial: PhaseState, length: float,
                        cfg: Optional[IntegratorConfig] = None) -> float:
    """Integrate forward, flip momenta, integrate back and compare with the start."""
    forward = integrate(metric, initial, (0.0, length), cfg, quantities=lambda s: {})
    end = forward.final_state
    backward = integrate(metric, PhaseState(end.x, -end.p), (0.0, forward.affine[-1]), cfg, quantities=lambda s: {})
    back = backward.final_state
    return float(max(np.max(np.abs(back.x - initial.x)), np.max(np.abs(-back.p - initial.p))))


def poisson_bracket(
    F: Callable[[PhaseState], float],
    G: Callable[[PhaseState], float],
    state: PhaseState,
    step: float = POISSON_STEP,
) -> float:
    """{F, G} = Σ ∂F/∂x ∂G/∂Π − ∂F/∂Π ∂G/∂x by central differences."""
    z = state.as_vector()

    def gradient(fn):
        grad = np.zeros(8)
        for i in range(8):
            h = step * max(1.0, abs(z[i]))
            plus, minus = z.copy(), z.copy()
            plus[i] += h
            minus[i] -= h
            grad[i] = (fn(PhaseState.from_vector(plus)) - fn(PhaseState.from_vector(minus))) / (2.0 * h)
        return grad

    dF, dG = gradient(F), gradient(G)
    return float(dF[:4] @ dG[4:] - dF[4:] @ dG[:4])


def quantity_function(metric: DiagonalBianchiMetric, name: str) -> Callable[[PhaseState], float]:
    def evaluate(state: PhaseState) -> float:
        return conserved_quantities(metric, state)[name]

    return evaluate


def involution_matrix(metric: DiagonalBianchiMetric, state: PhaseState, names: Sequence[str]) -> Dict[str, float]:
    """Pairwise FD Poisson brackets of the named quantities."""
    brackets = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            brackets[f"{a},{b}"] = poisson_bracket(quantity_function(metric, a), quantity_function(metric, b), state)
    return brackets


# ---------------------------------------------------------------------------
# Hamilton-Jacobi separation
# ---------------------------------------------------------------------------

def hj_rhs(metric: DiagonalBianchiMetric, energy: float, p: float, q: float, separation: float, tau: float) -> float:
    """
    Π_τ² from the separated Hamilton-Jacobi equation.

    type II: Π_t² = ε(c/u)[2E − (c/u)p²/(4l²) − 𝒮/c]
    type III: Π_s² = ε(2E/f − 𝒮/(s²f) − q²/f²)

    Here p is the momentum of the family's abelian direction (x for II, y for III).
    """
    coefficients = metric.coefficients(tau)
    eps = metric.params["epsilon"]
    if metric.name == "bianchi2":
        l = metric.params["l"]
        c = coefficients[2]
        c_over_u = 4.0 * l ** 2 / coefficients[1]
        return eps * c_over_u * (2.0 * energy - c_over_u * p ** 2 / (4.0 * l ** 2) - separation / c)
    if metric.name in ("bianchi3", "bianchi3_complete"):
        f = coefficients[2]
        return eps * (2.0 * energy / f - separation / (tau ** 2 * f) - q ** 2 / f ** 2)
    raise ValueError(f"no Hamilton-Jacobi separation for {metric.name}")


@dataclass
class SeparationResult:
    residual: float
    action_increment: float
    turning_points: List[float]
    points_checked: int


def turning_points(metric: DiagonalBianchiMetric, energy: float, p: float, q: float, separation: float,
                   grid: Sequence[float]) -> List[float]:
    """Zeros of the HJ right-hand side on a τ-grid, refined by brentq."""

    roots = []
    values = [hj_rhs(metric, energy, p, q, separation, t) for t in grid]
    for (a, fa), (b, fb) in zip(zip(grid[:-1], values[:-1]), zip(grid[1:], values[1:])):
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0.0:
            roots.append(float(brentq(lambda t: hj_rhs(metric, energy, p, q, separation, t), a, b, xtol=1e-14)))
    return roots


def hj_separation_check(
    metric: DiagonalBianchiMetric,
    energy: float,
    p: float,
    q: float,
    separation: float,
    grid: Sequence[float],
    trajectory: Optional[Trajectory] = None,
    tol: float = 1e-12,
) -> SeparationResult:
    """
    Compare the separated action derivative with integrated momenta.

    Args:
        metric (DiagonalBianchiMetric): bianchi2 or bianchi3 family metric
        energy, p, q, separation: E, abelian momenta and 𝒮
        grid (Sequence[float]): τ-grid that must lie in the allowed region
        trajectory (Optional[Trajectory]): integrated geodesic with the same constants

    Returns:
        SeparationResult: worst |Π_τ − dA/dτ| along the trajectory and ∫ dA over the grid.
            The mismatch is taken as |Π_τ² − (dA/dτ)²| / max(|Π_τ| + |dA/dτ|, 1), which is
            |Π_τ − dA/dτ| away from turning points and stays bounded at them.

    Raises:
        ForbiddenRegionError: if the right-hand side is negative somewhere on the grid
    """
    grid = list(grid)
    for tau in grid:
        value = hj_rhs(metric, energy, p, q, separation, tau)
        if value < -tol:
            raise ForbiddenRegionError(f"classically forbidden at τ={tau} (Π_τ² = {value:.3e})")

    action, _ = quad(
        lambda t: math.sqrt(max(hj_rhs(metric, energy, p, q, separation, t), 0.0)), grid[0], grid[-1], limit=200
    )

    residual = 0.0
    checked = 0
    if trajectory is not None:
        for column in range(trajectory.states.shape[1]):
            state = trajectory.states[:, column]
            tau, momentum = state[TIME_INDEX], state[4 + TIME_INDEX]
            rhs = hj_rhs(metric, energy, p, q, separation, tau)
            reconstructed = math.sqrt(max(rhs, 0.0))
            scale = max(abs(momentum) + reconstructed, 1.0)
            residual = max(residual, abs(momentum ** 2 - rhs) / scale)
            checked += 1
    return SeparationResult(
        residual=residual,
        action_increment=action,
        turning_points=turning_points(metric, energy, p, q, separation, grid),
        points_checked=checked,
    )


def separation_constants(metric: DiagonalBianchiMetric, state: PhaseState) -> Tuple[float, float, float, float]:
    """(E, p, q, 𝒮) of a phase state in the HJ parametrisation."""
    values = conserved_quantities(metric, state)
    if metric.bianchi_class == "II":
        return values["H"], state.p[0], 0.0, values["S"]
    return values["H"], 0.0, state.p[1], values["S"]


# ---------------------------------------------------------------------------
# Killing-charge bilinear fit
# ---------------------------------------------------------------------------

@dataclass
class BilinearFit:
    coefficients: Dict[str, float]
    residual: float
    samples: int


def charge_bilinear_fit(metric: DiagonalBianchiMetric, samples: int = 60, seed: int = 0) -> BilinearFit:
    """
    Least-squares fit of 𝒮 on the ten symmetric products of the Killing charges.

    Returns:
        BilinearFit: coefficients keyed "Li*Lj" and the relative max residual
    """
    rng = np.random.default_rng(seed)
    window = metric.sample_window
    vectors = family_killing_vectors(metric)
    names = [v.name for v in vectors]
    pairs = [(i, j) for i in range(len(vectors)) for j in range(i, len(vectors))]
    rows, targets = [], []
    for _ in range(samples):
        x = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(*window)])
        p = rng.normal(size=4)
        state = PhaseState(x, p)
        charges = [v.charge(x, p) for v in vectors]
        rows.append([charges[i] * charges[j] for i, j in pairs])
        targets.append(_separation_constant(metric, state))
    design, target = np.asarray(rows), np.asarray(targets)
    solution, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.max(np.abs(design @ solution - target)) / np.max(np.abs(target)))
    coefficients = {f"{names[i]}*{names[j]}": float(solution[k]) for k, (i, j) in enumerate(pairs)}
    logger.info(f"✅ Bilinear fit residual on {metric.name}: {residual:.3e}")
    return BilinearFit(coefficients=coefficients, residual=residual, samples=samples)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def export_csv(trajectory: Trajectory, path: str) -> None:
    """
    Write one row per step: λ, x^μ, Π_μ, then every monitored quantity.

    Raises:
        OSError: with the path in the message
    """
    names = sorted(trajectory.samples)
    header = ["affine", "x", "y", "z", "tau", "p_x", "p_y", "p_z", "p_tau"] + names
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for k, affine in enumerate(trajectory.affine):
                row = [repr(float(affine))] + [repr(float(v)) for v in trajectory.states[:, k]]
                row += [repr(float(trajectory.samples[name][k])) for name in names]
                writer.writerow(row)
    except OSError as e:
        raise OSError(f"could not write trajectory CSV to {path}: {e}")
    logger.info(f"✅ Trajectory written to {path}")
