"""
Verification Service

Runs the named checks of a RunConfig over a sampled grid and assembles a
deterministic Report. Grid points are evaluated concurrently in a thread
pool; every reduction is done in grid order so repeated runs with the same
seed serialize to identical bytes.
"""

import asyncio
import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from app.config.settings import TOOL_VERSION, settings
from app.models.request import COORDINATES, GridSpec, RunConfig
from app.models.response import CheckResult, PetrovLabel, Report
from app.services import BianchiError
from app.services import catalog_service as catalog
from app.services import elliptic_service as ellipticfn
from app.services import embedding_service as embedding
from app.services import geodesic_service as geodesic
from app.services import symmetry_service as symmetry
from app.services.frames_service import TIME_INDEX, DiagonalBianchiMetric
from app.services.geometry_service import (
    einstein_residual,
    np_weyl_scalars,
    null_tetrad_from_frame,
    petrov_classify,
    selfdual_decompose,
)

logger = logging.getLogger(__name__)

GEODESIC_SPAN = 10.0
MOMENTUM_SCALE = 0.5
DEFAULT_RANGE = (-1.0, 1.0)
PSI2_RELATIVE_FLOOR = 1e-8
GEODESIC_BOUNDARY_MARGIN = 1e-2
INTEGRABILITY_TOLERANCE = 1e-6
HJ_GRID_POINTS = 32
HJ_FORBIDDEN_SLACK = 1e-8


class GridDomainError(BianchiError):
    """Raised when a requested grid leaves the validity domain of the metric."""
    pass


class NotApplicableError(BianchiError):
    """Raised when a check has nothing to verify for a family or parameter choice."""
    pass


class ReportWriteError(BianchiError):
    """Raised when a report or sidecar cannot be written."""
    pass


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

def build_grid(metric: DiagonalBianchiMetric, grid: GridSpec) -> List[np.ndarray]:
    """
    Chart points for a grid specification.

    Args:
        metric (DiagonalBianchiMetric): metric whose window fills the default τ range
        grid (GridSpec): halton or regular specification

    Returns:
        List[np.ndarray]: points in (x, y, z, τ) order

    Raises:
        GridDomainError: if a point is outside the metric domain
    """
    ranges = []
    for name in COORDINATES:
        default = metric.sample_window if name == "tau" else DEFAULT_RANGE
        ranges.append(tuple(grid.ranges.get(name, default)))
    lower = np.array([r[0] for r in ranges])
    upper = np.array([r[1] for r in ranges])

    if grid.mode == "halton":
        sampler = qmc.Halton(d=len(COORDINATES), scramble=True, seed=grid.seed)
        unit = sampler.random(grid.count)
        points = [np.asarray(p) for p in qmc.scale(unit, lower, upper)]
    else:
        axes = []
        for k, name in enumerate(COORDINATES):
            count = grid.counts.get(name, 1)
            axes.append(np.linspace(lower[k], upper[k], count) if count > 1 else np.array([0.5 * (lower[k] + upper[k])]))
        points = [np.array(p) for p in product(*axes)]

    outside = [p.tolist() for p in points if not metric.in_domain(p)]
    if outside:
        raise GridDomainError(f"{len(outside)} grid points outside the domain of {metric.name}, first {outside[0]}")
    return points


# ---------------------------------------------------------------------------
# Per-point residuals
# ---------------------------------------------------------------------------

def lorentzian_psi(metric: DiagonalBianchiMetric, x: np.ndarray) -> np.ndarray:
    """Ψ0..Ψ4 on the null tetrad aligned with the metric's axis leg."""
    tetrad = metric.tetrad()
    spatial = [leg for leg in (1, 2, 3) if leg != metric.axis_leg]
    nulltetrad = null_tetrad_from_frame(tetrad, x, metric.axis_leg, spatial)
    return np_weyl_scalars(metric, nulltetrad, x)


def classify_point(metric: DiagonalBianchiMetric, x: np.ndarray) -> PetrovLabel:
    if metric.signature == 1:
        return petrov_classify(selfdual_decompose(metric, metric.tetrad(), x))
    return petrov_classify(lorentzian_psi(metric, x))


def _relative_block_error(computed: np.ndarray, expected: np.ndarray) -> float:
    """Relative error, absolute when the expected block is below one."""
    scale = max(float(np.max(np.abs(expected))), 1.0)
    return float(np.max(np.abs(computed - expected))) / scale


def weyl_closed_form(metric: DiagonalBianchiMetric, tau: float) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Closed-form (W+, W−) where the catalog has one."""
    if metric.name == "bianchi2" and metric.params["epsilon"] == 1:
        return catalog.bianchi2_weyl_closed_form(metric, tau)
    if metric.name in ("bianchi3", "bianchi3_complete") and metric.params["epsilon"] == 1:
        return catalog.bianchi3_weyl_closed_form(metric, tau)
    return None


def weyl_residual(metric: DiagonalBianchiMetric, x: np.ndarray) -> float:
    """
    Worst Weyl mismatch at x.

    Euclidean: traceless Ricci block B, tr A − λ, tr C − λ and the closed forms.
    Minkowskian: Ψ1, Ψ3 and the closed-form |Ψ2| where known.
    """
    tau = float(x[TIME_INDEX])
    if metric.signature == 1:
        bundle = selfdual_decompose(metric, metric.tetrad(), x)
        residual = max(
            float(np.max(np.abs(bundle.weylB))),
            abs(float(np.trace(bundle.weylA)) - metric.lam),
            abs(float(np.trace(bundle.weylC)) - metric.lam),
        )
        closed = weyl_closed_form(metric, tau)
        if closed is not None:
            residual = max(
                residual,
                _relative_block_error(bundle.weylPlus, closed[0]),
                _relative_block_error(bundle.weylMinus, closed[1]),
            )
        if metric.name == "bianchi5_euclid":
            entries = catalog.bianchi5_euclid_weyl_entries(metric.lam, tau)
            scale = max(abs(v) for v in entries.values())
            for block in (bundle.weylPlus, bundle.weylMinus):
                computed = {
                    "w11": block[0, 0],
                    "w22": block[1, 1],
                    "w33": block[2, 2],
                    "w23": abs(block[1, 2]),
                }
                residual = max(residual, max(abs(computed[k] - entries[k]) for k in entries) / scale)
        if metric.name == "bianchi2_kahler":
            residual = max(residual, max(catalog.kahler_checks(metric, x).values()))
        return residual

    psi = lorentzian_psi(metric, x)
    residual = max(abs(psi[1]), abs(psi[3]))
    expected = None
    if metric.name in ("bianchi3", "bianchi3_complete"):
        expected = abs(catalog.bianchi3_psi2_closed_form(metric, tau))
    elif metric.name == "bianchi5_minkowski":
        expected = catalog.bianchi5_minkowski_psi2(metric, tau)
    if expected is not None:
        residual = max(residual, abs(abs(psi[2]) - expected) / max(expected, PSI2_RELATIVE_FLOOR))
    return float(residual)


def expected_petrov(metric: DiagonalBianchiMetric) -> Optional[str]:
    """Label the catalog predicts for a family, None when it makes no claim."""
    name, params = metric.name, metric.params
    euclidean = metric.signature == 1

    def label(plus: str, minus: str) -> str:
        return f"({plus},{minus})" if euclidean else plus

    if name in ("bianchi5_special", "flat_type3", "flat_type5"):
        return label("O", "O")
    if name == "bianchi2":
        if not euclidean:
            return "D"
        m, l, lam = params["m"], params["l"], params["lambda"]
        plus = "O" if 3.0 * m + 8.0 * lam * l ** 3 == 0.0 else "D"
        minus = "O" if 3.0 * m - 8.0 * lam * l ** 3 == 0.0 else "D"
        return label(plus, minus)
    if name == "bianchi2_selfdual":
        return "(O,D)"
    if name in ("bianchi3", "bianchi3_complete"):
        if params["gamma0"] == 0.0:
            return label("O", "O")
        return label("D", "D")
    if name in ("bianchi3_product", "bianchi3_product_tau"):
        return label("D", "D")
    if name == "bianchi5_euclid":
        return "(I,I)"
    if name == "bianchi5_minkowski":
        return "I"
    return None


def killing_residual_at(metric: DiagonalBianchiMetric, vectors: Sequence[symmetry.VectorField], x: np.ndarray) -> float:
    worst = max(symmetry.killing_residual(v, metric, x) for v in vectors)
    return max(worst, symmetry.structure_constants_residual(metric.bianchi_class, x))


def _yano_fields(metric: DiagonalBianchiMetric) -> Tuple[Any, Any, Callable[[np.ndarray], np.ndarray]]:
    """(Y, S, x -> expected Y g⁻¹ Yᵀ) for the families carrying a Killing-Yano tensor."""
    if metric.name == "bianchi2":
        eps, l = metric.params["epsilon"], metric.params["l"]
        S = symmetry.type2_killing_staeckel(eps, l)

        def expected(x):
            return S.components(x) + eps * l ** 2 * metric.components(x)

        return symmetry.type2_killing_yano(eps, l), S, expected
    if metric.name in ("bianchi3", "bianchi3_complete"):
        S = symmetry.type3_killing_staeckel()
        return symmetry.type3_killing_yano(), S, S.components
    raise NotApplicableError(f"no Killing-Yano tensor declared for {metric.name}")


def ks_residual_at(metric: DiagonalBianchiMetric, Y: Any, S: Any, expected: Callable[[np.ndarray], np.ndarray],
                   x: np.ndarray) -> float:
    """Killing-Stäckel residual of S and the mismatch of Y g⁻¹ Yᵀ against its expected form."""
    square = symmetry.yano_square(Y, metric, x)
    return max(symmetry.ks_residual(S, metric, x), float(np.max(np.abs(square - expected(x)))))


def embedding_for(metric: DiagonalBianchiMetric) -> Tuple[embedding.EmbeddingMap, str]:
    """
    Embedding map verifying a family, with a short kind label.

    Raises:
        NotApplicableError: when the family or its parameters have no embedding
    """
    name, params = metric.name, metric.params
    if name == "flat_type3":
        return embedding.flattening_map("III"), "flattening"
    if name == "flat_type5":
        return embedding.flattening_map("V"), "flattening"
    if name == "bianchi3" and params["gamma0"] == 0.0:
        if params["epsilon"] == 1:
            source = "type3_euclid"
        else:
            source = "type3_lambda_pos" if metric.lam > 0.0 else "type3_lambda_neg"
        return embedding.desitter_map(source, metric.lam), source
    if name == "bianchi5_special":
        if params["euclidean"]:
            source = "type5_euclid"
        else:
            source = "type5_lambda_pos" if metric.lam > 0.0 else "type5_lambda_neg"
        return embedding.desitter_map(source, metric.lam), source
    if name == "bianchi3_product" and params["epsilon"] == -1 and params["gamma0"] == 1.0:
        split, _ = embedding.product_split_map(metric.lam)
        return split, "product_split"
    raise NotApplicableError(f"no embedding declared for {name} with {params}")


def embedding_residual_at(metric: DiagonalBianchiMetric, mapping: embedding.EmbeddingMap, x: np.ndarray) -> float:
    residual = max(mapping.constraint_residual(x), embedding.pullback_residual(mapping, metric, x))
    if mapping.name == "product_split":
        residual = max(residual, embedding.block_offdiagonal_residual(mapping, metric, x))
    return residual


def elliptic_residual(metric: DiagonalBianchiMetric) -> Dict[str, float]:
    cov = getattr(metric, "change_of_variable", None)
    if cov is None:
        raise NotApplicableError(f"{metric.name} has no elliptic change of variable")
    return ellipticfn.selftest(cov)


def initial_phase_state(metric: DiagonalBianchiMetric, point: np.ndarray, seed: int) -> geodesic.PhaseState:
    rng = np.random.default_rng(seed)
    return geodesic.PhaseState(point, MOMENTUM_SCALE * rng.normal(size=4))


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------

def _status(residual: float, tolerance: float) -> str:
    return "pass" if residual <= tolerance else "fail"


def _finite(value: float) -> float:
    return value if math.isfinite(value) else math.inf


class VerificationService:
    """Runs checks for one RunConfig and keeps the last geodesic trajectory for export."""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers or settings.max_workers
        self.last_trajectory: Optional[geodesic.Trajectory] = None

    async def _reduce(self, executor: ThreadPoolExecutor, fn: Callable[[np.ndarray], float],
                      points: Sequence[np.ndarray]) -> Tuple[float, List[float]]:
        """Evaluate fn on every point concurrently and return the worst value with its point."""
        loop = asyncio.get_event_loop()
        values = await asyncio.gather(*[loop.run_in_executor(executor, fn, p) for p in points])
        values = [_finite(float(v)) for v in values]
        worst = int(np.argmax(values))
        return values[worst], [float(c) for c in points[worst]]

    async def _grid_check(self, name: str, executor: ThreadPoolExecutor, fn: Callable[[np.ndarray], float],
                          points: Sequence[np.ndarray], tolerance: float, detail: Optional[Dict[str, Any]] = None) -> CheckResult:
        worst, where = await self._reduce(executor, fn, points)
        return CheckResult(
            name=name,
            status=_status(worst, tolerance),
            worst_residual=worst,
            worst_point=where,
            tolerance=tolerance,
            detail={"points": len(points), **(detail or {})},
        )

    async def _petrov(self, executor: ThreadPoolExecutor, metric: DiagonalBianchiMetric,
                      points: Sequence[np.ndarray], tolerance: float) -> CheckResult:
        loop = asyncio.get_event_loop()
        labels = await asyncio.gather(*[loop.run_in_executor(executor, classify_point, metric, p) for p in points])
        found = sorted({label.label for label in labels})
        expected = expected_petrov(metric)
        ambiguous = [i for i, label in enumerate(labels) if label.ambiguous]
        mismatch = [i for i, label in enumerate(labels) if expected is not None and label.label != expected]
        if len(found) > 1 or mismatch:
            status = "fail"
        elif ambiguous:
            status = "flagged"
        else:
            status = "pass"
        worst_index = (mismatch or ambiguous or [0])[0]
        return CheckResult(
            name="petrov",
            status=status,
            worst_residual=float(len(mismatch)),
            worst_point=[float(c) for c in points[worst_index]],
            tolerance=tolerance,
            detail={"labels": found, "expected": expected, "ambiguous_points": len(ambiguous), "points": len(points)},
        )

    @staticmethod
    def _involution(metric: DiagonalBianchiMetric, state: geodesic.PhaseState,
                    available: Dict[str, Any]) -> Dict[str, Any]:
        """Pairwise Poisson brackets of H, 𝒮 and the two commuting linear charges."""
        names = [q for q in geodesic.INVOLUTIVE_QUANTITIES[metric.bianchi_class] if q in available]
        brackets = geodesic.involution_matrix(metric, state, names)
        return {
            "involution": brackets,
            "involution_residual": max((abs(v) for v in brackets.values()), default=0.0),
            "integrability_tolerance": INTEGRABILITY_TOLERANCE,
        }

    @staticmethod
    def _separation(metric: DiagonalBianchiMetric, state: geodesic.PhaseState,
                    trajectory: geodesic.Trajectory) -> Dict[str, Any]:
        """Hamilton-Jacobi reconstruction of Π_τ along the integrated trajectory."""
        energy, p, q, separation = geodesic.separation_constants(metric, state)
        taus = trajectory.states[TIME_INDEX]
        grid = np.linspace(float(taus.min()), float(taus.max()), HJ_GRID_POINTS)
        try:
            result = geodesic.hj_separation_check(
                metric, energy, p, q, separation, grid, trajectory, tol=HJ_FORBIDDEN_SLACK
            )
        except geodesic.ForbiddenRegionError as e:
            logger.warning(f"⚠️ Hamilton-Jacobi grid left the allowed region: {e}")
            return {"hj_residual": math.inf, "hj_error": str(e)}
        return {
            "hj_residual": result.residual,
            "hj_action_increment": result.action_increment,
            "hj_turning_points": result.turning_points,
            "hj_points_checked": result.points_checked,
        }

    def _geodesic(self, metric: DiagonalBianchiMetric, points: Sequence[np.ndarray], seed: int, tolerance: float) -> CheckResult:
        state = initial_phase_state(metric, points[0], seed)
        cfg = geodesic.IntegratorConfig(boundary_margin=GEODESIC_BOUNDARY_MARGIN)
        trajectory = geodesic.integrate(metric, state, (0.0, GEODESIC_SPAN), cfg)
        self.last_trajectory = trajectory
        drift = trajectory.report.worst_relative_drift()
        detail: Dict[str, Any] = {
            "quantities": trajectory.report.to_dict(),
            "truncated": trajectory.truncated,
            "exit_parameter": trajectory.exit_parameter,
            "steps": int(trajectory.affine.size),
        }
        names = sorted(q for q in trajectory.report.quantities if q != "H")
        detail["poisson_with_H"] = {
            q: geodesic.poisson_bracket(
                geodesic.quantity_function(metric, "H"), geodesic.quantity_function(metric, q), state
            )
            for q in names
        }
        passed = drift <= tolerance
        if metric.bianchi_class in geodesic.INTEGRABLE_CLASSES:
            fit = geodesic.charge_bilinear_fit(metric, seed=seed)
            detail["casimir_fit_residual"] = fit.residual
            involution = self._involution(metric, state, trajectory.report.quantities)
            detail.update(involution)
            passed = passed and involution["involution_residual"] <= INTEGRABILITY_TOLERANCE
            if metric.name in geodesic.HJ_FAMILIES:
                separation = self._separation(metric, state, trajectory)
                detail.update(separation)
                passed = passed and separation["hj_residual"] <= INTEGRABILITY_TOLERANCE
        return CheckResult(
            name="geodesic",
            status="pass" if passed else "fail",
            worst_residual=drift,
            worst_point=[float(c) for c in points[0]],
            tolerance=tolerance,
            detail=detail,
        )

    async def _run_check(self, name: str, executor: ThreadPoolExecutor, metric: DiagonalBianchiMetric,
                         points: Sequence[np.ndarray], tolerance: float, seed: int) -> CheckResult:
        if name == "einstein":
            return await self._grid_check(name, executor, lambda x: einstein_residual(metric, x, metric.lam), points, tolerance)
        if name == "weyl":
            return await self._grid_check(name, executor, lambda x: weyl_residual(metric, x), points, tolerance)
        if name == "petrov":
            return await self._petrov(executor, metric, points, tolerance)
        if name == "killing":
            vectors = symmetry.family_killing_vectors(metric)
            return await self._grid_check(
                name, executor, lambda x: killing_residual_at(metric, vectors, x), points, tolerance,
                {"vectors": [v.name for v in vectors]},
            )
        if name == "yano":
            Y, _, _ = _yano_fields(metric)
            return await self._grid_check(
                name, executor, lambda x: symmetry.killing_yano_residual(Y, metric, x), points, tolerance
            )
        if name == "ks":
            Y, S, expected = _yano_fields(metric)
            return await self._grid_check(
                name, executor, lambda x: ks_residual_at(metric, Y, S, expected, x), points, tolerance
            )
        if name == "ode":
            try:
                catalog.ode_residual(metric, float(points[0][TIME_INDEX]))
            except catalog.ParameterDomainError as e:
                raise NotApplicableError(str(e))
            return await self._grid_check(
                name, executor, lambda x: catalog.ode_residual(metric, float(x[TIME_INDEX])), points, tolerance
            )
        if name == "embedding":
            mapping, kind = embedding_for(metric)
            return await self._grid_check(
                name, executor, lambda x: embedding_residual_at(metric, mapping, x), points, tolerance,
                {"map": mapping.name, "kind": kind},
            )
        if name == "geodesic":
            return self._geodesic(metric, points, seed, tolerance)
        if name == "elliptic-selftest":
            residuals = elliptic_residual(metric)
            worst = max(residuals.values())
            return CheckResult(
                name=name, status=_status(worst, tolerance), worst_residual=worst,
                worst_point=None, tolerance=tolerance, detail=residuals,
            )
        raise ValueError(f"unknown check {name}")

    async def run(self, config: RunConfig) -> Report:
        """
        Execute every requested check.

        Args:
            config (RunConfig): validated run configuration

        Returns:
            Report: one CheckResult per requested check, in request order

        Raises:
            BianchiError: for family, parameter or grid errors (exit code 1)
        """
        logger.info(f"🚀 Verifying {config.family} with checks {config.checks}")
        metric = catalog.build_metric(config.family, dict(config.params))
        points = build_grid(metric, config.grid)

        results = []
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            for name in config.checks:
                tolerance = config.tolerances.get(name, settings.tolerance_for(name, config.family))
                try:
                    result = await self._run_check(name, executor, metric, points, tolerance, config.grid.seed)
                except NotApplicableError as e:
                    logger.warning(f"⚠️ {name} not applicable: {e}")
                    result = CheckResult(name=name, status="flagged", tolerance=tolerance,
                                         detail={"applicable": False, "message": str(e)})
                except (BianchiError, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
                    logger.error(f"❌ {name} failed on {config.family}: {e}")
                    result = CheckResult(name=name, status="fail", tolerance=tolerance,
                                         detail={"error": type(e).__name__, "message": str(e)})
                if result.status == "pass":
                    logger.info(f"✅ {name}: worst residual {result.worst_residual:.3e} (tol {tolerance:.1e})")
                results.append(result)

        return Report(
            family=config.family,
            params=dict(sorted(config.params.items())),
            seed=config.grid.seed,
            tool_version=TOOL_VERSION,
            checks=results,
        )


def serialize_report(report: Report, fmt: str = "json") -> str:
    """
    Deterministic text form of a report.

    Args:
        report (Report): completed report
        fmt (str): json (key-ordered) or csv (one row per check)
    """
    if fmt == "json":
        return json.dumps(report.dict(), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["check", "status", "worst_residual", "tolerance", "worst_point"])
        for check in report.checks:
            point = " ".join(repr(c) for c in check.worst_point) if check.worst_point else ""
            writer.writerow([check.name, check.status, repr(check.worst_residual), repr(check.tolerance), point])
        return buffer.getvalue()
    raise ValueError(f"unknown report format {fmt}")


def write_text(text: str, path: str) -> None:
    """
    Raises:
        ReportWriteError: with the path in the message
    """
    try:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    except OSError as e:
        raise ReportWriteError(f"could not write {path}: {e}")


def trajectory_sidecar_path(path: str) -> str:
    stem = path[:-5] if path.endswith(".json") else path
    return f"{stem}.trajectory.csv"


# Global instance
verification_service = VerificationService()
