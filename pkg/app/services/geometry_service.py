"""
Geometry Service

Coordinate tensor calculus on metric fields: partial derivatives (exact or
Richardson-extrapolated central differences), Christoffel symbols,
Riemann/Ricci/Weyl tensors, the self-dual (A, B, C) matrix triplet,
Newman-Penrose Weyl scalars and Petrov classification.

Index conventions:
    dg[k, i, j]       = ∂_k g_ij
    ddg[k, l, i, j]   = ∂_k ∂_l g_ij
    christoffel[a, b, c] = Γ^a_bc
    riemann[a, b, c, d]  = R^a_bcd = ∂_c Γ^a_db − ∂_d Γ^a_cb + Γ^a_ce Γ^e_db − Γ^a_de Γ^e_cb
    ricci[b, d]          = R^a_bad
With these conventions the unit 2-sphere has scalar curvature +2.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp

from app.models.response import PetrovLabel
from app.services import BianchiError

logger = logging.getLogger(__name__)

EPS_MACHINE = np.finfo(float).eps
FIRST_STEP_EXPONENT = 1.0 / 3.0
SECOND_STEP_EXPONENT = 1.0 / 4.0
DEFAULT_PETROV_RELATIVE_TOL = 1e-6
DEFAULT_PETROV_ABSOLUTE_TOL = 1e-8

Jet = Tuple[np.ndarray, np.ndarray, np.ndarray]


class DomainBoundaryError(BianchiError):
    """Raised when a point or a finite-difference stencil leaves the metric domain."""
    pass


class SingularMetricError(BianchiError):
    """Raised when the metric cannot be inverted at a point."""
    pass


class TetradError(BianchiError):
    """Raised when a tetrad is not orthonormal or a null tetrad is not null."""
    pass


def levi_civita_3() -> np.ndarray:
    epsilon = np.zeros((3, 3, 3))
    for (i, j, k), sign in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                            (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
        epsilon[i, j, k] = sign
    return epsilon


EPSILON_3 = levi_civita_3()


class MetricField:
    """
    Signature-aware metric evaluator on a coordinate chart.

    Args:
        components: x -> symmetric (n, n) array
        signature: +1 Euclidean, -1 Minkowskian
        jet: optional x -> (g, dg, ddg) exact derivatives
        domain: optional validity predicate
        dimension: chart dimension
        name: label used in logs and reports
    """

    def __init__(
        self,
        components: Callable[[np.ndarray], np.ndarray],
        signature: int = 1,
        jet: Optional[Callable[[np.ndarray], Jet]] = None,
        domain: Optional[Callable[[np.ndarray], bool]] = None,
        dimension: int = 4,
        name: str = "metric",
    ):
        if signature not in (1, -1):
            raise ValueError(f"signature must be +1 or -1, got {signature}")
        self._components = components
        self._jet = jet
        self._domain = domain
        self.signature = signature
        self.dimension = dimension
        self.name = name

    @property
    def has_exact_partials(self) -> bool:
        return self._jet is not None

    def in_domain(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            return False
        return True if self._domain is None else bool(self._domain(x))

    def require_domain(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.in_domain(x):
            raise DomainBoundaryError(f"point {x.tolist()} outside the domain of {self.name}")
        return x

    def components(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._components(np.asarray(x, dtype=float)), dtype=float)

    def exact_jet(self, x: np.ndarray) -> Jet:
        if self._jet is None:
            raise NotImplementedError(f"{self.name} has no exact partials")
        g, dg, ddg = self._jet(np.asarray(x, dtype=float))
        return np.asarray(g, dtype=float), np.asarray(dg, dtype=float), np.asarray(ddg, dtype=float)

    def perturbed(self, delta: np.ndarray, name: Optional[str] = None) -> "MetricField":
        """Same derivatives, components shifted by a constant symmetric matrix."""
        delta = np.asarray(delta, dtype=float)

        def components(x):
            return self.components(x) + delta

        jet = None
        if self.has_exact_partials:
            def jet(x):
                g, dg, ddg = self.exact_jet(x)
                return g + delta, dg, ddg

        return MetricField(components, self.signature, jet, self._domain, self.dimension,
                           name or f"{self.name}+delta")


class SymbolicMetric(MetricField):
    """
    Metric given by sympy expressions in the chart coordinates.

    Exact first and second partials are produced once with sp.derive_by_array
    and compiled with sp.lambdify.
    """

    def __init__(
        self,
        coordinates: Sequence[sp.Symbol],
        matrix: sp.Matrix,
        signature: int = 1,
        domain: Optional[Callable[[np.ndarray], bool]] = None,
        name: str = "symbolic",
    ):
        coordinates = list(coordinates)
        array = sp.Array(sp.Matrix(matrix).tolist())
        first = sp.derive_by_array(array, coordinates)
        second = sp.derive_by_array(first, coordinates)
        n = len(coordinates)
        self._g_fn = sp.lambdify(coordinates, array.tolist(), "numpy")
        self._dg_fn = sp.lambdify(coordinates, first.tolist(), "numpy")
        self._ddg_fn = sp.lambdify(coordinates, second.tolist(), "numpy")
        self.coordinates = coordinates

        def components(x):
            return _as_float_array(self._g_fn(*x), (n, n))

        def jet(x):
            return (
                _as_float_array(self._g_fn(*x), (n, n)),
                _as_float_array(self._dg_fn(*x), (n, n, n)),
                _as_float_array(self._ddg_fn(*x), (n, n, n, n)),
            )

        super().__init__(components, signature, jet, domain, n, name)


def _as_float_array(values, shape: Tuple[int, ...]) -> np.ndarray:
    return np.array(values, dtype=float).reshape(shape)


@dataclass
class PartialDerivatives:
    """Metric and its coordinate partials at one point."""
    metric: np.ndarray
    first: np.ndarray
    second: Optional[np.ndarray]
    error_estimate: float
    exact: bool


def _step(x: np.ndarray, exponent: float) -> np.ndarray:
    return EPS_MACHINE ** exponent * np.maximum(1.0, np.abs(x))


def _check_stencil(metric: MetricField, x: np.ndarray, offsets: Sequence[np.ndarray]) -> None:
    for offset in offsets:
        if not metric.in_domain(x + offset):
            raise DomainBoundaryError(
                f"finite-difference stencil at {x.tolist()} leaves the domain of {metric.name}"
            )


def _first_partials_fd(metric: MetricField, x: np.ndarray) -> Tuple[np.ndarray, float]:
    n = metric.dimension
    h = _step(x, FIRST_STEP_EXPONENT)
    first = np.zeros((n, n, n))
    error = 0.0
    for k in range(n):
        e = np.zeros(n)
        e[k] = h[k]
        _check_stencil(metric, x, [e, -e])
        coarse = (metric.components(x + e) - metric.components(x - e)) / (2.0 * h[k])
        fine = (metric.components(x + e / 2) - metric.components(x - e / 2)) / h[k]
        first[k] = (4.0 * fine - coarse) / 3.0
        error = max(error, float(np.max(np.abs(fine - coarse))) / 3.0)
    return first, error


def _second_partial_estimate(metric: MetricField, x: np.ndarray, k: int, l: int, h: np.ndarray) -> np.ndarray:
    n = metric.dimension
    ek = np.zeros(n)
    ek[k] = h[k]
    if k == l:
        return (metric.components(x + ek) - 2.0 * metric.components(x) + metric.components(x - ek)) / h[k] ** 2
    el = np.zeros(n)
    el[l] = h[l]
    return (
        metric.components(x + ek + el)
        - metric.components(x + ek - el)
        - metric.components(x - ek + el)
        + metric.components(x - ek - el)
    ) / (4.0 * h[k] * h[l])


def _second_partials_fd(metric: MetricField, x: np.ndarray) -> Tuple[np.ndarray, float]:
    n = metric.dimension
    h = _step(x, SECOND_STEP_EXPONENT)
    second = np.zeros((n, n, n, n))
    error = 0.0
    for k in range(n):
        for l in range(k, n):
            offsets = []
            for sk in (1, -1):
                for sl in (1, -1):
                    offset = np.zeros(n)
                    offset[k] += sk * h[k]
                    offset[l] += sl * h[l]
                    offsets.append(offset)
            _check_stencil(metric, x, offsets)
            coarse = _second_partial_estimate(metric, x, k, l, h)
            fine = _second_partial_estimate(metric, x, k, l, h / 2)
            value = (4.0 * fine - coarse) / 3.0
            second[k, l] = value
            second[l, k] = value
            error = max(error, float(np.max(np.abs(fine - coarse))) / 3.0)
    return second, error


def partials(metric: MetricField, x: np.ndarray, order: int = 2, use_exact: bool = True) -> PartialDerivatives:
    """
    Metric partial derivatives at x.

    Args:
        metric (MetricField): the metric
        x (np.ndarray): chart point
        order (int): 1 for first partials only, 2 for first and second
        use_exact (bool): prefer supplied exact partials when available

    Returns:
        PartialDerivatives: metric, partials and an error estimate (0 when exact)

    Raises:
        DomainBoundaryError: if x or the stencil leaves the validity domain
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    x = metric.require_domain(x)

    if use_exact and metric.has_exact_partials:
        g, dg, ddg = metric.exact_jet(x)
        return PartialDerivatives(g, dg, ddg if order == 2 else None, 0.0, True)

    g = metric.components(x)
    first, error = _first_partials_fd(metric, x)
    second = None
    if order == 2:
        second, second_error = _second_partials_fd(metric, x)
        error = max(error, second_error)
    scale = max(1.0, float(np.max(np.abs(g))))
    return PartialDerivatives(g, first, second, error / scale, False)


def inverse_metric(g: np.ndarray) -> np.ndarray:
    try:
        if abs(np.linalg.det(g)) < 1e-300 or np.linalg.cond(g) > 1e14:
            raise SingularMetricError(f"metric is singular (cond={np.linalg.cond(g):.3e})")
        return np.linalg.inv(g)
    except np.linalg.LinAlgError as e:
        raise SingularMetricError(f"metric inversion failed: {e}")


def christoffel_from_partials(g_inv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    # lowered[d, b, c] = ∂_b g_dc + ∂_c g_db − ∂_d g_bc
    lowered = np.einsum("bdc->dbc", dg) + np.einsum("cdb->dbc", dg) - dg
    return 0.5 * np.einsum("ad,dbc->abc", g_inv, lowered)


def christoffel(metric: MetricField, x: np.ndarray) -> np.ndarray:
    """
    Levi-Civita connection Γ^a_bc at x.

    Raises:
        SingularMetricError: if the metric is not invertible at x
    """
    d = partials(metric, x, order=1)
    return christoffel_from_partials(inverse_metric(d.metric), d.first)


def metric_compatibility_residual(metric: MetricField, x: np.ndarray) -> float:
    """max |∇_λ g_μν| computed from Γ and ∂g."""
    d = partials(metric, x, order=1)
    gamma = christoffel_from_partials(inverse_metric(d.metric), d.first)
    nabla = d.first - np.einsum("slm,sn->lmn", gamma, d.metric) - np.einsum("sln,ms->lmn", gamma, d.metric)
    return float(np.max(np.abs(nabla)))


@dataclass
class CurvatureBundle:
    """Curvature data at one chart point."""
    point: np.ndarray
    metric: np.ndarray
    metric_inverse: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    weylA: Optional[np.ndarray] = None
    weylB: Optional[np.ndarray] = None
    weylC: Optional[np.ndarray] = None
    weylPlus: Optional[np.ndarray] = None
    weylMinus: Optional[np.ndarray] = None
    error_estimate: float = 0.0

    @property
    def riemann_lowered(self) -> np.ndarray:
        return np.einsum("ae,ebcd->abcd", self.metric, self.riemann)

    @property
    def ricci_mixed(self) -> np.ndarray:
        # Ric_μ^ν
        return np.einsum("mb,bn->mn", self.ricci, self.metric_inverse)

    def weyl_lowered(self) -> np.ndarray:
        n = self.metric.shape[0]
        g, ric, R = self.metric, self.ricci, self.scalar
        riemann = self.riemann_lowered
        ricci_part = (
            np.einsum("ac,bd->abcd", g, ric)
            - np.einsum("ad,bc->abcd", g, ric)
            - np.einsum("bc,ad->abcd", g, ric)
            + np.einsum("bd,ac->abcd", g, ric)
        ) / (n - 2)
        scalar_part = R * (np.einsum("ac,bd->abcd", g, g) - np.einsum("ad,bc->abcd", g, g)) / ((n - 1) * (n - 2))
        return riemann - ricci_part + scalar_part


def riemann_ricci(metric: MetricField, x: np.ndarray) -> CurvatureBundle:
    """
    Christoffel, Riemann, Ricci and scalar curvature at x.

    Returns:
        CurvatureBundle: bundle without the self-dual blocks
    """
    d = partials(metric, x, order=2)
    g_inv = inverse_metric(d.metric)
    gamma = christoffel_from_partials(g_inv, d.first)

    # ∂_e Γ^a_bc
    d_inverse = -np.einsum("am,emn,nd->ead", g_inv, d.first, g_inv)
    lowered = np.einsum("bdc->dbc", d.first) + np.einsum("cdb->dbc", d.first) - d.first
    d_lowered = (
        np.einsum("ebdc->edbc", d.second)
        + np.einsum("ecdb->edbc", d.second)
        - d.second
    )
    d_gamma = 0.5 * (np.einsum("ead,dbc->eabc", d_inverse, lowered) + np.einsum("ad,edbc->eabc", g_inv, d_lowered))

    riemann = (
        np.einsum("cadb->abcd", d_gamma)
        - np.einsum("dacb->abcd", d_gamma)
        + np.einsum("ace,edb->abcd", gamma, gamma)
        - np.einsum("ade,ecb->abcd", gamma, gamma)
    )
    ricci = np.einsum("abad->bd", riemann)
    scalar = float(np.einsum("bd,bd->", g_inv, ricci))
    return CurvatureBundle(
        point=np.asarray(x, dtype=float),
        metric=d.metric,
        metric_inverse=g_inv,
        christoffel=gamma,
        riemann=riemann,
        ricci=ricci,
        scalar=scalar,
        error_estimate=d.error_estimate,
    )


def first_bianchi_residual(bundle: CurvatureBundle) -> float:
    R = bundle.riemann
    cyclic = R + np.einsum("abcd->acdb", R) + np.einsum("abcd->adbc", R)
    return float(np.max(np.abs(cyclic)))


def einstein_residual(metric: MetricField, x: np.ndarray, lam: float) -> float:
    """
    max |Ric_μ^ν − λ δ_μ^ν| at x.

    Args:
        metric (MetricField): the metric
        x (np.ndarray): chart point
        lam (float): Einstein constant

    Returns:
        float: worst mixed-index deviation
    """
    bundle = riemann_ricci(metric, x)
    return float(np.max(np.abs(bundle.ricci_mixed - lam * np.eye(metric.dimension))))


class Tetrad:
    """
    Orthonormal coframe e^A_μ(x) with η_AB = diag(eta).

    Args:
        covectors: x -> (4, 4) array, row A is e^A
        eta: diagonal of the frame metric
        orientation: +1 or -1; -1 exchanges the self-dual and anti-self-dual blocks
        time_leg: index of the leg used as e^0 in the self-dual split
    """

    def __init__(
        self,
        covectors: Callable[[np.ndarray], np.ndarray],
        eta: Sequence[float],
        orientation: int = 1,
        time_leg: int = 0,
    ):
        self._covectors = covectors
        self.eta = np.asarray(eta, dtype=float)
        self.orientation = orientation
        self.time_leg = time_leg

    def covectors(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._covectors(np.asarray(x, dtype=float)), dtype=float)

    def vectors(self, x: np.ndarray) -> np.ndarray:
        """Dual frame, column A is e_A."""
        return np.linalg.inv(self.covectors(x))

    def reconstruct(self, x: np.ndarray) -> np.ndarray:
        E = self.covectors(x)
        return np.einsum("am,a,an->mn", E, self.eta, E)

    def orthonormality_residual(self, metric: MetricField, x: np.ndarray) -> float:
        g = metric.components(x)
        scale = max(1.0, float(np.max(np.abs(g))))
        return float(np.max(np.abs(self.reconstruct(x) - g))) / scale


def frame_riemann(bundle: CurvatureBundle, tetrad: Tetrad) -> np.ndarray:
    """R_ABCD on the tetrad, all indices lowered."""
    V = tetrad.vectors(bundle.point)
    return np.einsum("abcd,aA,bB,cC,dD->ABCD", bundle.riemann_lowered, V, V, V, V)


def selfdual_decompose(metric: MetricField, tetrad: Tetrad, x: np.ndarray, tol: float = 1e-10) -> CurvatureBundle:
    """
    Expand the curvature 2-forms on the λ±_a basis.

    Returns:
        CurvatureBundle: with weylA, weylB, weylC, weylPlus, weylMinus filled in

    Raises:
        TetradError: if the tetrad is not orthonormal for the metric at x
    """
    residual = tetrad.orthonormality_residual(metric, x)
    if residual > tol:
        raise TetradError(f"tetrad is not orthonormal (residual {residual:.3e})")

    bundle = riemann_ricci(metric, x)
    R = frame_riemann(bundle, tetrad)
    legs = [tetrad.time_leg] + [a for a in range(4) if a != tetrad.time_leg]
    R = R[np.ix_(legs, legs, legs, legs)]
    space = slice(1, 4)

    M = R[0, space, 0, space]
    N = 0.5 * np.einsum("bcd,acd->ab", EPSILON_3, R[0, space, space, space])
    P = 0.5 * np.einsum("acd,cdb->ab", EPSILON_3, R[space, space, 0, space])
    Q = 0.25 * np.einsum("acd,bef,cdef->ab", EPSILON_3, EPSILON_3, R[space, space, space, space])

    A = 0.5 * (M + P + N + Q)
    B = 0.5 * (M + P - N - Q)
    C = 0.5 * (M - P - N + Q)
    if tetrad.orientation < 0:
        A, C, B = C, A, B.T

    identity = np.eye(3)
    bundle.weylA, bundle.weylB, bundle.weylC = A, B, C
    bundle.weylPlus = A - np.trace(A) / 3.0 * identity
    bundle.weylMinus = C - np.trace(C) / 3.0 * identity
    return bundle


@dataclass
class NullTetrad:
    """Complex null tetrad as coordinate vectors (k, l, m)."""
    k: np.ndarray
    l: np.ndarray
    m: np.ndarray


def null_tetrad_from_frame(tetrad: Tetrad, x: np.ndarray, axis_leg: int, spatial_legs: Sequence[int]) -> NullTetrad:
    """k, l = (T ± X)/√2 and m = (Y + iZ)/√2 built on the orthonormal legs."""
    V = tetrad.vectors(x)
    T = V[:, tetrad.time_leg]
    X = V[:, axis_leg]
    Y, Z = V[:, spatial_legs[0]], V[:, spatial_legs[1]]
    root = np.sqrt(2.0)
    return NullTetrad(k=(T + X) / root, l=(T - X) / root, m=(Y + 1j * Z) / root)


def np_weyl_scalars(metric: MetricField, nulltetrad: NullTetrad, x: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """
    Weyl scalars Ψ0..Ψ4 on a complex null tetrad.

    Args:
        metric (MetricField): Minkowskian metric
        nulltetrad (NullTetrad): k, l real null, m complex null, g(k,l) = −1, g(m, m̄) = 1
        x (np.ndarray): chart point

    Returns:
        np.ndarray: complex array (Ψ0, Ψ1, Ψ2, Ψ3, Ψ4)

    Raises:
        TetradError: if the null conditions fail
    """
    if metric.signature != -1:
        raise TetradError("NP scalars need a Minkowskian metric")
    bundle = riemann_ricci(metric, x)
    g = bundle.metric
    k, l, m = nulltetrad.k, nulltetrad.l, nulltetrad.m
    mbar = np.conj(m)

    def dot(u, v):
        return np.einsum("i,ij,j->", u, g, v)

    conditions = [dot(k, k), dot(l, l), dot(m, m), dot(k, m), dot(l, m), dot(k, l) + 1.0, dot(m, mbar) - 1.0]
    worst = max(abs(c) for c in conditions)
    if worst > tol:
        raise TetradError(f"null tetrad conditions violated (worst {worst:.3e})")

    C = bundle.weyl_lowered()

    def contract(a, b, c, d):
        return np.einsum("abcd,a,b,c,d->", C, a, b, c, d)

    return np.array([
        contract(k, m, k, m),
        contract(k, l, k, m),
        contract(k, m, mbar, l),
        contract(k, l, mbar, l),
        contract(l, mbar, l, mbar),
    ], dtype=complex)


def _multiplicity_label(eigenvalues: np.ndarray, absolute_tol: float, relative_tol: float) -> Tuple[str, bool]:
    scale = float(np.max(np.abs(eigenvalues))) if len(eigenvalues) else 0.0
    if scale < absolute_tol:
        return "O", False
    gaps = [abs(eigenvalues[i] - eigenvalues[j]) for i in range(3) for j in range(i + 1, 3)]
    threshold = relative_tol * scale
    equal = sum(1 for gap in gaps if gap < threshold)
    ambiguous = any(threshold <= gap < 10.0 * threshold for gap in gaps)
    if equal == 0:
        return "I", ambiguous
    return "D", ambiguous


def weyl_invariant_eigenvalues(psi: Sequence[complex]) -> np.ndarray:
    """Roots of x³ − I x + 2J for I = Ψ0Ψ4 − 4Ψ1Ψ3 + 3Ψ2² and J = det of the Ψ Hankel matrix."""
    p0, p1, p2, p3, p4 = psi
    invariant_i = p0 * p4 - 4.0 * p1 * p3 + 3.0 * p2 ** 2
    invariant_j = np.linalg.det(np.array([[p4, p3, p2], [p3, p2, p1], [p2, p1, p0]], dtype=complex))
    return np.roots([1.0, 0.0, -invariant_i, 2.0 * invariant_j])


def petrov_classify(
    data: Union[CurvatureBundle, Sequence[complex]],
    tol: float = DEFAULT_PETROV_ABSOLUTE_TOL,
    relative_tol: float = DEFAULT_PETROV_RELATIVE_TOL,
) -> PetrovLabel:
    """
    Petrov-like label from eigenvalue multiplicities.

    Args:
        data: a CurvatureBundle carrying W± (Euclidean) or the five Ψ scalars (Minkowskian)
        tol (float): absolute threshold under which a side is type O
        relative_tol (float): eigenvalue-equality threshold relative to the largest |eigenvalue|

    Returns:
        PetrovLabel: labels per side, eigenvalues and the ambiguity flag
    """
    if isinstance(data, CurvatureBundle):
        if data.weylPlus is None or data.weylMinus is None:
            raise ValueError("bundle has no self-dual decomposition")
        plus = np.sort(np.linalg.eigvalsh(0.5 * (data.weylPlus + data.weylPlus.T)))
        minus = np.sort(np.linalg.eigvalsh(0.5 * (data.weylMinus + data.weylMinus.T)))
        plus_label, plus_flag = _multiplicity_label(plus, tol, relative_tol)
        minus_label, minus_flag = _multiplicity_label(minus, tol, relative_tol)
        label = PetrovLabel(
            signature="euclidean",
            plus=plus_label,
            minus=minus_label,
            eigenvalues={"plus": plus.tolist(), "minus": minus.tolist()},
            ambiguous=plus_flag or minus_flag,
        )
    else:
        eigenvalues = weyl_invariant_eigenvalues(list(data))
        kind, flag = _multiplicity_label(eigenvalues, tol, relative_tol)
        order = np.lexsort((eigenvalues.imag, eigenvalues.real))
        eigenvalues = eigenvalues[order]
        label = PetrovLabel(
            signature="lorentzian",
            plus=kind,
            minus=kind,
            eigenvalues={"real": eigenvalues.real.tolist(), "imag": eigenvalues.imag.tolist()},
            ambiguous=flag,
        )
    if label.ambiguous:
        logger.warning(f"⚠️ Ambiguous eigenvalue multiplicity: {label.eigenvalues}")
    return label
