"""Robust instability radius (RIR) bounds for cyclic networks.

Lower bounds come from the L-infinity norms of the modal subsystems; upper
bounds come from perturbations that are verified to stabilize the network.
Nothing here claims an exact radius unless it was measured from both sides.
"""

import cmath
import concurrent.futures
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from complexpoly import ComplexPoly, RationalFn, poly_mul, poly_pow, poly_roots, poly_scale
from config_reader import AnalysisSettings
from cyclicnet import (
    CyclicNetwork,
    DiagPerturbation,
    ModalSet,
    characteristic_poly,
    circulant_eigenvalues,
    modal_set,
    modal_subsystem,
    nominal_roots,
)
from errors import NumericalError, PreconditionError, ValidationError
from specnorm import TOL_AXIS, StabilityReport, batch_max_real_part, linf_norm, linf_peak

logger = logging.getLogger(__name__)

MARGIN_REQ = 1e-6
RHO_BISECT_TOL = 1e-4
SCAN_POINTS = 33
BRACKET_HIGH = 1.0 - 1e-9


def _inverse_norm(g: RationalFn, tol_axis: float) -> float:
    return 1.0 / linf_norm(g, tol_axis)


def _half_modes(n: int) -> range:
    # lambda_k and lambda_{n+1-k} are conjugate, so g_k and g_{n+1-k} share a norm.
    return range(1, (n + 1) // 2 + 1)


def rho_p(net: CyclicNetwork, tol_axis: float = TOL_AXIS, modal: Optional[ModalSet] = None) -> float:
    """min over all modes of 1/||g_k||_Linf (0 when some g_k has an axis pole)."""
    modal = modal or modal_set(net, tol_axis)
    return min(_inverse_norm(modal.subsystems[k - 1], tol_axis) for k in _half_modes(net.n))


def rho_plus(
    net: CyclicNetwork, tol_axis: float = TOL_AXIS, modal: Optional[ModalSet] = None
) -> Tuple[float, Tuple[int, ...]]:
    """max over the strictly unstable modes U of 1/||g_k||_Linf, together with U.

    Raises:
        PreconditionError: U is empty
    """
    modal = modal or modal_set(net, tol_axis)
    if not modal.unstable_indices:
        raise PreconditionError("network not strictly unstable; rho_plus undefined")
    value = max(_inverse_norm(modal.subsystems[k - 1], tol_axis) for k in modal.unstable_indices)
    return value, modal.unstable_indices


@dataclass(frozen=True)
class FirstOrderRir:
    closed_form: float
    norm_based: float
    agree: bool
    stated_predicate: bool
    root_predicate: bool
    flags: Tuple[str, ...]


def rho_exact_first_order(
    K: float, tau: float, mu: float, n: int, tol_axis: float = TOL_AXIS
) -> FirstOrderRir:
    """Closed form 1 - K/(mu cos(pi/n)) next to the measured 1/||g_1||_Linf.

    Both values are always returned; disagreement is reported in ``flags``.

    Raises:
        PreconditionError: the nominal network is not strictly unstable by the root test
    """
    net = CyclicNetwork.first_order_network(K, tau, mu, n)
    report = nominal_roots(net, tol_axis)
    theta = math.pi / n
    stated = K < mu * math.cos(theta)
    by_roots = K * mu * math.cos(theta) > 1.0
    flags = []
    if stated != by_roots:
        flags.append(
            f"instability_predicates_disagree: K < mu cos(pi/n) is {stated}, "
            f"K mu cos(pi/n) > 1 (root test) is {by_roots}"
        )
    if not report.is_strictly_unstable:
        raise PreconditionError("network not strictly unstable; first-order radius undefined")

    closed_form = 1.0 - K / (mu * math.cos(theta))
    lam1 = circulant_eigenvalues(n, mu)[0]
    norm_based = _inverse_norm(modal_subsystem(net.h, lam1), tol_axis)
    agree = abs(closed_form - norm_based) <= 1e-6 * max(1.0, closed_form)
    if not agree:
        flags.append(
            f"closed_form_vs_norm_based: 1-K/(mu cos(pi/n)) = {closed_form:.10g} "
            f"but 1/||g_1||_Linf = {norm_based:.10g}"
        )
        logger.warning("first-order closed form %.6g differs from 1/||g_1|| = %.6g", closed_form, norm_based)
    if closed_form <= 0:
        flags.append(f"closed_form_nonpositive: {closed_form:.10g}")
    return FirstOrderRir(closed_form, norm_based, agree, stated, by_roots, tuple(flags))


def homogenize(deltas: Sequence[complex], r: float) -> complex:
    """The single delta with (1 + delta)^n = prod (1 + delta_i), |delta| <= r.

    Uses the principal logarithm: delta = exp(mean log(1 + delta_i)) - 1.

    Raises:
        PreconditionError: r outside (0, 1) or some |delta_i| > r
    """
    if not 0.0 < r < 1.0:
        raise PreconditionError(f"outside lemma hypothesis: r must lie in (0, 1), got {r}")
    deltas = [complex(d) for d in deltas]
    if not deltas:
        raise ValidationError("homogenize needs at least one delta")
    worst = max(abs(d) for d in deltas)
    if worst > r:
        raise PreconditionError(f"outside lemma hypothesis: |delta_i| = {worst:.6g} exceeds r = {r}")
    mean_log = sum(cmath.log(1.0 + d) for d in deltas) / len(deltas)
    return cmath.exp(mean_log) - 1.0


def convexity_witness(u: complex, v: complex, t: float, r: float) -> bool:
    """Whether exp(t u + (1 - t) v) - 1 stays in the disk of radius r.

    u and v must be logarithms of points 1 + delta with |delta| <= r.
    """
    if not 0.0 < r < 1.0:
        raise PreconditionError(f"outside lemma hypothesis: r must lie in (0, 1), got {r}")
    if not 0.0 <= t <= 1.0:
        raise PreconditionError(f"t must lie in [0, 1], got {t}")
    for name, w in (("u", u), ("v", v)):
        if abs(cmath.exp(w) - 1.0) > r + 1e-12:
            raise PreconditionError(f"{name} is not in log(1 + disk of radius {r})")
    return abs(cmath.exp(t * u + (1.0 - t) * v) - 1.0) <= r + 1e-12


@dataclass(frozen=True)
class StabilizerCandidate:
    """delta(s) = sign rho (s - a)/(s + a); a = inf stands for the constant gain sign rho."""

    rho: float
    a: float
    sign: int
    verified: bool
    stability_margin: float

    @property
    def is_constant(self) -> bool:
        return math.isinf(self.a)

    @property
    def delta(self) -> RationalFn:
        gain = self.sign * self.rho
        if self.is_constant:
            return RationalFn.constant(gain)
        return RationalFn([gain, -gain * self.a], [1.0, self.a])

    def sort_key(self) -> Tuple[float, float, int]:
        return (self.rho, self.a, 0 if self.sign > 0 else 1)

    def cli_delta(self) -> str:
        """NUM:DEN coefficients of delta as accepted by `cycrir verify --delta=`."""
        fn = self.delta
        num = ",".join(f"{c.real:.17g}" for c in fn.num.coeffs)
        den = ",".join(f"{c.real:.17g}" for c in fn.den.coeffs)
        return f"{num}:{den}"


def _pad_rows(rows: Sequence[np.ndarray]) -> np.ndarray:
    width = max(len(r) for r in rows)
    return np.array([np.concatenate([np.zeros(width - len(r), dtype=complex), r]) for r in rows])


def _allpass_family(net: CyclicNetwork, sign: int, a: float) -> Tuple[np.ndarray, np.ndarray]:
    """Mode coefficients under delta I as base + rho * slope, for k = 1..(n+1)/2."""
    if math.isinf(a):
        den_d = ComplexPoly([1.0])
        num_unit = ComplexPoly([float(sign)])
    else:
        den_d = ComplexPoly([1.0, a])
        num_unit = ComplexPoly([float(sign), -sign * a])
    lambdas = circulant_eigenvalues(net.n, net.mu)[: (net.n + 1) // 2]
    hd = poly_mul(net.h.den, den_d)
    hn = poly_mul(net.h.num, den_d)
    hs = poly_mul(net.h.num, num_unit)
    rows = []
    for lam in lambdas:
        rows.append(_pad_rows([hd.coeffs, -lam * hn.coeffs, -lam * hs.coeffs]))
    stacked = np.array(rows)
    base = stacked[:, 0] + stacked[:, 1]
    slope = stacked[:, 2]
    return base, slope


def _family_margin(base: np.ndarray, slope: np.ndarray, rhos: np.ndarray) -> np.ndarray:
    coeffs = base[None, :, :] + rhos[:, None, None] * slope[None, :, :]
    return batch_max_real_part(coeffs).max(axis=1)


def _bisect_candidate(
    params: Tuple[int, float],
    net: CyclicNetwork,
    low: float,
    high: float,
    margin_req: float,
    bisect_tol: float,
) -> Optional[StabilizerCandidate]:
    """Smallest stabilizing rho in [low, high] for one (sign, a) pair.

    A coarse scan locates the first stabilizing level, bisection refines it.
    """
    sign, a = params
    base, slope = _allpass_family(net, sign, a)
    levels = np.linspace(low, high, SCAN_POINTS)
    ok = _family_margin(base, slope, levels) < -margin_req
    if not ok.any():
        return None
    first = int(np.argmax(ok))
    if first == 0:
        rho = float(levels[0])
    else:
        lo, hi = float(levels[first - 1]), float(levels[first])
        while hi - lo > bisect_tol:
            mid = 0.5 * (lo + hi)
            if _family_margin(base, slope, np.array([mid]))[0] < -margin_req:
                hi = mid
            else:
                lo = mid
        rho = hi
    margin = float(_family_margin(base, slope, np.array([rho]))[0])
    return StabilizerCandidate(rho=rho, a=float(a), sign=int(sign), verified=margin < -margin_req,
                               stability_margin=margin)


def _map(func, items: Sequence, workers: int) -> List:
    if workers <= 1 or len(items) < 2:
        return [func(item) for item in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items, chunksize=max(1, len(items) // (4 * workers))))


def default_a_grid(net: CyclicNetwork, size: int = 200, low: float = 1e-3, high: float = 1e3,
                   tol_axis: float = TOL_AXIS) -> np.ndarray:
    """Log-spaced all-pass corner frequencies scaled by the peak frequency of g_1."""
    g1 = modal_subsystem(net.h, circulant_eigenvalues(net.n, net.mu)[0])
    _, omega = linf_peak(g1, tol_axis)
    omega = abs(omega)
    if not np.isfinite(omega) or omega == 0.0:
        omega = 1.0
    return omega * np.logspace(np.log10(low), np.log10(high), size)


def search_stabilizer_allpass(
    net: CyclicNetwork,
    rho_bracket: Optional[Tuple[float, float]] = None,
    a_grid: Optional[Sequence[float]] = None,
    margin_req: float = MARGIN_REQ,
    bisect_tol: float = RHO_BISECT_TOL,
    workers: int = 1,
    tol_axis: float = TOL_AXIS,
) -> Optional[StabilizerCandidate]:
    """Best verified homogeneous stabilizer delta I with delta = +-rho (s-a)/(s+a) or +-rho.

    Its rho upper-bounds the homogeneous RIR and hence the dynamic RIR.

    Raises:
        PreconditionError: nominal network is stable, or the bracket starts
            below rho_plus (no stabilizer can exist there)
    """
    modal = modal_set(net, tol_axis)
    if not modal.unstable_indices and not modal.marginal_indices:
        raise PreconditionError("nominal network is stable; there is nothing to stabilize")
    floor = rho_plus(net, tol_axis, modal)[0] if modal.unstable_indices else 0.0
    low, high = rho_bracket if rho_bracket is not None else (floor, BRACKET_HIGH)
    if low > high:
        raise ValidationError(f"empty rho bracket [{low}, {high}]")
    if low < floor - 1e-9:
        raise PreconditionError(f"rho bracket starts at {low:.6g}, below the lower bound rho_plus = {floor:.6g}")

    grid = default_a_grid(net, tol_axis=tol_axis) if a_grid is None else np.asarray(a_grid, dtype=float)
    params = [(sign, float(a)) for a in grid for sign in (1, -1)]
    params += [(1, math.inf), (-1, math.inf)]
    logger.info("stabilizer search: %d candidates, rho in [%.6g, %.6g]", len(params), low, high)

    worker = partial(_bisect_candidate, net=net, low=low, high=high, margin_req=margin_req,
                     bisect_tol=bisect_tol)
    found = [c for c in _map(worker, params, workers) if c is not None and c.verified]
    if not found:
        logger.info("stabilizer search: no verified candidate")
        return None
    best = min(found, key=StabilizerCandidate.sort_key)
    if best.rho < floor - 1e-6:
        raise NumericalError(f"verified stabilizer rho = {best.rho:.6g} is below rho_plus = {floor:.6g}")
    logger.info("stabilizer search: rho=%.8g a=%.6g sign=%+d margin=%.3g",
                best.rho, best.a, best.sign, best.stability_margin)
    return best


@dataclass(frozen=True)
class PerturbationVerdict:
    stabilizes: bool
    max_root_real_part: float
    norms: Tuple[float, ...]
    max_norm: float


def verify_perturbation(
    net: CyclicNetwork,
    delta: DiagPerturbation,
    margin_req: float = MARGIN_REQ,
    method: str = "companion",
    tol_axis: float = TOL_AXIS,
) -> PerturbationVerdict:
    """Root test of the perturbed characteristic polynomial."""
    P = characteristic_poly(net, delta, tol_axis)
    if P.degree < 1:
        raise NumericalError("perturbed characteristic polynomial is constant")
    worst = float(np.max(poly_roots(P, method=method).real))
    norms = delta.norms
    return PerturbationVerdict(worst < -margin_req, worst, norms, max(norms))


def reverify_candidate(net: CyclicNetwork, candidate: StabilizerCandidate,
                       margin_req: float = MARGIN_REQ) -> PerturbationVerdict:
    """Check a search result on the full characteristic polynomial with Aberth roots."""
    delta = DiagPerturbation.homogeneous(candidate.delta, net.n)
    return verify_perturbation(net, delta, margin_req, method="aberth")


def _complex_gain_family(net: CyclicNetwork) -> Tuple[np.ndarray, np.ndarray]:
    """Modes den_h - lambda_k (1 + delta) num_h as base + delta * slope for all k."""
    lambdas = circulant_eigenvalues(net.n, net.mu)
    base, slope = [], []
    for lam in lambdas:
        rows = _pad_rows([net.h.den.coeffs, -lam * net.h.num.coeffs])
        base.append(rows[0] + rows[1])
        slope.append(rows[1])
    return np.array(base), np.array(slope)


def _ray_margins(base: np.ndarray, slope: np.ndarray, radius: float, phases: np.ndarray) -> np.ndarray:
    deltas = radius * np.exp(1j * phases)
    coeffs = base[None, :, :] + deltas[:, None, None] * slope[None, :, :]
    return batch_max_real_part(coeffs).max(axis=1)


def _smallest_feasible_radius(base, slope, phases, low, high, margin_req, bisect_tol):
    while high - low > bisect_tol:
        mid = 0.5 * (low + high)
        if np.any(_ray_margins(base, slope, mid, phases) < -margin_req):
            high = mid
        else:
            low = mid
    return high


def rho_c_estimate(
    net: CyclicNetwork,
    per_mode: bool = True,
    margin_req: float = MARGIN_REQ,
    bisect_tol: float = RHO_BISECT_TOL,
    arg_grid_size: int = 720,
    tol_axis: float = TOL_AXIS,
) -> float:
    """Smallest verified complex constant perturbation magnitude that stabilizes the network.

    The homogeneous search scans |delta| levels, bisects on the first feasible
    one over a grid of arg(delta), then refines the grid around the best cell.
    With ``per_mode=False`` a heterogeneous brute force (n <= 5) runs as well
    and the smaller verified value is returned.

    Raises:
        ValidationError: per_mode is False and n > 5
        PreconditionError: nominal network is stable
    """
    if not per_mode and net.n > 5:
        raise ValidationError("brute force limited to n <= 5")
    if nominal_roots(net, tol_axis).is_stable:
        raise PreconditionError("network not strictly unstable; rho_c undefined")

    base, slope = _complex_gain_family(net)
    phases = 2 * np.pi * np.arange(arg_grid_size) / arg_grid_size
    levels = np.linspace(0.0, 1.0, 65)
    previous = 0.0
    for level in levels[1:]:
        margins = _ray_margins(base, slope, level, phases)
        if np.any(margins < -margin_req):
            break
        previous = level
    else:
        raise NumericalError("no stabilizing complex gain found up to |delta| = 1")

    radius = _smallest_feasible_radius(base, slope, phases, previous, level, margin_req, bisect_tol)
    best = phases[int(np.argmin(_ray_margins(base, slope, radius, phases)))]
    step = 2 * np.pi / arg_grid_size
    refined = np.concatenate([phases, best + np.linspace(-step, step, 65)])
    radius = _smallest_feasible_radius(base, slope, refined, previous, radius, margin_req, bisect_tol)
    logger.info("homogeneous complex-gain estimate: %.8g", radius)

    if not per_mode:
        brute = rho_c_bruteforce(net, margin_req=margin_req)
        logger.info("heterogeneous brute-force estimate: %.8g", brute)
        radius = min(radius, brute)
    return float(radius)


def rho_c_bruteforce(net: CyclicNetwork, levels: int = 40, margin_req: float = MARGIN_REQ) -> float:
    """Coarse oracle over independent complex gains delta_i (0 or on a circle of radius r)."""
    if net.n > 5:
        raise ValidationError("brute force limited to n <= 5")
    phase_count = min(24, int((2e5) ** (1.0 / net.n)) - 1)
    phase_count -= phase_count % 2
    loop = poly_scale(poly_pow(net.h.num, net.n), net.mu ** net.n).coeffs
    open_loop = poly_pow(net.h.den, net.n).coeffs
    rows = _pad_rows([open_loop, loop])
    for radius in np.linspace(0.0, 1.0, levels + 1)[1:]:
        channel = np.concatenate([[0.0], radius * np.exp(2j * np.pi * np.arange(phase_count) / phase_count)])
        products = np.ones(1, dtype=complex)
        for _ in range(net.n):
            products = (products[:, None] * (1.0 + channel)[None, :]).ravel()
        products = np.unique(np.round(products, 12))
        margins = batch_max_real_part(rows[0][None, :] + products[:, None] * rows[1][None, :])
        if np.any(margins < -margin_req):
            return float(radius)
    raise NumericalError("brute force found no stabilizing complex gains")


@dataclass
class RirReport:
    """Every radius computed for one network plus unstable-mode bookkeeping."""

    nominal: StabilityReport
    rho_p: float
    rho_plus: Optional[float] = None
    unstable_indices: Tuple[int, ...] = ()
    marginal_indices: Tuple[int, ...] = ()
    closed_form_first_order: Optional[float] = None
    norm_based_first_order: Optional[float] = None
    agree: Optional[bool] = None
    rho_upper_homogeneous: Optional[float] = None
    stabilizer: Optional[StabilizerCandidate] = None
    rho_c_estimate: Optional[float] = None
    consistency_flags: List[str] = field(default_factory=list)

    def check_invariants(self) -> None:
        if self.rho_plus is None:
            return
        if self.rho_p > self.rho_plus + 1e-9:
            raise NumericalError(f"rho_p = {self.rho_p:.10g} exceeds rho_plus = {self.rho_plus:.10g}")
        if self.rho_upper_homogeneous is not None and self.rho_plus > self.rho_upper_homogeneous + 1e-6:
            raise NumericalError(
                f"rho_plus = {self.rho_plus:.10g} exceeds the verified stabilizer {self.rho_upper_homogeneous:.10g}"
            )
        if self.rho_c_estimate is not None and self.rho_plus > self.rho_c_estimate + 1e-6:
            raise NumericalError(
                f"rho_plus = {self.rho_plus:.10g} exceeds the complex-gain estimate {self.rho_c_estimate:.10g}"
            )


def _position_flag(rho_hat: float, closed_form: float, norm_based: float) -> str:
    nearer = "norm_based" if abs(rho_hat - norm_based) < abs(rho_hat - closed_form) else "closed_form"
    return (
        f"stabilizer_position: rho_hat = {rho_hat:.8g}, "
        f"rho_hat - norm_based = {rho_hat - norm_based:+.3g}, "
        f"rho_hat - closed_form = {rho_hat - closed_form:+.3g}, nearer {nearer}"
    )


def rir_report(net: CyclicNetwork, settings: Optional[AnalysisSettings] = None) -> RirReport:
    """Assemble all radii for ``net``.

    The rho_plus-dependent fields stay None when the nominal network is not
    strictly unstable; the reason is recorded in ``consistency_flags``.
    """
    settings = settings or AnalysisSettings()
    tol = settings.tol_axis
    nominal = nominal_roots(net, tol)
    modal = modal_set(net, tol)
    report = RirReport(
        nominal=nominal,
        rho_p=rho_p(net, tol, modal),
        unstable_indices=modal.unstable_indices,
        marginal_indices=modal.marginal_indices,
    )
    if modal.marginal_indices:
        report.consistency_flags.append(f"marginal_modes: {list(modal.marginal_indices)}")

    if not nominal.is_strictly_unstable:
        report.consistency_flags.append(
            f"rho_plus_undefined: network not strictly unstable (nominal {nominal.classification.value})"
        )
        return report

    report.rho_plus = rho_plus(net, tol, modal)[0]
    first = net.first_order()
    if first is not None:
        fo = rho_exact_first_order(first[0], first[1], net.mu, net.n, tol)
        report.closed_form_first_order = fo.closed_form
        report.norm_based_first_order = fo.norm_based
        report.agree = fo.agree
        report.consistency_flags.extend(fo.flags)

    stabilizer = search_stabilizer_allpass(
        net,
        a_grid=default_a_grid(net, settings.a_grid_size, settings.a_grid_low, settings.a_grid_high, tol),
        margin_req=settings.margin_req,
        bisect_tol=settings.rho_bisect_tol,
        workers=settings.workers,
        tol_axis=tol,
    )
    if stabilizer is None:
        report.consistency_flags.append("stabilizer_search: no verified stabilizer in the bracket")
    else:
        report.stabilizer = stabilizer
        report.rho_upper_homogeneous = stabilizer.rho
        report.consistency_flags.append(
            f"stabilizer: sign = {stabilizer.sign:+d}, a = {stabilizer.a:.17g}, rho_hat = {stabilizer.rho:.17g}, "
            f"--delta={stabilizer.cli_delta()}"
        )
        if first is not None:
            report.consistency_flags.append(
                _position_flag(stabilizer.rho, report.closed_form_first_order, report.norm_based_first_order)
            )

    report.rho_c_estimate = rho_c_estimate(
        net,
        per_mode=True,
        margin_req=settings.margin_req,
        bisect_tol=settings.rho_bisect_tol,
        arg_grid_size=settings.arg_grid_size,
        tol_axis=tol,
    )
    report.check_invariants()
    return report
