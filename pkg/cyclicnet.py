"""Cyclic multi-agent networks: interconnection, circulant modes, characteristic polynomial.

n identical agents h(s) sit in a single negative feedback ring with link gain
mu. Each agent may carry a multiplicative perturbation (1 + delta_i(s)).
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from complexpoly import (
    TOL_CANCEL,
    ComplexPoly,
    RationalFn,
    poly_add,
    poly_eval,
    poly_mul,
    poly_pow,
    poly_roots,
    poly_scale,
    poly_sub,
    rat_eval,
    root_match_distance,
)
from errors import NumericalError, ValidationError
from specnorm import TOL_AXIS, StabilityReport, Stability, classify_stability, hinf_norm

logger = logging.getLogger(__name__)


def _require_stable(fn: RationalFn, what: str, tol_axis: float = TOL_AXIS) -> None:
    if fn.den.degree >= 1 and not classify_stability(fn.den, tol_axis).is_stable:
        raise ValidationError(f"{what} must be stable")


@dataclass(frozen=True)
class CyclicNetwork:
    """The triple (n, mu, h): n agents h(s) in a ring with interaction strength mu."""

    n: int
    mu: float
    h: RationalFn

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValidationError(f"n must be an odd integer >= 3, got {self.n}")
        if self.n % 2 == 0:
            raise ValidationError("n must be odd")
        object.__setattr__(self, "n", int(self.n))
        if not np.isfinite(self.mu) or self.mu <= 0:
            raise ValidationError(f"mu must be a positive real, got {self.mu}")
        object.__setattr__(self, "mu", float(self.mu))
        if self.h.num.is_zero:
            raise ValidationError("agent dynamics h must be nonzero")
        if not self.h.is_real:
            raise ValidationError("agent dynamics h must have real coefficients")
        if not self.h.is_proper:
            raise ValidationError("agent dynamics h must be proper")
        if self.h.den.degree < 1:
            raise ValidationError("agent dynamics h must be dynamic: a constant gain has no closed-loop poles")
        _require_stable(self.h, "agent dynamics h")

    @classmethod
    def first_order_network(cls, K: float, tau: float, mu: float, n: int) -> "CyclicNetwork":
        """Ring of first-order lags h(s) = K/(tau s + 1)."""
        if K <= 0 or tau <= 0:
            raise ValidationError("first-order lag needs K > 0 and tau > 0")
        return cls(n=n, mu=mu, h=RationalFn([K], [tau, 1.0]))

    def first_order(self) -> Optional[Tuple[float, float]]:
        """(K, tau) when h is a first-order lag K/(tau s + 1), otherwise None."""
        if self.h.num.degree != 0 or self.h.den.degree != 1:
            return None
        d1, d0 = self.h.den.coeffs.real
        K = float(self.h.num.coeffs[0].real / d0)
        tau = float(d1 / d0)
        if K <= 0 or tau <= 0:
            return None
        return K, tau

    def with_n(self, n: int) -> "CyclicNetwork":
        return CyclicNetwork(n=n, mu=self.mu, h=self.h)


@dataclass(frozen=True)
class DiagPerturbation:
    """Stable real rational perturbations delta_1..delta_n, one per agent."""

    deltas: Tuple[RationalFn, ...]
    norm: float = field(init=False)

    def __post_init__(self):
        deltas = tuple(self.deltas)
        if not deltas:
            raise ValidationError("a perturbation needs at least one channel")
        for i, delta in enumerate(deltas, 1):
            if not delta.is_real:
                raise ValidationError(f"delta_{i} must have real coefficients")
            if not delta.is_proper:
                raise ValidationError(f"delta_{i} must be proper")
            try:
                _require_stable(delta, f"delta_{i}")
            except ValidationError:
                raise ValidationError(f"perturbation not in RH-infinity: delta_{i} is not stable")
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "norm", max(hinf_norm(d) for d in deltas))

    @classmethod
    def homogeneous(cls, delta: RationalFn, n: int) -> "DiagPerturbation":
        return cls(tuple([delta] * n))

    @classmethod
    def constant(cls, gains: Sequence[float]) -> "DiagPerturbation":
        return cls(tuple(RationalFn.constant(g) for g in gains))

    @property
    def norms(self) -> Tuple[float, ...]:
        return tuple(hinf_norm(d) for d in self.deltas)

    def __len__(self) -> int:
        return len(self.deltas)


@dataclass(frozen=True)
class ModalSet:
    """Circulant eigenvalues, modal subsystems g_k and their stability bookkeeping.

    Indices are 1-based, matching lambda_k = mu exp(j(2k-1)pi/n).
    """

    lambdas: Tuple[complex, ...]
    subsystems: Tuple[RationalFn, ...]
    unstable_indices: Tuple[int, ...]
    marginal_indices: Tuple[int, ...]
    reports: Tuple[StabilityReport, ...]


def build_interconnection(net: CyclicNetwork) -> np.ndarray:
    """-mu on the subdiagonal and in the top-right corner."""
    A = np.zeros((net.n, net.n))
    A[0, net.n - 1] = -net.mu
    idx = np.arange(1, net.n)
    A[idx, idx - 1] = -net.mu
    return A


def circulant_eigenvalues(n: int, mu: float) -> np.ndarray:
    """lambda_k = mu exp(j(2k-1)pi/n) for k = 1..n, in order of k."""
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if n % 2 == 0:
        raise ValidationError("n must be odd")
    if mu <= 0:
        raise ValidationError(f"mu must be positive, got {mu}")
    k = np.arange(1, int(n) + 1)
    return mu * np.exp(1j * (2 * k - 1) * np.pi / n)


def modal_subsystem(h: RationalFn, lam: complex) -> RationalFn:
    """g(s) = lam h(s) / (1 - lam h(s)) as lam num_h / (den_h - lam num_h).

    Raises:
        NumericalError: numerator and denominator share an approximate root
    """
    num = poly_scale(h.num, lam)
    den = poly_sub(h.den, num)
    if den.is_zero:
        raise NumericalError("unreliable modal subsystem: 1 - lambda h(s) vanishes identically")
    try:
        return RationalFn(num, den)
    except NumericalError as exc:
        raise NumericalError(f"unreliable modal subsystem for lambda = {lam:.6g}: {exc}")


def mode_polynomial(h: RationalFn, lam: complex, delta: Optional[RationalFn] = None) -> ComplexPoly:
    """den_h den_d - lam num_h (den_d + num_d): the factor of mode lam under delta I."""
    if delta is None:
        return poly_sub(h.den, poly_scale(h.num, lam))
    loop = poly_scale(poly_mul(h.num, poly_add(delta.den, delta.num)), lam)
    return poly_sub(poly_mul(h.den, delta.den), loop)


def modal_set(net: CyclicNetwork, tol_axis: float = TOL_AXIS) -> ModalSet:
    lambdas = circulant_eigenvalues(net.n, net.mu)
    subsystems, reports, unstable, marginal = [], [], [], []
    for k, lam in enumerate(lambdas, 1):
        g = modal_subsystem(net.h, lam)
        report = classify_stability(g.den, tol_axis)
        if report.n_crhp >= 1:
            unstable.append(k)
        elif report.classification is Stability.MARGINAL:
            marginal.append(k)
        subsystems.append(g)
        reports.append(report)
    logger.debug("modal set n=%d mu=%g: unstable=%s marginal=%s", net.n, net.mu, unstable, marginal)
    return ModalSet(
        lambdas=tuple(complex(l) for l in lambdas),
        subsystems=tuple(subsystems),
        unstable_indices=tuple(unstable),
        marginal_indices=tuple(marginal),
        reports=tuple(reports),
    )


def characteristic_poly(
    net: CyclicNetwork,
    delta: Optional[DiagPerturbation] = None,
    tol_axis: float = TOL_AXIS,
) -> ComplexPoly:
    """P(s) = den_h^n prod den_i + mu^n num_h^n prod (den_i + num_i).

    The closed-loop characteristic roots are the roots of P.

    Raises:
        ValidationError: delta has the wrong number of channels
        NumericalError: P vanishes at a closed right half plane root of the
            common denominator (indeterminate characteristic polynomial)
    """
    if delta is not None and len(delta) != net.n:
        raise ValidationError(f"perturbation has {len(delta)} channels, network has n = {net.n}")
    open_loop = poly_pow(net.h.den, net.n)
    loop = poly_scale(poly_pow(net.h.num, net.n), net.mu ** net.n)
    denominators = [net.h.den]
    if delta is not None:
        for d in delta.deltas:
            open_loop = poly_mul(open_loop, d.den)
            loop = poly_mul(loop, poly_add(d.den, d.num))
            denominators.append(d.den)
    P = poly_add(open_loop, loop)
    _check_cancellation(P, denominators, tol_axis)
    return P


def _check_cancellation(P: ComplexPoly, denominators: Sequence[ComplexPoly], tol_axis: float) -> None:
    magnitude_coeffs = np.abs(P.coeffs)
    for den in denominators:
        if den.degree < 1:
            continue
        for z in poly_roots(den):
            if z.real < -tol_axis:
                continue
            scale = np.polyval(magnitude_coeffs, abs(z))
            if abs(poly_eval(P, z)) <= TOL_CANCEL * scale:
                raise NumericalError(
                    f"indeterminate characteristic polynomial: unstable pole-zero cancellation at s = {z:.6g}"
                )


def nominal_roots(net: CyclicNetwork, tol_axis: float = TOL_AXIS) -> StabilityReport:
    """Classify the unperturbed network; first-order lags are cross-checked analytically."""
    report = classify_stability(characteristic_poly(net, None, tol_axis), tol_axis)
    params = net.first_order()
    if params is not None:
        K, tau = params
        theta = (2 * np.arange(1, net.n + 1) - 1) * np.pi / net.n
        analytic = (K * net.mu * np.exp(-1j * theta) - 1.0) / tau
        gap = root_match_distance(report.roots, analytic)
        limit = 1e-6 * max(1.0, float(np.max(np.abs(analytic))))
        if gap > limit:
            raise NumericalError(f"nominal roots disagree with the first-order formula by {gap:.3g}")
    return report


def determinant_value(net: CyclicNetwork, s: complex, gains: Sequence[complex]) -> complex:
    """det(I - A diag((1 + delta_i) h(s))) from the explicit interconnection matrix."""
    if len(gains) != net.n:
        raise ValidationError(f"expected {net.n} gains, got {len(gains)}")
    A = build_interconnection(net)
    hs = rat_eval(net.h, s)
    D = np.diag((1.0 + np.asarray(gains, dtype=complex)) * hs)
    return complex(np.linalg.det(np.eye(net.n) - A @ D))
