"""Stability classification and frequency-domain norms of rational functions."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from complexpoly import (
    ComplexPoly,
    RationalFn,
    poly_conj,
    poly_deriv,
    poly_eval,
    poly_mul,
    poly_roots,
    poly_sub,
)
from errors import PreconditionError, ValidationError

logger = logging.getLogger(__name__)

TOL_AXIS = 1e-9

# L-infinity norms of functions with poles on the imaginary axis.
INFINITE_NORM = math.inf


class Stability(str, Enum):
    STRICTLY_UNSTABLE = "strictly_unstable"
    MARGINAL = "marginal"
    STABLE = "stable"


@dataclass(frozen=True)
class StabilityReport:
    """Root locations of a characteristic polynomial relative to the imaginary axis."""

    roots: Tuple[complex, ...]
    classification: Stability
    n_crhp: int
    n_axis: int
    stability_margin: float

    @property
    def is_strictly_unstable(self) -> bool:
        return self.classification is Stability.STRICTLY_UNSTABLE

    @property
    def is_stable(self) -> bool:
        return self.classification is Stability.STABLE


def classify_stability(p: ComplexPoly, tol_axis: float = TOL_AXIS, method: str = "companion") -> StabilityReport:
    """Classify p by the real parts of its roots.

    Raises:
        ValidationError: p is constant
    """
    if p.is_zero or p.degree < 1:
        raise ValidationError("stability of a constant polynomial is undefined")
    roots = poly_roots(p, method=method)
    real = roots.real
    n_crhp = int(np.sum(real > tol_axis))
    n_axis = int(np.sum(np.abs(real) <= tol_axis))
    if n_crhp:
        classification = Stability.STRICTLY_UNSTABLE
    elif n_axis:
        classification = Stability.MARGINAL
    else:
        classification = Stability.STABLE
    order = np.lexsort((roots.imag, roots.real))
    return StabilityReport(
        roots=tuple(complex(r) for r in roots[order]),
        classification=classification,
        n_crhp=n_crhp,
        n_axis=n_axis,
        stability_margin=float(np.max(real)),
    )


def _on_axis(p: ComplexPoly) -> ComplexPoly:
    """Coefficients of w -> p(jw) as a polynomial in the real variable w."""
    powers = np.arange(p.degree, -1, -1)
    return ComplexPoly(p.coeffs * (1j ** powers))


def squared_magnitude(p: ComplexPoly) -> ComplexPoly:
    """|p(jw)|^2 as a real-coefficient polynomial in w."""
    pw = _on_axis(p)
    return ComplexPoly(poly_mul(pw, poly_conj(pw)).coeffs.real)


def linf_peak(g: RationalFn, tol_axis: float = TOL_AXIS) -> Tuple[float, float]:
    """Supremum of |g(jw)| over real w and a frequency where it is attained.

    The maximum is searched among the real critical points of |g(jw)|^2,
    w = 0 and the |w| -> inf limit. A pole on the imaginary axis gives
    (INFINITE_NORM, imaginary part of that pole). The returned frequency is
    ``math.inf`` when the supremum is the high-frequency limit.

    Raises:
        ValidationError: g is improper
    """
    if not g.is_proper:
        raise ValidationError("L-infinity norm of an improper function is unbounded")
    if g.num.is_zero:
        return 0.0, 0.0
    if g.den.degree >= 1:
        poles = poly_roots(g.den)
        axis = np.abs(poles.real) <= tol_axis
        if np.any(axis):
            return INFINITE_NORM, float(poles[axis][0].imag)

    numer = squared_magnitude(g.num)
    denom = squared_magnitude(g.den)
    critical = poly_sub(poly_mul(poly_deriv(numer), denom), poly_mul(numer, poly_deriv(denom)))

    candidates = [0.0]
    if not critical.is_zero and critical.degree >= 1:
        candidates.extend(float(r.real) for r in poly_roots(critical))
    omegas = np.array(candidates)
    s = 1j * omegas
    values = np.abs(poly_eval(g.num, s) / poly_eval(g.den, s))
    best = int(np.argmax(values))
    peak, omega = float(values[best]), float(omegas[best])

    if g.num.degree == g.den.degree:
        tail = abs(g.num.leading / g.den.leading)
        if tail > peak:
            peak, omega = tail, math.inf
    logger.debug("L-inf peak %.12g at w=%.6g from %d candidates", peak, omega, len(candidates))
    return peak, omega


def linf_norm(g: RationalFn, tol_axis: float = TOL_AXIS) -> float:
    return linf_peak(g, tol_axis)[0]


def hinf_norm(g: RationalFn, tol_axis: float = TOL_AXIS) -> float:
    """H-infinity norm of a proper stable g.

    Raises:
        ValidationError: g is improper
        PreconditionError: g has poles in the closed right half plane
    """
    if not g.is_proper:
        raise ValidationError("H-infinity norm of an improper function is unbounded")
    if g.den.degree >= 1 and not classify_stability(g.den, tol_axis).is_stable:
        raise PreconditionError("H-infinity norm undefined: function is not stable")
    return linf_norm(g, tol_axis)


def batch_max_real_part(coeffs: np.ndarray) -> np.ndarray:
    """Largest root real part of every polynomial in a stacked coefficient array.

    ``coeffs`` has shape (..., d + 1), descending powers. Rows are solved
    together as a stack of companion matrices; rows whose leading coefficient
    vanishes fall back to the single-polynomial route.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    shape = coeffs.shape[:-1]
    flat = coeffs.reshape(-1, coeffs.shape[-1])
    out = np.empty(flat.shape[0])
    regular = np.abs(flat[:, 0]) > 0.0
    degree = flat.shape[1] - 1

    rows = flat[regular]
    if rows.size and degree == 0:
        out[regular] = -np.inf
    elif rows.size and degree == 1:
        out[regular] = (-rows[:, 1] / rows[:, 0]).real
    elif rows.size:
        mats = np.zeros((rows.shape[0], degree, degree), dtype=complex)
        mats[:, 0, :] = -rows[:, 1:] / rows[:, :1]
        idx = np.arange(1, degree)
        mats[:, idx, idx - 1] = 1.0
        out[regular] = np.linalg.eigvals(mats).real.max(axis=1)

    for i in np.nonzero(~regular)[0]:
        p = ComplexPoly(flat[i])
        out[i] = -np.inf if p.degree < 1 else float(np.max(poly_roots(p).real))
    return out.reshape(shape)
