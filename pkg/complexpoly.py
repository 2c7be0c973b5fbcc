"""Complex-coefficient polynomial and rational function arithmetic.

Coefficients are always stored in descending powers of s, so ``[1, 4, 3]``
reads as s^2 + 4s + 3. Values are immutable once built.
"""

import logging
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.linalg import companion
from scipy.optimize import linear_sum_assignment

from errors import NumericalError, PoleEvaluationError, ValidationError

logger = logging.getLogger(__name__)

TOL_COEFF = 1e-12
TOL_RESIDUAL = 1e-8
TOL_CANCEL = 1e-7

Scalar = Union[int, float, complex]


def _canonical(coeffs, reference=None) -> np.ndarray:
    """Strip zero leading coefficients.

    With ``reference`` (per-coefficient magnitudes of the operands that
    produced ``coeffs``), a leading coefficient also counts as zero when it is
    below TOL_COEFF times its reference, i.e. when it is cancellation noise.
    """
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex)).ravel()
    if c.size == 0:
        return np.zeros(1, dtype=complex)
    if not np.all(np.isfinite(c)):
        raise ValidationError("polynomial coefficients must be finite")
    negligible = np.abs(c) == 0.0
    if reference is not None:
        negligible |= np.abs(c) <= TOL_COEFF * np.asarray(reference, dtype=float)
    keep = np.nonzero(~negligible)[0]
    if keep.size == 0:
        return np.zeros(1, dtype=complex)
    return c[keep[0]:].copy()


class ComplexPoly:
    """Univariate polynomial with complex coefficients (descending powers)."""

    def __init__(self, coeffs: Union[Sequence[Scalar], np.ndarray, "ComplexPoly"], reference=None):
        if isinstance(coeffs, ComplexPoly):
            coeffs = coeffs.coeffs
        c = _canonical(coeffs, reference)
        c.setflags(write=False)
        self._coeffs = c

    @classmethod
    def from_roots(cls, roots: Iterable[Scalar], gain: Scalar = 1.0) -> "ComplexPoly":
        return cls(complex(gain) * np.poly(np.asarray(list(roots), dtype=complex)))

    @classmethod
    def constant(cls, value: Scalar) -> "ComplexPoly":
        return cls([value])

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def degree(self) -> int:
        return len(self._coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return len(self._coeffs) == 1 and self._coeffs[0] == 0

    @property
    def leading(self) -> complex:
        return complex(self._coeffs[0])

    def __call__(self, s):
        return poly_eval(self, s)

    def __add__(self, other):
        return poly_add(self, _as_poly(other))

    __radd__ = __add__

    def __sub__(self, other):
        return poly_sub(self, _as_poly(other))

    def __rsub__(self, other):
        return poly_sub(_as_poly(other), self)

    def __mul__(self, other):
        return poly_mul(self, _as_poly(other))

    __rmul__ = __mul__

    def __neg__(self):
        return poly_scale(self, -1.0)

    def __pow__(self, k: int):
        return poly_pow(self, k)

    def __repr__(self) -> str:
        return f"ComplexPoly({np.array2string(self._coeffs, precision=6)})"


def _as_poly(value) -> ComplexPoly:
    if isinstance(value, ComplexPoly):
        return value
    if np.isscalar(value):
        return ComplexPoly([value])
    return ComplexPoly(value)


def _pad(c: np.ndarray, length: int) -> np.ndarray:
    return np.concatenate([np.zeros(length - len(c), dtype=complex), c])


def poly_eval(p: ComplexPoly, s):
    """Evaluate p at s (scalar or array) by the Horner recurrence."""
    s_arr = np.asarray(s, dtype=complex)
    acc = np.zeros_like(s_arr)
    for c in p.coeffs:
        acc = acc * s_arr + c
    if acc.ndim == 0:
        return complex(acc)
    return acc


def poly_add(a: ComplexPoly, b: ComplexPoly) -> ComplexPoly:
    length = max(len(a.coeffs), len(b.coeffs))
    x, y = _pad(a.coeffs, length), _pad(b.coeffs, length)
    return ComplexPoly(x + y, reference=np.maximum(np.abs(x), np.abs(y)))


def poly_sub(a: ComplexPoly, b: ComplexPoly) -> ComplexPoly:
    return poly_add(a, poly_scale(b, -1.0))


def poly_mul(a: ComplexPoly, b: ComplexPoly) -> ComplexPoly:
    return ComplexPoly(np.convolve(a.coeffs, b.coeffs))


def poly_scale(a: ComplexPoly, c: Scalar) -> ComplexPoly:
    return ComplexPoly(a.coeffs * complex(c))


def poly_pow(a: ComplexPoly, k: int) -> ComplexPoly:
    """a**k by repeated squaring; k must be a non-negative integer."""
    if int(k) != k or k < 0:
        raise ValidationError(f"polynomial power must be a non-negative integer, got {k}")
    k = int(k)
    result = ComplexPoly([1.0])
    base = a
    while k:
        if k & 1:
            result = poly_mul(result, base)
        k >>= 1
        if k:
            base = poly_mul(base, base)
    return result


def poly_deriv(a: ComplexPoly) -> ComplexPoly:
    if a.degree < 1:
        return ComplexPoly([0.0])
    powers = np.arange(a.degree, 0, -1)
    return ComplexPoly(a.coeffs[:-1] * powers)


def poly_conj(a: ComplexPoly) -> ComplexPoly:
    """Polynomial with conjugated coefficients, so that conj(a)(conj(s)) = conj(a(s))."""
    return ComplexPoly(np.conj(a.coeffs))


def is_real(a: ComplexPoly) -> bool:
    scale = np.max(np.abs(a.coeffs))
    return bool(np.all(np.abs(a.coeffs.imag) <= TOL_COEFF * max(scale, 1e-300)))


def residual_bound(p: ComplexPoly, r: complex) -> float:
    return TOL_RESIDUAL * float(np.max(np.abs(p.coeffs))) * max(1.0, abs(r)) ** p.degree


def _companion_roots(c: np.ndarray) -> np.ndarray:
    if len(c) == 2:
        return np.array([-c[1] / c[0]], dtype=complex)
    return np.linalg.eigvals(companion(c)).astype(complex)


def _newton_polish(p: ComplexPoly, roots: np.ndarray, steps: int = 2) -> np.ndarray:
    dp = poly_deriv(p)
    polished = roots.copy()
    for _ in range(steps):
        value = poly_eval(p, polished)
        slope = poly_eval(dp, polished)
        with np.errstate(divide="ignore", invalid="ignore"):
            candidate = polished - value / slope
        ok = np.isfinite(candidate)
        improved = np.zeros_like(ok)
        improved[ok] = np.abs(poly_eval(p, candidate[ok])) < np.abs(value[ok])
        polished = np.where(improved, candidate, polished)
    return polished


def _aberth_roots(c: np.ndarray, max_iter: int = 800) -> np.ndarray:
    """Aberth-Ehrlich simultaneous iteration started on a circle."""
    n = len(c) - 1
    dc = np.polyder(c)
    ratios = np.abs(c[1:] / c[0]) ** (1.0 / np.arange(1, n + 1))
    radius = max(float(np.max(ratios)), 1e-3)
    z = radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    for _ in range(max_iter):
        pz = np.polyval(c, z)
        dpz = np.polyval(dc, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = np.where(dpz != 0, pz / dpz, 0.0)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            step = newton / (1.0 - newton * inv.sum(axis=1))
        step[~np.isfinite(step) | (pz == 0)] = 0.0
        z = z - step
        if np.all(np.abs(step) <= 4e-16 * np.maximum(1.0, np.abs(z))):
            break
    return z


def poly_roots(p: ComplexPoly, method: str = "companion") -> np.ndarray:
    """All `degree` roots of p, with multiplicity.

    ``method`` selects the companion-matrix eigenvalue route (default, Newton
    polished) or the Aberth-Ehrlich iteration.

    Raises:
        ValidationError: p is constant or zero
        NumericalError: a root fails the residual test
    """
    if p.is_zero or p.degree < 1:
        raise ValidationError("no roots defined")
    if method == "companion":
        roots = _newton_polish(p, _companion_roots(p.coeffs))
    elif method == "aberth":
        roots = _aberth_roots(p.coeffs)
    else:
        raise ValidationError(f"unknown root method: {method}")
    residuals = np.abs(poly_eval(p, roots))
    bounds = np.array([residual_bound(p, r) for r in roots])
    if not np.all(residuals <= bounds):
        worst = int(np.argmax(residuals / bounds))
        raise NumericalError(
            f"root residual too large ({method}): |p({roots[worst]:.6g})| = {residuals[worst]:.3g}"
        )
    return roots


def root_match_distance(a: Sequence[complex], b: Sequence[complex]) -> float:
    """Largest distance between two root multisets after optimal pairing."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValidationError(f"root multisets differ in size: {a.size} vs {b.size}")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols]))


class RationalFn:
    """Ratio num/den of two complex polynomials with no approximate common root."""

    def __init__(self, num, den, check_coprime: bool = True):
        self.num = _as_poly(num)
        self.den = _as_poly(den)
        if self.den.is_zero:
            raise ValidationError("denominator is the zero polynomial")
        if check_coprime:
            self._check_coprime()

    @classmethod
    def constant(cls, value: Scalar) -> "RationalFn":
        return cls([value], [1.0])

    def _check_coprime(self) -> None:
        if self.num.is_zero or self.num.degree < 1 or self.den.degree < 1:
            return
        zeros = poly_roots(self.num)
        poles = poly_roots(self.den)
        gap = np.abs(zeros[:, None] - poles[None, :])
        limit = TOL_CANCEL * np.maximum(1.0, np.abs(poles))[None, :]
        if np.any(gap <= limit):
            i, j = np.unravel_index(np.argmin(gap / limit), gap.shape)
            raise NumericalError(
                f"approximate common root of numerator and denominator near s = {poles[j]:.6g}"
            )

    @property
    def is_proper(self) -> bool:
        return self.num.is_zero or self.num.degree <= self.den.degree

    @property
    def is_strictly_proper(self) -> bool:
        return self.num.is_zero or self.num.degree < self.den.degree

    @property
    def is_real(self) -> bool:
        return is_real(self.num) and is_real(self.den)

    def reciprocal(self) -> "RationalFn":
        if self.num.is_zero:
            raise ValidationError("reciprocal of the zero function")
        return RationalFn(self.den, self.num, check_coprime=False)

    def __call__(self, s):
        return rat_eval(self, s)

    def __repr__(self) -> str:
        return f"RationalFn(num={self.num!r}, den={self.den!r})"


def rat_eval(r: RationalFn, s):
    """num(s)/den(s); raises PoleEvaluationError at (numerically) a pole."""
    s_arr = np.asarray(s, dtype=complex)
    den = poly_eval(r.den, s_arr)
    magnitude = np.abs(s_arr)
    scale = np.zeros_like(magnitude)
    for c in r.den.coeffs:
        scale = scale * magnitude + abs(c)
    hit = np.abs(den) <= TOL_RESIDUAL * 1e-4 * scale
    if np.any(hit):
        raise PoleEvaluationError(complex(s_arr[hit].ravel()[0]) if s_arr.ndim else complex(s_arr))
    value = poly_eval(r.num, s_arr) / den
    if np.ndim(value) == 0:
        return complex(value)
    return value
