"""Frequency-response data for inverse Nyquist plots of a cyclic network.

Everything here produces numbers only: the inverse Nyquist curve
phi(jw) = 1/h(jw), the value set {phi(jw)/(1 + delta) : |delta| <= rho}
traced on its boundary, and the eigenvalue markers lambda_k.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from complexpoly import ComplexPoly, RationalFn, poly_roots, poly_scale, poly_sub, rat_eval
from cyclicnet import circulant_eigenvalues, modal_subsystem
from errors import PoleEvaluationError, ValidationError
from specnorm import TOL_AXIS, linf_norm, squared_magnitude

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-12


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing finite frequencies in rad/s."""

    omegas: np.ndarray

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float).ravel()
        if omegas.size == 0:
            raise ValidationError("frequency grid is empty")
        if not np.all(np.isfinite(omegas)):
            raise ValidationError("frequency grid must contain finite values only")
        if np.any(np.diff(omegas) <= 0):
            raise ValidationError("frequency grid must be strictly increasing")
        omegas.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)

    @classmethod
    def log_spaced(cls, low: float = 1e-3, high: float = 1e3, count: int = 2001,
                   include_zero: bool = True) -> "FrequencyGrid":
        if not 0 < low < high:
            raise ValidationError(f"need 0 < low < high, got [{low}, {high}]")
        omegas = np.logspace(np.log10(low), np.log10(high), count)
        if include_zero:
            omegas = np.concatenate([[0.0], omegas])
        return cls(omegas)

    def __len__(self) -> int:
        return len(self.omegas)


@dataclass(frozen=True)
class ValueSetBand:
    """Per frequency: the center phi(jw) and the boundary phi(jw)/(1 + rho e^{j alpha})."""

    rho: float
    omegas: np.ndarray
    alphas: np.ndarray
    centers: np.ndarray
    boundary: np.ndarray  # shape (len(omegas), len(alphas))

    def rows(self) -> Iterator[Tuple[float, float, complex]]:
        for i, omega in enumerate(self.omegas):
            for j, alpha in enumerate(self.alphas):
                yield float(omega), float(alpha), complex(self.boundary[i, j])


def inverse_nyquist_curve(h: RationalFn, grid: FrequencyGrid) -> List[Tuple[float, complex]]:
    """phi(jw) = 1/h(jw) at every grid frequency.

    Raises:
        ValidationError: h vanishes on the imaginary axis at a grid frequency
    """
    if h.num.is_zero:
        raise ValidationError("inverse Nyquist curve of h = 0 is undefined")
    phi = h.reciprocal()
    values = []
    for omega in grid.omegas:
        try:
            values.append((float(omega), rat_eval(phi, 1j * omega)))
        except PoleEvaluationError:
            raise ValidationError(f"h has a zero on the imaginary axis at omega = {omega:.6g} rad/s")
    return values


def value_set_band(h: RationalFn, rho: float, grid: FrequencyGrid, alphas: int = 256) -> ValueSetBand:
    """Boundary of {phi(jw)/(1 + delta) : |delta| <= rho} for a uniform grid of arg(delta).

    Raises:
        ValidationError: rho outside (0, 1) or alphas < 1
    """
    if not 0.0 < rho < 1.0:
        raise ValidationError(f"rho must lie in (0, 1), got {rho}")
    if alphas < 1:
        raise ValidationError("alphas must be a positive integer")
    centers = np.array([value for _, value in inverse_nyquist_curve(h, grid)])
    angles = 2 * np.pi * np.arange(alphas) / alphas
    boundary = centers[:, None] / (1.0 + rho * np.exp(1j * angles))[None, :]
    logger.debug("value set band: %d frequencies x %d angles at rho=%.6g", len(grid), alphas, rho)
    return ValueSetBand(rho=float(rho), omegas=grid.omegas, alphas=angles, centers=centers, boundary=boundary)


def eigen_markers(n: int, mu: float) -> np.ndarray:
    return circulant_eigenvalues(n, mu)


def monotone_gain_check(phi_samples: Sequence[Tuple[float, complex]]) -> bool:
    """True iff |phi(jw)| never decreases along the samples with w > 0."""
    # w <= 0 samples (the grid usually starts at 0) are outside the check
    mags = np.array([abs(value) for omega, value in phi_samples if omega > 0])
    if mags.size < 2:
        return True
    slack = MONOTONE_TOL * np.maximum(1.0, mags[:-1])
    return bool(np.all(np.diff(mags) >= -slack))


def marker_band_gap(h: RationalFn, rho: float, point: complex, tol_axis: float = TOL_AXIS) -> float:
    """Signed gap between a marker and the value-set boundary.

    point lies in the band at w iff |phi(jw)/point - 1| <= rho, and the
    smallest such ratio over w is 1/||g||_Linf with g = point h/(1 - point h).
    Zero means tangent to the boundary, negative means inside the band.
    """
    g = modal_subsystem(h, complex(point))
    return 1.0 / linf_norm(g, tol_axis) - rho


def crossing_frequency(h: RationalFn, mu: float) -> Optional[float]:
    """Smallest w > 0 with |phi(jw)| = mu, or None when the curve never crosses.

    Stands in for the lower-bound frequency of the perturbed curve, which
    needs its own definition of the perturbed phi.
    """
    if mu <= 0:
        raise ValidationError(f"mu must be positive, got {mu}")
    # |den(jw)|^2 - mu^2 |num(jw)|^2 = 0
    level = poly_sub(squared_magnitude(h.den), poly_scale(squared_magnitude(h.num), mu ** 2))
    if level.is_zero or level.degree < 1:
        return None
    roots = poly_roots(ComplexPoly(level.coeffs.real))
    real = roots.real[(np.abs(roots.imag) <= 1e-7 * np.maximum(1.0, np.abs(roots))) & (roots.real > 0)]
    if real.size == 0:
        return None
    return float(np.min(real))
