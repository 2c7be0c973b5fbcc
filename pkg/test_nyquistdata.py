#!/usr/bin/env python3
"""Tests for the inverse Nyquist and value-set data."""

import math

import numpy as np
import pytest

from complexpoly import RationalFn
from errors import ValidationError
from nyquistdata import (
    FrequencyGrid,
    crossing_frequency,
    eigen_markers,
    inverse_nyquist_curve,
    marker_band_gap,
    monotone_gain_check,
    value_set_band,
)

FIRST_ORDER = RationalFn([1], [1, 1])
RHO_PLUS = (3 * math.cos(math.pi / 9) - 1) / 3


def test_grid_validation():
    with pytest.raises(ValidationError):
        FrequencyGrid([])
    with pytest.raises(ValidationError, match="strictly increasing"):
        FrequencyGrid([0.0, 1.0, 1.0])
    with pytest.raises(ValidationError):
        FrequencyGrid([0.0, math.inf])
    grid = FrequencyGrid.log_spaced(1e-2, 1e2, 101)
    assert len(grid) == 102
    assert grid.omegas[0] == 0.0
    assert not grid.omegas.flags.writeable


def test_inverse_curve_of_first_order_agent():
    """phi(jw) = 1 + jw for h = 1/(s+1)."""
    grid = FrequencyGrid([0.0, 1.0, 2.0])
    curve = inverse_nyquist_curve(FIRST_ORDER, grid)
    assert [omega for omega, _ in curve] == [0.0, 1.0, 2.0]
    assert curve[1][1] == pytest.approx(1 + 1j)
    assert curve[2][1] == pytest.approx(1 + 2j)


def test_inverse_curve_rejects_axis_zero():
    """h = s/(s+1) vanishes at w = 0."""
    with pytest.raises(ValidationError, match="omega = 0"):
        inverse_nyquist_curve(RationalFn([1, 0], [1, 1]), FrequencyGrid([0.0, 1.0]))


def test_value_set_band_is_a_circle_image():
    """Every boundary point b satisfies |center/b - 1| = rho."""
    grid = FrequencyGrid.log_spaced(1e-2, 1e2, 21)
    band = value_set_band(FIRST_ORDER, 0.3, grid, alphas=16)
    assert band.boundary.shape == (22, 16)
    ratios = np.abs(band.centers[:, None] / band.boundary - 1)
    assert np.allclose(ratios, 0.3)
    assert len(list(band.rows())) == 22 * 16


def test_value_set_band_rejects_bad_radius():
    grid = FrequencyGrid([0.0, 1.0])
    for rho in (0.0, 1.0, -0.2):
        with pytest.raises(ValidationError):
            value_set_band(FIRST_ORDER, rho, grid)


def test_eigen_markers():
    markers = eigen_markers(9, 3)
    assert markers[0].real == pytest.approx(2.8191, abs=1e-4)
    assert markers[0].imag == pytest.approx(1.0261, abs=1e-4)
    assert len(markers) == 9


def test_first_order_gain_is_monotone():
    curve = inverse_nyquist_curve(FIRST_ORDER, FrequencyGrid.log_spaced())
    assert monotone_gain_check(curve)


def test_resonant_agent_gain_is_not_monotone():
    """h = 1/(s^2 + 0.2 s + 1) has |phi| dipping near w = 1."""
    curve = inverse_nyquist_curve(RationalFn([1], [1, 0.2, 1]), FrequencyGrid.log_spaced(1e-2, 1e2, 401))
    assert not monotone_gain_check(curve)
    assert monotone_gain_check([(0.0, 5.0), (1.0, 1.0)]), "w = 0 is outside the check"


def test_band_is_tangent_to_first_marker_at_rho_plus():
    """At rho_plus the band touches lambda_1 and already covers lambda_2."""
    lam = eigen_markers(9, 3)
    assert marker_band_gap(FIRST_ORDER, RHO_PLUS, lam[0]) == pytest.approx(0.0, abs=1e-9)
    assert marker_band_gap(FIRST_ORDER, RHO_PLUS, lam[1]) < 0


def test_crossing_frequency():
    """|1 + jw| = 3 at w = sqrt(8); never equal to 0.5."""
    assert crossing_frequency(FIRST_ORDER, 3.0) == pytest.approx(math.sqrt(8), rel=1e-9)
    assert crossing_frequency(FIRST_ORDER, 0.5) is None
    with pytest.raises(ValidationError):
        crossing_frequency(FIRST_ORDER, 0.0)


def test_inverse_curve_is_conjugate_symmetric():
    """phi(-jw) = conj(phi(jw)) for a real agent."""
    h = RationalFn([3], [1, 4, 3])
    positive = FrequencyGrid.log_spaced(1e-2, 1e2, 101, include_zero=False)
    negative = FrequencyGrid(-positive.omegas[::-1])
    upper = [value for _, value in inverse_nyquist_curve(h, positive)]
    lower = [value for _, value in inverse_nyquist_curve(h, negative)][::-1]
    assert np.allclose(lower, np.conj(upper), rtol=1e-12, atol=0)
