#!/usr/bin/env python3
"""Tests for sweeps over odd network sizes."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

import sweep_processor
from complexpoly import RationalFn
from config_reader import AnalysisSettings
from cyclicnet import circulant_eigenvalues
from errors import NumericalError, ValidationError
from sweep_processor import BASE_COLUMNS, FIRST_ORDER_COLUMNS, SweepProcessor, SweepRow

SECOND_ORDER = RationalFn([3], [1, 4, 3])
FAST = AnalysisSettings(a_grid_size=20, arg_grid_size=180)


def _mode_gain(lam, omega):
    """|lambda h / (1 - lambda h)| at jw for h = 3/((s+1)(s+3))."""
    phi = (1j * omega + 1) * (1j * omega + 3) / 3
    return abs(lam / (phi - lam))


def _rho_p_oracle(n, mu):
    """min_k 1/||g_k|| from a dense two-sided grid refined by a bounded scalar search."""
    half = np.logspace(-4, 3, 20001)
    omegas = np.concatenate([-half[::-1], [0.0], half])
    worst = 0.0
    for lam in circulant_eigenvalues(n, mu):
        values = _mode_gain(lam, omegas)
        i = int(np.argmax(values))
        lo, hi = omegas[max(i - 1, 0)], omegas[min(i + 1, len(omegas) - 1)]
        refined = minimize_scalar(lambda w: -_mode_gain(lam, w), bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12})
        worst = max(worst, values[i], -refined.fun)
    return 1.0 / worst


def test_odd_sizes():
    processor = SweepProcessor()
    assert processor.odd_sizes(3, 21) == list(range(3, 22, 2))
    assert processor.odd_sizes(1, 7) == [3, 5, 7]
    assert processor.odd_sizes(4, 9) == [5, 7, 9]
    assert processor.odd_sizes(9, 3) == []
    with pytest.raises(ValidationError):
        processor.odd_sizes(3.5, 9)


def test_columns_depend_on_agent():
    processor = SweepProcessor()
    assert processor.columns(SECOND_ORDER) == BASE_COLUMNS + ["error"]
    assert processor.columns(RationalFn([1], [1, 1])) == BASE_COLUMNS + FIRST_ORDER_COLUMNS + ["error"]


def test_empty_range_gives_no_rows():
    assert SweepProcessor(FAST).process_sweep(SECOND_ORDER, 5.0, []) == []


def test_second_order_sweep_shape():
    """Every odd n in [3, 11] is strictly unstable and rho_p matches a grid oracle."""
    processor = SweepProcessor(FAST)
    rows = processor.process_sweep(SECOND_ORDER, 5.0, processor.odd_sizes(3, 11))
    assert [row.n for row in rows] == [3, 5, 7, 9, 11]
    for row in rows:
        assert row.error is None
        assert row.nominal_unstable
        assert row.rho_p == pytest.approx(_rho_p_oracle(row.n, 5.0), rel=1e-6)
        assert row.rho_p <= row.rho_plus + 1e-12
        assert row.rho_plus <= row.rho_c_estimate + 1e-6
        assert row.closed_form_first_order is None


def test_first_order_sweep_carries_closed_form():
    rows = SweepProcessor(FAST).process_sweep(RationalFn([1], [1, 1]), 3.0, [9])
    (row,) = rows
    assert row.closed_form_first_order == pytest.approx(1 - 1 / (3 * math.cos(math.pi / 9)), abs=1e-12)
    assert row.norm_based_first_order == pytest.approx(row.rho_plus, rel=1e-9)


def test_small_gain_rows_are_empty():
    rows = SweepProcessor(FAST).process_sweep(RationalFn([1], [1, 1]), 0.5, [3, 5])
    assert rows == [SweepRow(n=3), SweepRow(n=5)]
    assert rows[0].as_dict()["rho_p"] is None


def test_failing_size_does_not_stop_sweep(monkeypatch):
    """A numerical failure for one n is recorded in its row and the sweep continues."""
    real_report = sweep_processor.rir_report

    def flaky_report(net, settings=None):
        if net.n == 5:
            raise NumericalError("root residual too large")
        return real_report(net, settings)

    monkeypatch.setattr(sweep_processor, "rir_report", flaky_report)
    rows = SweepProcessor(FAST).process_sweep(SECOND_ORDER, 5.0, [3, 5, 7])
    assert [row.n for row in rows] == [3, 5, 7]
    assert rows[1].error == "numerical: root residual too large"
    assert rows[0].error is None and rows[2].error is None


def test_unexpected_failure_is_recorded(monkeypatch):
    """A non-cycrir exception in one row becomes an internal error row."""
    real_report = sweep_processor.rir_report

    def broken_report(net, settings=None):
        if net.n == 3:
            raise np.linalg.LinAlgError("eigenvalues did not converge")
        return real_report(net, settings)

    monkeypatch.setattr(sweep_processor, "rir_report", broken_report)
    rows = SweepProcessor(FAST).process_sweep(SECOND_ORDER, 5.0, [3, 5])
    assert rows[0].error == "internal: LinAlgError: eigenvalues did not converge"
    assert rows[1].error is None and rows[1].nominal_unstable
