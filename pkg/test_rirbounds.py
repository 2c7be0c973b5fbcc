#!/usr/bin/env python3
"""Tests for the RIR lower bounds, homogenization, stabilizer search and report assembly."""

import cmath
import math

import numpy as np
import pytest

from complexpoly import RationalFn
from config_reader import AnalysisSettings
from cyclicnet import CyclicNetwork, DiagPerturbation, nominal_roots
from errors import PreconditionError, ValidationError
from rirbounds import (
    StabilizerCandidate,
    convexity_witness,
    homogenize,
    reverify_candidate,
    rho_c_bruteforce,
    rho_c_estimate,
    rho_exact_first_order,
    rho_p,
    rho_plus,
    rir_report,
    search_stabilizer_allpass,
    verify_perturbation,
)

SECOND_ORDER = RationalFn([3], [1, 4, 3])
CLOSED_FORM = 1 - 1 / (3 * math.cos(math.pi / 9))
NORM_BASED = (3 * math.cos(math.pi / 9) - 1) / 3
FAST = AnalysisSettings(a_grid_size=40, arg_grid_size=360)


def example_network():
    """n=9, mu=3, K=tau=1."""
    return CyclicNetwork.first_order_network(K=1, tau=1, mu=3, n=9)


def _disk_sample(rng, r, size):
    radius = r * np.sqrt(rng.uniform(0, 1, size))
    return radius * np.exp(2j * np.pi * rng.uniform(0, 1, size))


def test_first_order_closed_form_and_norm():
    """Both first-order values are returned and their disagreement is flagged."""
    result = rho_exact_first_order(K=1, tau=1, mu=3, n=9)
    assert result.closed_form == pytest.approx(CLOSED_FORM, abs=1e-12)
    assert result.closed_form == pytest.approx(0.6453, abs=1e-4)
    assert result.norm_based == pytest.approx(NORM_BASED, rel=1e-9)
    assert result.norm_based == pytest.approx(0.6064, abs=1e-4)
    assert result.agree is False
    assert any(flag.startswith("closed_form_vs_norm_based") for flag in result.flags)


def test_first_order_predicates_disagree():
    """K=2, mu=3, n=3: K < mu cos(pi/n) fails yet the root test shows instability."""
    result = rho_exact_first_order(K=2, tau=1, mu=3, n=3)
    assert result.stated_predicate is False
    assert result.root_predicate is True
    assert any(flag.startswith("instability_predicates_disagree") for flag in result.flags)
    assert any(flag.startswith("closed_form_nonpositive") for flag in result.flags)
    assert result.norm_based == pytest.approx(1 / 3, rel=1e-9)


def test_first_order_small_gain_is_precondition_error():
    with pytest.raises(PreconditionError, match="not strictly unstable"):
        rho_exact_first_order(K=1, tau=1, mu=0.1, n=3)


def test_lower_bounds_for_example():
    """rho_p is set by mode 2, rho_plus by mode 1."""
    net = example_network()
    assert rho_p(net) == pytest.approx(1 / 6, rel=1e-9)
    value, unstable = rho_plus(net)
    assert value == pytest.approx(NORM_BASED, rel=1e-9)
    assert unstable == (1, 2, 8, 9)


def test_rho_plus_requires_unstable_modes():
    stable = CyclicNetwork.first_order_network(K=1, tau=1, mu=0.1, n=3)
    with pytest.raises(PreconditionError, match="rho_plus undefined"):
        rho_plus(stable)


def test_homogenize_example():
    delta = homogenize([0.1, 0.1j], r=0.1)
    assert delta.real == pytest.approx(0.050115, abs=1e-5)
    assert delta.imag == pytest.approx(0.052376, abs=1e-5)
    assert abs(delta) == pytest.approx(0.0725, abs=1e-4)


def test_homogenize_identical_values():
    assert homogenize([0.3 - 0.2j] * 5, r=0.5) == pytest.approx(0.3 - 0.2j)


def test_homogenize_hypothesis_checked():
    with pytest.raises(PreconditionError, match="outside lemma hypothesis"):
        homogenize([0.5], r=0.1)
    with pytest.raises(PreconditionError, match="outside lemma hypothesis"):
        homogenize([0.5], r=1.0)
    with pytest.raises(ValidationError):
        homogenize([], r=0.5)


def test_homogenization_suite():
    """10^4 random tuples: product identity holds and the result stays in the disk."""
    rng = np.random.default_rng(1)
    failures = 0
    for _ in range(10_000):
        n = int(rng.choice([3, 5, 7, 9]))
        r = float(rng.choice([0.1, 0.5, 0.9, 0.99]))
        deltas = _disk_sample(rng, r, n)
        delta = homogenize(deltas, r)
        product = np.prod(1 + deltas)
        if abs(product - (1 + delta) ** n) > 1e-10 * abs(product) or abs(delta) > r + 1e-12:
            failures += 1
    assert failures == 0


def test_log_disk_convexity_suite():
    """10^4 random convex combinations of log(1 + delta) stay inside the disk."""
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        r = float(rng.uniform(0.01, 0.99))
        a, b = _disk_sample(rng, r, 2)
        t = float(rng.uniform(0, 1))
        assert convexity_witness(cmath.log(1 + a), cmath.log(1 + b), t, r)


def test_convexity_witness_checks_inputs():
    with pytest.raises(PreconditionError):
        convexity_witness(cmath.log(1.5), 0.0, 0.5, 0.1)
    with pytest.raises(PreconditionError):
        convexity_witness(0.0, 0.0, 1.5, 0.1)


def test_stabilizer_search_example():
    """The best verified all-pass stabilizer lies between rho_plus and the constant-gain value."""
    net = example_network()
    best = search_stabilizer_allpass(net)
    assert best is not None and best.verified
    assert best.rho >= NORM_BASED - 1e-6
    assert best.rho <= CLOSED_FORM + 2e-4
    assert best.stability_margin < -1e-6

    verdict = reverify_candidate(net, best)
    assert verdict.stabilizes
    assert verdict.max_root_real_part < -1e-6
    assert verdict.max_norm == pytest.approx(best.rho, rel=1e-6)


def test_stabilizer_search_is_worker_independent():
    net = CyclicNetwork(n=5, mu=5.0, h=SECOND_ORDER)
    grid = np.logspace(-1, 1, 12)
    serial = search_stabilizer_allpass(net, a_grid=grid, workers=1)
    parallel = search_stabilizer_allpass(net, a_grid=grid, workers=2)
    assert serial == parallel


def test_stabilizer_search_preconditions():
    stable = CyclicNetwork.first_order_network(K=1, tau=1, mu=0.1, n=3)
    with pytest.raises(PreconditionError):
        search_stabilizer_allpass(stable)
    net = example_network()
    with pytest.raises(PreconditionError):
        search_stabilizer_allpass(net, rho_bracket=(0.1, 0.9))
    with pytest.raises(ValidationError):
        search_stabilizer_allpass(net, rho_bracket=(0.9, 0.8))


def test_marginal_network_is_stabilized_by_small_gain():
    """n=3, mu=2, K=tau=1 sits on the axis: delta = -0.5 stabilizes and the search does better."""
    net = CyclicNetwork.first_order_network(K=1, tau=1, mu=2, n=3)
    verdict = verify_perturbation(net, DiagPerturbation.homogeneous(RationalFn.constant(-0.5), 3))
    assert verdict.stabilizes
    assert verdict.max_root_real_part == pytest.approx(-0.5)
    assert verdict.max_norm == pytest.approx(0.5)

    best = search_stabilizer_allpass(net, a_grid=[1.0])
    assert best is not None and best.rho <= 0.5
    assert rho_c_estimate(net, arg_grid_size=90) <= 0.5


def test_zero_perturbation_does_not_stabilize():
    net = example_network()
    verdict = verify_perturbation(net, DiagPerturbation.constant([0.0] * 9))
    assert not verdict.stabilizes
    assert verdict.max_root_real_part == pytest.approx(3 * math.cos(math.pi / 9) - 1, rel=1e-9)
    assert verdict.max_norm == 0.0


def test_candidate_delta_shapes():
    allpass = StabilizerCandidate(rho=0.5, a=2.0, sign=-1, verified=True, stability_margin=-0.1)
    assert allpass.delta(0) == pytest.approx(0.5)
    assert abs(allpass.delta(3j)) == pytest.approx(0.5)
    constant = StabilizerCandidate(rho=0.5, a=math.inf, sign=-1, verified=True, stability_margin=-0.1)
    assert constant.is_constant
    assert constant.delta(1j) == pytest.approx(-0.5)
    assert constant.cli_delta() == "-0.5:1"
    assert allpass.cli_delta() == "-0.5,1:1,2"
    assert allpass.sort_key() < constant.sort_key()


def test_complex_gain_estimate_bounds():
    """n=3, mu=3, K=tau=1: rho_plus = 1/6 and the complex-gain radius is 1/3."""
    net = CyclicNetwork.first_order_network(K=1, tau=1, mu=3, n=3)
    estimate = rho_c_estimate(net)
    assert rho_plus(net)[0] == pytest.approx(1 / 6, rel=1e-9)
    assert 1 / 3 - 1e-6 <= estimate <= 1 / 3 + 1e-3
    brute = rho_c_bruteforce(net)
    assert brute >= 1 / 6
    assert rho_c_estimate(net, per_mode=False) <= estimate + 1e-12


def test_bruteforce_limited_to_small_networks():
    with pytest.raises(ValidationError, match="n <= 5"):
        rho_c_estimate(example_network(), per_mode=False)


def test_report_for_example():
    """All radii of the first-order example, with the stabilizer position stated."""
    report = rir_report(example_network(), FAST)
    assert report.rho_p == pytest.approx(1 / 6, rel=1e-9)
    assert report.rho_plus == pytest.approx(NORM_BASED, rel=1e-9)
    assert report.closed_form_first_order == pytest.approx(CLOSED_FORM, abs=1e-12)
    assert report.agree is False
    assert report.unstable_indices == (1, 2, 8, 9)
    assert report.rho_upper_homogeneous is not None
    assert report.rho_plus <= report.rho_upper_homogeneous + 1e-6
    assert report.rho_plus <= report.rho_c_estimate + 1e-6
    assert any(flag.startswith("stabilizer_position") for flag in report.consistency_flags)


def test_report_for_stable_network():
    report = rir_report(CyclicNetwork.first_order_network(K=1, tau=1, mu=0.1, n=3), FAST)
    assert report.rho_plus is None
    assert report.rho_upper_homogeneous is None and report.rho_c_estimate is None
    assert any(flag.startswith("rho_plus_undefined") for flag in report.consistency_flags)


def test_bound_ordering_matrix():
    """rho_p <= rho_plus <= upper estimates over first- and second-order networks."""
    configurations = []
    for K in (1.0, 2.0):
        for tau in (0.5, 1.0):
            for mu in (2.0, 3.0):
                for n in (3, 5, 9):
                    configurations.append(CyclicNetwork.first_order_network(K, tau, mu, n))
    for mu in (5.0, 8.0):
        for n in (3, 5, 7, 9, 11):
            configurations.append(CyclicNetwork(n=n, mu=mu, h=SECOND_ORDER))

    checked = 0
    for net in configurations:
        if not nominal_roots(net).is_strictly_unstable:
            continue
        report = rir_report(net, FAST)
        assert report.rho_p <= report.rho_plus + 1e-12
        assert report.rho_plus <= report.rho_c_estimate + 1e-6
        if report.rho_upper_homogeneous is not None:
            assert report.rho_plus <= report.rho_upper_homogeneous + 1e-6
        checked += 1
    assert checked >= 30


def test_log_disk_convexity_on_boundary():
    """Convex combinations of logs of points on the circle |delta| = 0.99 stay inside the disk."""
    rng = np.random.default_rng(3)
    r = 0.99
    failures = 0
    for _ in range(10_000):
        a, b = r * np.exp(2j * np.pi * rng.uniform(0, 1, 2))
        t = float(rng.uniform(0, 1))
        if not convexity_witness(cmath.log(1 + a), cmath.log(1 + b), t, r):
            failures += 1
    assert failures == 0
