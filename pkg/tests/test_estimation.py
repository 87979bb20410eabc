"""Post-test estimation: exhaustive path oracles for the moment formulas,
the published interval, and the guard rails."""

import itertools
import math

import pytest

from curtail.design import TestDesign
from curtail.distributions import DomainError, binom_tail
from curtail.estimation import (
    EstimatorMoments,
    NotTerminalError,
    confidence_interval,
    estimator_moments,
    moments_limit_check,
    point_estimate,
)
from curtail.monitor import MonitorState, Status, feed_outcomes, monitor_new


def make_design(n, k, theta0=0.1, theta1=0.2):
    return TestDesign(n, k, binom_tail(k, n, theta0),
                      1 - binom_tail(k, n, theta1), "exact", theta0, theta1)


def brute_force_moments(n, k, theta):
    """E(theta_hat) and E(theta_hat^2) by enumerating all 2^N outcome paths.

    The estimate of a stopped trial depends only on the path prefix, but each
    full path carries its full probability, so summing over complete paths
    marginalizes the unobserved suffix automatically.
    """
    e1 = e2 = 0.0
    for bits in itertools.product((0, 1), repeat=n):
        p = 1.0
        s = 0
        th = None
        for i, b in enumerate(bits, start=1):
            p *= theta if b else (1.0 - theta)
            s += b
            if th is None and s == k + 1:
                th = (k + 1) / i
        if th is None:
            th = s / n
        e1 += p * th
        e2 += p * th * th
    return e1, e2


def dp_moments(n, k, theta):
    """Moments by dynamic programming over running states (no special
    functions), the independent oracle for larger N."""
    probs = {0: 1.0}
    e1 = e2 = 0.0
    for i in range(1, n + 1):
        stop = probs.get(k, 0.0) * theta
        th = (k + 1) / i
        e1 += stop * th
        e2 += stop * th * th
        new = {}
        for s, p in probs.items():
            new[s] = new.get(s, 0.0) + p * (1.0 - theta)
            if s < k:
                new[s + 1] = new.get(s + 1, 0.0) + p * theta
        probs = new
    for s, p in probs.items():
        th = s / n
        e1 += p * th
        e2 += p * th * th
    return e1, e2


class TestPointEstimate:
    def test_rejected_branch(self):
        design = make_design(10, 1)
        state = feed_outcomes(monitor_new(design), [0, 1, 0, 1]).state
        est = point_estimate(state)
        assert state.status is Status.STOPPED_REJECTED
        assert est.theta_hat == pytest.approx(2 / 4)
        assert est.m_star == 4

    def test_completed_branch(self):
        design = make_design(6, 2)
        state = feed_outcomes(monitor_new(design), [0, 1, 0, 0, 0, 1]).state
        est = point_estimate(state)
        assert state.status is Status.COMPLETED_NOT_REJECTED
        assert est.theta_hat == pytest.approx(2 / 6)
        assert est.m_star == 6

    def test_running_raises(self):
        design = make_design(10, 2)
        state = feed_outcomes(monitor_new(design), [0, 0]).state
        with pytest.raises(NotTerminalError):
            point_estimate(state)


class TestConfidenceInterval:
    def test_published_interval(self):
        est = confidence_interval(53 / 19821, 19821, 0.05)
        assert est.ci_lower == pytest.approx(0.001955, abs=1e-6)
        assert est.ci_upper == pytest.approx(0.003393, abs=1e-6)
        assert est.ci_level == 0.95
        assert not est.degenerate

    def test_clipping_and_degenerate_flag(self):
        zero = confidence_interval(0.0, 100, 0.05)
        assert zero.ci_lower == 0.0 and zero.ci_upper == 0.0
        assert zero.degenerate
        near_one = confidence_interval(0.999, 10, 0.05)
        assert near_one.ci_upper == 1.0

    def test_validation(self):
        with pytest.raises(DomainError):
            confidence_interval(0.5, 0, 0.05)
        with pytest.raises(DomainError):
            confidence_interval(0.5, 10, 1.5)
        with pytest.raises(DomainError):
            confidence_interval(1.5, 10, 0.05)


class TestMomentsOracles:
    @pytest.mark.parametrize("n,k", [(6, 1), (8, 2), (10, 0), (10, 3)])
    @pytest.mark.parametrize("theta", [0.15, 0.5, 0.85])
    def test_brute_force_small(self, n, k, theta):
        e1, e2 = brute_force_moments(n, k, theta)
        mom = estimator_moments(make_design(n, k), theta, identity="exact")
        assert mom.mean == pytest.approx(e1, abs=1e-10)
        assert mom.second_moment == pytest.approx(e2, abs=1e-10)

    @pytest.mark.parametrize("n,k", [(20, 4), (20, 0), (20, 1), (18, 10), (20, 19)])
    @pytest.mark.parametrize("theta", [0.05, 0.3, 0.7])
    def test_dp_oracle(self, n, k, theta):
        e1, e2 = dp_moments(n, k, theta)
        mom = estimator_moments(make_design(n, k), theta, identity="exact")
        assert mom.mean == pytest.approx(e1, abs=1e-10)
        assert mom.second_moment == pytest.approx(e2, abs=1e-10)
        assert mom.variance == pytest.approx(e2 - e1 * e1, abs=1e-10)

    def test_identity_conventions_close_but_distinct(self, table1_design):
        exact = estimator_moments(table1_design, 0.065, identity="exact")
        shifted = estimator_moments(table1_design, 0.065, identity="tail_shifted")
        assert shifted.mean == pytest.approx(exact.mean, abs=1e-3)
        assert shifted.mean != exact.mean
        # the shifted convention reproduces the published table cell
        assert round(shifted.mean, 4) == 0.0647

    def test_tail_shifted_requires_k_ge_3(self):
        with pytest.raises(DomainError):
            estimator_moments(make_design(10, 1), 0.3, identity="tail_shifted")

    def test_unknown_identity(self, table1_design):
        with pytest.raises(ValueError):
            estimator_moments(table1_design, 0.3, identity="bogus")

    def test_theta_domain(self, table1_design):
        for bad in (0.0, 1.0, -0.5):
            with pytest.raises(DomainError):
                estimator_moments(table1_design, bad)


def test_moments_limit_check():
    assert moments_limit_check(0.3) == (0.3, 0.0)
    with pytest.raises(DomainError):
        moments_limit_check(0.0)
