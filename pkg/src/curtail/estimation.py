"""Post-test estimation of the side-effect probability.

The terminal point estimate is the observed proportion at the (random)
termination point: S/N* when the trial completed without rejection, and
(k*+1)/M when it stopped.  Its exact first two moments combine a truncated
binomial part with long negative binomial sums, evaluated in linear time via
the ratio recurrence.  The interval estimate is the symmetric Wald interval
justified by the estimator's asymptotic normality.

The closed-form moment path supports two incomplete-beta identity
conventions: "exact" (matches path enumeration to machine precision) and
"tail_shifted" (the shifted identities used to produce the published moment
tables; differs visibly only for theta near theta0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design import TestDesign
from .distributions import (
    DomainError,
    binom_cdf,
    binom_pmf,
    negbin_pmf_range,
    normal_quantile,
    reg_inc_beta,
)
from .monitor import MonitorState, Status

__all__ = [
    "PostTestEstimate",
    "EstimatorMoments",
    "NotTerminalError",
    "point_estimate",
    "confidence_interval",
    "estimator_moments",
    "moments_limit_check",
]


class NotTerminalError(RuntimeError):
    """Estimation requested while the trial is still running."""


@dataclass(frozen=True)
class PostTestEstimate:
    theta_hat: float
    m_star: int
    ci_level: Optional[float] = None  # 1 - gamma
    ci_lower: Optional[float] = None
    ci_upper: Optional[float] = None
    degenerate: bool = False  # theta_hat at 0 or 1 -> zero-width Wald interval


@dataclass(frozen=True)
class EstimatorMoments:
    mean: float
    second_moment: float
    variance: float


def point_estimate(state: MonitorState) -> PostTestEstimate:
    """Terminal proportion estimate from a finished trial."""
    if state.status is Status.RUNNING:
        raise NotTerminalError("trial still running; no terminal estimate exists")
    if state.status is Status.STOPPED_REJECTED:
        theta_hat = (state.design.k_star + 1) / state.m_star
    else:
        theta_hat = state.s_n / state.design.n_star
    return PostTestEstimate(theta_hat=theta_hat, m_star=state.m_star)


def confidence_interval(
    theta_hat: float, m_star: int, gamma: float = 0.05
) -> PostTestEstimate:
    """Symmetric Wald interval theta_hat +/- z(gamma/2) sqrt(th(1-th)/M*),
    clipped to [0, 1]."""
    if m_star < 1:
        raise DomainError(f"m_star={m_star} must be >= 1")
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma={gamma} must be in (0, 1)")
    if not (0.0 <= theta_hat <= 1.0):
        raise DomainError(f"theta_hat={theta_hat} outside [0, 1]")
    z = normal_quantile(1.0 - gamma / 2.0)
    half = z * math.sqrt(theta_hat * (1.0 - theta_hat) / m_star)
    return PostTestEstimate(
        theta_hat=theta_hat,
        m_star=m_star,
        ci_level=1.0 - gamma,
        ci_lower=max(0.0, theta_hat - half),
        ci_upper=min(1.0, theta_hat + half),
        degenerate=(theta_hat in (0.0, 1.0)),
    )


def _negbin_sums(n: int, k: int, theta: float) -> tuple[float, float]:
    """sum pmf(j)/j and sum pmf(j)/j^2 over j = k+1 .. n for NegBin(k+1, theta)."""
    r = k + 1
    pmf = negbin_pmf_range(r, theta, r, n)
    j = np.arange(r, n + 1, dtype=np.float64)
    return float(pmf @ (1.0 / j)), float(pmf @ (1.0 / (j * j)))


def _binomial_parts(
    n: int, k: int, theta: float, identity: str
) -> tuple[float, float]:
    """P(S_{N-1} <= k-1) and P(S_{N-2} <= k-2) under the chosen convention."""
    if identity == "exact":
        return binom_cdf(k - 1, n - 1, theta), binom_cdf(k - 2, n - 2, theta)
    if identity == "tail_shifted":
        # Shifted identities: both first arguments off by one against the exact
        # closed form,
        # and the complement taken at (N - k + 1).  Kept for reproducing the
        # published moment tables; do not use where enumeration-exactness matters.
        p1 = 1.0 - reg_inc_beta(theta, k - 1, n - k + 1) if k >= 2 else None
        p2 = 1.0 - reg_inc_beta(theta, k - 2, n - k + 1) if k >= 3 else None
        if p1 is None or p2 is None:
            raise DomainError("tail_shifted identity requires k >= 3")
        return p1, p2
    raise ValueError(f"unknown identity {identity!r}")


def _moments_by_small_k_sum(n: int, k: int, theta: float) -> tuple[float, float]:
    """Direct truncated-binomial sums for the non-rejection part (k < 2)."""
    mean = sum(s / n * binom_pmf(s, n, theta) for s in range(0, k + 1))
    second = sum((s / n) ** 2 * binom_pmf(s, n, theta) for s in range(0, k + 1))
    return mean, second


def estimator_moments(
    design: TestDesign, theta: float, identity: str = "exact"
) -> EstimatorMoments:
    """Exact mean, second moment and variance of the terminal estimate.

    The closed form for the non-rejection part indexes the binomial count at
    k*-2, so for k* < 2 that part is evaluated by direct summation instead.
    """
    if not (0.0 < theta < 1.0):
        raise DomainError(f"theta={theta} must be strictly inside (0, 1)")
    n, k = design.n_star, design.k_star
    s1, s2 = _negbin_sums(n, k, theta)
    r = k + 1
    if k < 2 and identity == "exact":
        fixed_mean, fixed_second = _moments_by_small_k_sum(n, k, theta)
    else:
        p1, p2 = _binomial_parts(n, k, theta, identity)
        fixed_mean = theta * p1
        fixed_second = (n - 1) * theta * theta * p2 / n + theta * p1 / n
    mean = fixed_mean + r * s1
    second = fixed_second + r * r * s2
    var = second - mean * mean
    if var < 0.0:
        if var < -1e-8 * second:
            raise ArithmeticError(f"estimator variance {var} negative at theta={theta}")
        var = 0.0
    return EstimatorMoments(mean=mean, second_moment=second, variance=var)


def moments_limit_check(theta: float) -> tuple[float, float]:
    """Small-delta limits of the estimator's mean and variance: (theta, 0)."""
    if not (0.0 < theta < 1.0):
        raise DomainError(f"theta={theta} must be strictly inside (0, 1)")
    return theta, 0.0
