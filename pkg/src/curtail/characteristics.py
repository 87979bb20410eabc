"""Closed-form operating characteristics of the curtailed test.

Power, expected terminal sample size (ASN), second moment / variance / CV of
the terminal sample size, the relative savings against the maximal sample
size, and the small-delta limits of power and savings.  Everything reduces to
a handful of regularized incomplete beta evaluations.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .design import TestDesign
from .distributions import DomainError, reg_inc_beta

__all__ = [
    "OperatingCharacteristics",
    "power",
    "asn",
    "m_moments",
    "relative_savings",
    "savings_limit",
    "power_limit",
    "oc_curve",
    "oc_csv",
    "OC_CSV_HEADER",
]

logger = logging.getLogger(__name__)

# Relative tolerance for the variance cancellation clamp: when ASN is within
# a hair of N* the two-moment difference can go slightly negative.
_VAR_CLAMP_REL = 1e-8

# Grid generators clip to the open interval; the ASN formula divides by theta.
THETA_EPS = 1e-9


@dataclass(frozen=True)
class OperatingCharacteristics:
    theta: float
    power: float
    asn: float
    m_second_moment: float
    m_variance: float
    cv: float

    @property
    def sd(self) -> float:
        return math.sqrt(self.m_variance)


def _check_theta(theta: float) -> None:
    if not (0.0 < theta < 1.0):
        raise DomainError(f"theta={theta} must be strictly inside (0, 1)")


def power(design: TestDesign, theta: float) -> float:
    """Rejection probability I_theta(k*+1, N*-k*); equals the fixed-sample
    tail probability for the same (N*, k*)."""
    _check_theta(theta)
    return reg_inc_beta(theta, design.k_star + 1, design.n_star - design.k_star)


def asn(design: TestDesign, theta: float) -> float:
    """Expected terminal sample size E(M*)."""
    _check_theta(theta)
    n, k = design.n_star, design.k_star
    return n * reg_inc_beta(1.0 - theta, n - k, k + 1) + (k + 1) / theta * reg_inc_beta(
        theta, k + 2, n - k
    )


def m_moments(design: TestDesign, theta: float) -> OperatingCharacteristics:
    """First two moments of M*, with variance clamped against cancellation."""
    _check_theta(theta)
    n, k = design.n_star, design.k_star
    no_stop = reg_inc_beta(1.0 - theta, n - k, k + 1)
    t1 = (k + 1) / theta * reg_inc_beta(theta, k + 2, n - k)
    mean = n * no_stop + t1
    second = n * n * no_stop + (k + 1) * (k + 2) / theta**2 * reg_inc_beta(
        theta, k + 3, n - k
    ) - t1
    var = second - mean * mean
    if var < 0.0:
        if var < -_VAR_CLAMP_REL * second:
            raise ArithmeticError(
                f"variance {var} negative beyond the cancellation tolerance "
                f"at theta={theta}"
            )
        logger.warning(
            "clamping slightly negative M* variance %.3e to 0 at theta=%s", var, theta
        )
        var = 0.0
    return OperatingCharacteristics(
        theta=theta,
        power=power(design, theta),
        asn=mean,
        m_second_moment=second,
        m_variance=var,
        cv=math.sqrt(var) / mean,
    )


def relative_savings(design: TestDesign, theta: float) -> float:
    """(N* - ASN(theta)) / N*, the fraction of observations saved."""
    return (design.n_star - asn(design, theta)) / design.n_star


def savings_limit(theta0: float, theta: float) -> float:
    """Small-delta limit of the relative savings: (1 - theta0/theta)+."""
    if not (0.0 < theta0 < 1.0) or not (0.0 < theta < 1.0):
        raise DomainError("theta0 and theta must be in (0, 1)")
    return max(0.0, 1.0 - theta0 / theta)


def power_limit(theta0: float, theta: float, alpha: float) -> float:
    """Small-delta limit of the power function: 0 / alpha / 1 around theta0."""
    if not (0.0 < theta0 < 1.0) or not (0.0 < theta < 1.0):
        raise DomainError("theta0 and theta must be in (0, 1)")
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must be in (0, 1)")
    if theta < theta0:
        return 0.0
    if theta == theta0:
        return alpha
    return 1.0


def oc_curve(
    design: TestDesign, theta_grid: Sequence[float]
) -> list[OperatingCharacteristics]:
    """Per-theta characteristics; grid values are clipped into the open unit
    interval before evaluation."""
    out = []
    for theta in theta_grid:
        clipped = min(max(theta, THETA_EPS), 1.0 - THETA_EPS)
        out.append(m_moments(design, clipped))
    return out


OC_CSV_HEADER = ["theta", "power", "asn", "sd", "cv", "rel_savings"]


def oc_csv(design: TestDesign, rows: Iterable[OperatingCharacteristics]) -> str:
    """CSV emission contract: full double precision, one row per grid point."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(OC_CSV_HEADER)
    for oc in rows:
        writer.writerow(
            [
                repr(oc.theta),
                repr(oc.power),
                repr(oc.asn),
                repr(oc.sd),
                repr(oc.cv),
                repr((design.n_star - oc.asn) / design.n_star),
            ]
        )
    return buf.getvalue()
