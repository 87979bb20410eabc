"""Special functions and discrete distributions used throughout the package.

Everything here is self-contained double-precision numerics: the regularized
incomplete beta function (continued fraction), binomial and negative binomial
pmf/cdf in log space, and the standard normal quantile/cdf.  These are the
bedrock for every closed-form expression in the design, characteristics and
estimation modules, so the implementations favour numerical robustness over
generality.

All probabilities below ~1e-300 flush to exactly 0; this is documented
behaviour (such tails are decision-irrelevant).
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DomainError",
    "ConvergenceError",
    "reg_inc_beta",
    "binom_pmf",
    "binom_cdf",
    "binom_tail",
    "negbin_pmf",
    "negbin_logpmf",
    "negbin_pmf_range",
    "negbin_cdf",
    "normal_cdf",
    "normal_quantile",
]


class DomainError(ValueError):
    """Argument outside the mathematical domain of the operation."""


class ConvergenceError(RuntimeError):
    """The continued fraction failed to converge within the iteration cap.

    Raised instead of returning a silently wrong value.
    """


# Continued-fraction controls.  The relative tolerance is tighter than the
# 1e-12 accuracy target; 500 iterations is ample (the hardest case exercised,
# a ~ 8e4 / b ~ 1.2e6 near the distribution mean, needs ~340).
_CF_EPS = 1e-14
_CF_MAX_ITER = 500
_CF_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Modified Lentz evaluation of the incomplete-beta continued fraction."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ConvergenceError(
        f"incomplete beta continued fraction did not converge for "
        f"a={a}, b={b}, x={x} within {_CF_MAX_ITER} iterations"
    )


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Computed by the standard continued fraction, switching to the symmetric
    complement 1 - I_{1-x}(b, a) when x > (a+1)/(a+b+2) so the fraction is
    always evaluated on its fast-converging side.
    """
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x={x} outside [0, 1]")
    if a <= 0.0 or b <= 0.0:
        raise DomainError(f"shape parameters must be positive, got a={a}, b={b}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _check_prob(theta: float, name: str = "theta") -> None:
    if not (0.0 <= theta <= 1.0):
        raise DomainError(f"{name}={theta} outside [0, 1]")


def binom_pmf(j: int, n: int, theta: float) -> float:
    """P(S_n = j) for S_n ~ Binomial(n, theta), in log space (no overflow)."""
    _check_prob(theta)
    if not (0 <= j <= n):
        raise DomainError(f"j={j} outside [0, n={n}]")
    if theta == 0.0:
        return 1.0 if j == 0 else 0.0
    if theta == 1.0:
        return 1.0 if j == n else 0.0
    logp = (
        math.lgamma(n + 1)
        - math.lgamma(j + 1)
        - math.lgamma(n - j + 1)
        + j * math.log(theta)
        + (n - j) * math.log1p(-theta)
    )
    return math.exp(logp)


def binom_tail(k: int, n: int, theta: float) -> float:
    """Upper tail P(S_n > k) via the integral representation I_theta(k+1, n-k)."""
    _check_prob(theta)
    if not (0 <= k <= n):
        raise DomainError(f"k={k} outside [0, n={n}]")
    if k == n:
        return 0.0
    return reg_inc_beta(theta, k + 1, n - k)


def binom_cdf(k: int, n: int, theta: float) -> float:
    """P(S_n <= k); k < 0 gives 0, k >= n gives 1."""
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    return 1.0 - binom_tail(k, n, theta)


def negbin_logpmf(j: int, r: int, theta: float) -> float:
    """log P(M = j) for M ~ NegBin(r, theta): trial index of the r-th success."""
    _check_prob(theta)
    if r < 1:
        raise DomainError(f"r={r} must be >= 1")
    if j < r:
        raise DomainError(f"j={j} below support minimum r={r}")
    if theta == 0.0:
        return -math.inf
    if theta == 1.0:
        return 0.0 if j == r else -math.inf
    return (
        math.lgamma(j)
        - math.lgamma(r)
        - math.lgamma(j - r + 1)
        + r * math.log(theta)
        + (j - r) * math.log1p(-theta)
    )


def negbin_pmf(j: int, r: int, theta: float) -> float:
    """P(M = j) = C(j-1, r-1) theta^r (1-theta)^(j-r)."""
    return math.exp(negbin_logpmf(j, r, theta))


def negbin_pmf_range(r: int, theta: float, j_lo: int, j_hi: int) -> np.ndarray:
    """pmf of NegBin(r, theta) over j = j_lo .. j_hi, in linear time.

    Anchored at a direct log-space evaluation at j_lo, then advanced with the
    exact ratio recurrence pmf(j)/pmf(j-1) = (1-theta) (j-1)/(j-r), accumulated
    as a cumulative sum of log ratios.  This is what makes the million-term
    sums in the estimation module affordable.
    """
    _check_prob(theta)
    if r < 1:
        raise DomainError(f"r={r} must be >= 1")
    if j_lo < r:
        raise DomainError(f"j_lo={j_lo} below support minimum r={r}")
    if j_hi < j_lo:
        return np.empty(0)
    anchor = negbin_logpmf(j_lo, r, theta)
    if j_hi == j_lo:
        return np.array([math.exp(anchor)])
    # The cumulative log-pmf reaches magnitudes ~1e5 at million-term ranges;
    # accumulating in extended precision keeps the pmf relative error far
    # below the printed precision of the moment tables built on these sums.
    j = np.arange(j_lo + 1, j_hi + 1, dtype=np.longdouble)
    log_ratio = np.log(j - 1.0) - np.log(j - r) + np.log1p(np.longdouble(-theta))
    logpmf = np.empty(j_hi - j_lo + 1, dtype=np.longdouble)
    logpmf[0] = anchor
    logpmf[1:] = anchor + np.cumsum(log_ratio)
    return np.exp(logpmf).astype(np.float64)


def negbin_cdf(n: int, r: int, theta: float) -> float:
    """P(M <= n) for M ~ NegBin(r, theta), as I_theta(r, n - r + 1)."""
    _check_prob(theta)
    if r < 1:
        raise DomainError(f"r={r} must be >= 1")
    if n < r:
        raise DomainError(f"n={n} below support minimum r={r}")
    return reg_inc_beta(theta, r, n - r + 1)


_SQRT2 = math.sqrt(2.0)


def normal_cdf(x: float) -> float:
    """Standard normal cdf via erfc (accurate deep into both tails)."""
    return 0.5 * math.erfc(-x / _SQRT2)


# Acklam's rational approximation for the normal quantile; refined below with
# one Halley step, which brings the absolute error to ~1e-15.
_PPF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_PPF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)
_PPF_P_LOW = 0.02425


def normal_quantile(p: float) -> float:
    """Inverse standard normal cdf, absolute error well below 1e-9."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"p={p} must be strictly inside (0, 1)")
    a, b, c, d = _PPF_A, _PPF_B, _PPF_C, _PPF_D
    if p < _PPF_P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    elif p <= 1.0 - _PPF_P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
            ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    # One Halley refinement against the exact cdf.  The residual F(x) - p is
    # formed through whichever tail avoids cancellation: near p = 1 the lower
    # cdf saturates, so use (1 - p) - Q(x) with the upper tail Q instead.
    if p <= 0.5:
        e = normal_cdf(x) - p
    else:
        e = (1.0 - p) - 0.5 * math.erfc(x / _SQRT2)
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    return x
