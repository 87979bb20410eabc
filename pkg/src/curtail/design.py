"""Computing the optimal test design (N*, k*) from error levels and rates.

Two routes: the closed-form normal approximation (with exact attained error
probabilities evaluated afterwards through the binomial tail), and an exact
search that guarantees both attained errors stay within the nominal levels.
Also the local-alternative parametrization theta1 = theta0 (1 + delta) and the
inverse problem of recovering the maximal sample size from a known critical
value.

Convention note: both z factors in the sample-size formula are upper-tail
quantiles, z(1-alpha) and z(1-beta); this is what reproduces every published
design this package is validated against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .distributions import binom_tail, normal_cdf, normal_quantile

__all__ = [
    "DesignParams",
    "LocalDesignParams",
    "TestDesign",
    "DegenerateDesignError",
    "SearchBoundError",
    "NoSolutionError",
    "round_half_away",
    "design_approx",
    "design_exact",
    "design_local",
    "k_for_n",
    "n_for_k",
    "attained_errors_normal",
]


class DegenerateDesignError(ValueError):
    """The computed critical value falls outside [0, N-1]."""


class SearchBoundError(RuntimeError):
    """Exact search exhausted its N cap without finding a feasible design."""


class NoSolutionError(ValueError):
    """The integer map n -> k skips the requested critical value."""


def round_half_away(x: float) -> int:
    """Nearest integer, half away from zero ('[x]' in the design formulas)."""
    return math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)


@dataclass(frozen=True)
class DesignParams:
    """Tester inputs: error levels and the two hypothesized rates."""

    alpha: float
    beta: float
    theta0: float
    theta1: float

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha={self.alpha} must be in (0, 1)")
        if not (0.0 < self.beta < 1.0):
            raise ValueError(f"beta={self.beta} must be in (0, 1)")
        if not (0.0 < self.theta0 < self.theta1 < 1.0):
            raise ValueError(
                f"need 0 < theta0 < theta1 < 1, got theta0={self.theta0}, "
                f"theta1={self.theta1}"
            )


@dataclass(frozen=True)
class LocalDesignParams:
    """Local-alternative inputs: theta1 = theta0 (1 + delta)."""

    alpha: float
    beta: float
    theta0: float
    delta: float

    def __post_init__(self) -> None:
        if self.delta <= 0.0:
            raise ValueError(f"delta={self.delta} must be positive")
        if not (0.0 < self.theta0 < 1.0):
            raise ValueError(f"theta0={self.theta0} must be in (0, 1)")
        if self.theta0 * (1.0 + self.delta) >= 1.0:
            raise ValueError("theta0 * (1 + delta) must stay below 1")
        if not (0.0 < self.alpha < 1.0) or not (0.0 < self.beta < 1.0):
            raise ValueError("alpha and beta must be in (0, 1)")

    @property
    def theta1(self) -> float:
        return self.theta0 * (1.0 + self.delta)

    def widen(self) -> DesignParams:
        return DesignParams(self.alpha, self.beta, self.theta0, self.theta1)


@dataclass(frozen=True)
class TestDesign:
    """Optimal pair (N*, k*) with the exactly attained error probabilities.

    attained_alpha = P_theta0(S_N > k) and attained_beta = P_theta1(S_N <= k)
    are always the exact binomial tails.  delta is populated when the design
    came from the local parametrization.
    """

    n_star: int
    k_star: int
    attained_alpha: float
    attained_beta: float
    mode: str  # "approximate" | "exact"
    theta0: float
    theta1: float
    delta: Optional[float] = field(default=None)

    def __post_init__(self) -> None:
        if not (0 <= self.k_star < self.n_star):
            raise DegenerateDesignError(
                f"k_star={self.k_star} outside [0, n_star-1={self.n_star - 1}]"
            )

    def to_dict(self) -> dict:
        return {
            "n_star": self.n_star,
            "k_star": self.k_star,
            "attained_alpha": self.attained_alpha,
            "attained_beta": self.attained_beta,
            "mode": self.mode,
            "theta0": self.theta0,
            "theta1": self.theta1,
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestDesign":
        return cls(
            n_star=int(d["n_star"]),
            k_star=int(d["k_star"]),
            attained_alpha=float(d["attained_alpha"]),
            attained_beta=float(d["attained_beta"]),
            mode=str(d["mode"]),
            theta0=float(d["theta0"]),
            theta1=float(d["theta1"]),
            delta=None if d.get("delta") is None else float(d["delta"]),
        )


def k_for_n(n: int, theta0: float, alpha: float) -> int:
    """Critical value for a fixed maximal sample size n."""
    if n < 1:
        raise ValueError(f"n={n} must be >= 1")
    za = normal_quantile(1.0 - alpha)
    k = round_half_away(n * (za * math.sqrt(theta0 * (1.0 - theta0) / n) + theta0) - 0.5)
    if not (0 <= k <= n - 1):
        raise DegenerateDesignError(f"critical value {k} outside [0, {n - 1}]")
    return k


def _make_design(
    n: int,
    k: int,
    params: DesignParams,
    mode: str,
    delta: Optional[float] = None,
) -> TestDesign:
    return TestDesign(
        n_star=n,
        k_star=k,
        attained_alpha=binom_tail(k, n, params.theta0),
        attained_beta=1.0 - binom_tail(k, n, params.theta1),
        mode=mode,
        theta0=params.theta0,
        theta1=params.theta1,
        delta=delta,
    )


def design_approx(params: DesignParams, delta: Optional[float] = None) -> TestDesign:
    """Normal-approximation design: N* rounded to nearest, then k* from N*."""
    za = normal_quantile(1.0 - params.alpha)
    zb = normal_quantile(1.0 - params.beta)
    s0 = math.sqrt(params.theta0 * (1.0 - params.theta0))
    s1 = math.sqrt(params.theta1 * (1.0 - params.theta1))
    n = round_half_away(((za * s0 + zb * s1) / (params.theta1 - params.theta0)) ** 2)
    if n < 1:
        raise DegenerateDesignError(f"approximate sample size {n} below 1")
    k = k_for_n(n, params.theta0, params.alpha)
    return _make_design(n, k, params, "approximate", delta)


def design_local(params: LocalDesignParams) -> TestDesign:
    """Local-alternative design; identical to design_approx at theta0(1+delta)."""
    return design_approx(params.widen(), delta=params.delta)


def _smallest_feasible_k(n: int, params: DesignParams) -> Optional[int]:
    """Smallest k with attained alpha <= nominal, or None if even k=n-1 fails;
    returns it only when the beta constraint also holds there."""
    lo, hi = 0, n - 1
    if binom_tail(hi, n, params.theta0) > params.alpha:
        return None
    while lo < hi:
        mid = (lo + hi) // 2
        if binom_tail(mid, n, params.theta0) <= params.alpha:
            hi = mid
        else:
            lo = mid + 1
    k = lo
    if 1.0 - binom_tail(k, n, params.theta1) <= params.beta:
        return k
    return None


def design_exact(params: DesignParams, n_cap: int = 10**7) -> TestDesign:
    """Smallest N admitting a k with both attained errors within nominal levels.

    N is minimized first, then k (smaller k only tightens beta while alpha
    pins the lower bound, so the smallest alpha-feasible k is the choice).
    The scan starts safely below the normal-approximation N.
    """
    try:
        n_guess = design_approx(params).n_star
    except DegenerateDesignError:
        n_guess = 1
    start = max(1, int(0.55 * n_guess)) if n_guess > 200 else 1
    for n in range(start, n_cap + 1):
        k = _smallest_feasible_k(n, params)
        if k is not None:
            return _make_design(n, k, params, "exact")
    raise SearchBoundError(f"no feasible design found with N <= {n_cap}")


def n_for_k(k: int, theta0: float, alpha: float) -> int:
    """Maximal sample size whose critical value is k (inverse design).

    Solves the continuous critical-value equation
        theta0 N + z sqrt(theta0 (1-theta0) N) - 1/2 = k
    exactly (quadratic in sqrt(N)), rounds to the nearest integer, then scans
    locally for an N whose integer critical value is k.
    """
    if k < 0:
        raise ValueError(f"k={k} must be >= 0")
    za = normal_quantile(1.0 - alpha)
    c = za * math.sqrt(theta0 * (1.0 - theta0))
    target = k + 0.5
    disc = c * c + 4.0 * theta0 * target
    u = (-c + math.sqrt(disc)) / (2.0 * theta0)
    n = max(1, round_half_away(u * u))
    for cand in sorted(range(max(1, n - 3), n + 4), key=lambda m: (abs(m - n), m)):
        try:
            if k_for_n(cand, theta0, alpha) == k:
                return cand
        except DegenerateDesignError:
            continue
    attained = {}
    for cand in (n - 1, n, n + 1):
        if cand >= 1:
            try:
                attained[cand] = k_for_n(cand, theta0, alpha)
            except DegenerateDesignError:
                pass
    raise NoSolutionError(
        f"no maximal sample size maps to critical value k={k}; "
        f"adjacent attainable values near N={n}: {attained}"
    )


def attained_errors_normal(
    n: int, k: int, theta0: float, theta1: float
) -> tuple[float, float]:
    """Attained (alpha, beta) by the continuity-corrected normal approximation.

    This is the convention behind the published worked-example error values;
    the exact binomial tails live on TestDesign itself.
    """
    z0 = (k + 0.5 - n * theta0) / math.sqrt(n * theta0 * (1.0 - theta0))
    z1 = (k + 0.5 - n * theta1) / math.sqrt(n * theta1 * (1.0 - theta1))
    return 1.0 - normal_cdf(z0), normal_cdf(z1)
