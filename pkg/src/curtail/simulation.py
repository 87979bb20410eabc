"""Seeded Monte Carlo engine for empirical verification.

Replications are mutually independent: replication r draws from a Philox
counter-based stream keyed by (master seed, r), so results are identical
regardless of execution order and reruns are byte-reproducible.  Bernoulli
draws follow the documented contract uniform64 / 2^64 < theta.

`simulate` streams outcomes through a fresh monitor per replication and
reports rejection rate, terminal-sample-size moments and confidence-interval
coverage.  `empirical_oc` cross-checks the closed-form power/ASN formulas; it
draws the stopping time directly from its negative binomial law (the same
distribution the streamed monitor induces), which is far cheaper at large
replication counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .characteristics import relative_savings, savings_limit
from .design import TestDesign
from .estimation import confidence_interval, point_estimate
from .monitor import Status, feed_outcomes, monitor_new

__all__ = [
    "SimConfig",
    "SimReport",
    "simulate",
    "empirical_oc",
    "savings_curve_data",
    "savings_csv",
    "replication_rng",
]

_TWO64 = float(2**64)


@dataclass(frozen=True)
class SimConfig:
    design: TestDesign
    theta_true: float
    replications: int
    seed: int
    ci_gamma: float = 0.05

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError(f"replications={self.replications} must be >= 1")
        if not (0.0 < self.theta_true <= 1.0):
            raise ValueError(f"theta_true={self.theta_true} must be in (0, 1]")


@dataclass(frozen=True)
class SimReport:
    reject_rate: float
    mean_m_star: float
    sd_m_star: float
    coverage: Optional[float]
    se_reject_rate: float
    se_mean_m_star: float
    se_coverage: Optional[float]
    replications: int
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "reject_rate": self.reject_rate,
                "mean_m_star": self.mean_m_star,
                "sd_m_star": self.sd_m_star,
                "coverage": self.coverage,
                "se_reject_rate": self.se_reject_rate,
                "se_mean_m_star": self.se_mean_m_star,
                "se_coverage": self.se_coverage,
                "replications": self.replications,
                "seed": self.seed,
            },
            sort_keys=True,
        )

    def to_text(self) -> str:
        rows = [
            ("replications", f"{self.replications}"),
            ("reject rate", f"{self.reject_rate:.6f} (se {self.se_reject_rate:.2e})"),
            ("mean M*", f"{self.mean_m_star:.4f} (se {self.se_mean_m_star:.4f})"),
            ("sd M*", f"{self.sd_m_star:.4f}"),
        ]
        if self.coverage is not None:
            rows.append(
                ("CI coverage", f"{self.coverage:.4f} (se {self.se_coverage:.2e})")
            )
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {val}" for name, val in rows)


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Counter-based stream for one replication, a pure function of inputs."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, replication], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _bernoulli_block(rng: np.random.Generator, size: int, theta: float) -> np.ndarray:
    u = rng.integers(0, 2**64, size=size, dtype=np.uint64)
    return (u / _TWO64 < theta).astype(np.int64)


def _run_trial(rng: np.random.Generator, design: TestDesign, theta: float):
    """One full trial streamed through a fresh monitor; returns terminal state."""
    state = monitor_new(design)
    # Block size sized to the expected stopping point to avoid overdraw.
    expected_stop = min(design.n_star, int((design.k_star + 1) / theta) + 1)
    block = max(256, int(1.25 * expected_stop))
    while state.status is Status.RUNNING:
        remaining = design.n_star - state.n
        outcomes = _bernoulli_block(rng, min(block, remaining), theta)
        state = feed_outcomes(state, outcomes).state
    return state


def _rate_se(p: float, r: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / r)


def simulate(config: SimConfig) -> SimReport:
    """Full trials against the monitor, with post-test estimation per trial."""
    design, theta = config.design, config.theta_true
    r = config.replications
    m_stars = np.empty(r, dtype=np.float64)
    rejected = np.empty(r, dtype=bool)
    covered = np.empty(r, dtype=bool)
    for i in range(r):
        state = _run_trial(replication_rng(config.seed, i), design, theta)
        m_stars[i] = state.m_star
        rejected[i] = state.status is Status.STOPPED_REJECTED
        est = point_estimate(state)
        ci = confidence_interval(est.theta_hat, est.m_star, config.ci_gamma)
        covered[i] = ci.ci_lower <= theta <= ci.ci_upper
    reject_rate = float(rejected.mean())
    coverage = float(covered.mean())
    sd_m = float(m_stars.std(ddof=1)) if r > 1 else 0.0
    return SimReport(
        reject_rate=reject_rate,
        mean_m_star=float(m_stars.mean()),
        sd_m_star=sd_m,
        coverage=coverage,
        se_reject_rate=_rate_se(reject_rate, r),
        se_mean_m_star=sd_m / math.sqrt(r),
        se_coverage=_rate_se(coverage, r),
        replications=r,
        seed=config.seed,
    )


def empirical_oc(config: SimConfig, chunk: int = 100_000) -> SimReport:
    """Empirical power/ASN from direct stopping-time draws (no coverage)."""
    design, theta = config.design, config.theta_true
    r_total = config.replications
    k1 = design.k_star + 1
    rng = replication_rng(config.seed, 0)
    n_rej = 0
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < r_total:
        m = min(chunk, r_total - done)
        # numpy's negative_binomial counts failures; add the k*+1 successes.
        stops = rng.negative_binomial(k1, theta, size=m) + k1
        m_star = np.minimum(stops, design.n_star).astype(np.float64)
        n_rej += int((stops <= design.n_star).sum())
        total += float(m_star.sum())
        total_sq += float((m_star * m_star).sum())
        done += m
    mean = total / r_total
    var = max(total_sq / r_total - mean * mean, 0.0) * r_total / max(r_total - 1, 1)
    reject_rate = n_rej / r_total
    return SimReport(
        reject_rate=reject_rate,
        mean_m_star=mean,
        sd_m_star=math.sqrt(var),
        coverage=None,
        se_reject_rate=_rate_se(reject_rate, r_total),
        se_mean_m_star=math.sqrt(var / r_total),
        se_coverage=None,
        replications=r_total,
        seed=config.seed,
    )


SAVINGS_CSV_HEADER = ["delta", "n_star", "k_star", "theta", "rel_savings", "savings_limit"]


def savings_curve_data(
    designs: Sequence[TestDesign], theta0: float, theta_grid: Sequence[float]
) -> list[dict]:
    """Exact relative savings next to the asymptotic limit, per (design, theta)."""
    rows = []
    for design in designs:
        for theta in theta_grid:
            rows.append(
                {
                    "delta": design.delta,
                    "n_star": design.n_star,
                    "k_star": design.k_star,
                    "theta": theta,
                    "rel_savings": relative_savings(design, theta),
                    "savings_limit": savings_limit(theta0, theta),
                }
            )
    return rows


def savings_csv(rows: Sequence[dict]) -> str:
    lines = [",".join(SAVINGS_CSV_HEADER)]
    for row in rows:
        lines.append(
            ",".join(
                "" if row[key] is None else repr(row[key]) if isinstance(row[key], float) else str(row[key])
                for key in SAVINGS_CSV_HEADER
            )
        )
    return "\n".join(lines) + "\n"
