"""Design layer: published designs, brute-force exact-search oracle, the
inverse problems, and validation guards."""

import pytest
import scipy.stats

from curtail.design import (
    DegenerateDesignError,
    DesignParams,
    LocalDesignParams,
    NoSolutionError,
    TestDesign,
    attained_errors_normal,
    design_approx,
    design_exact,
    design_local,
    k_for_n,
    n_for_k,
    round_half_away,
)

BASE = dict(alpha=0.05, beta=0.1, theta0=0.065)


def test_round_half_away():
    assert round_half_away(2.5) == 3
    assert round_half_away(2.4999) == 2
    assert round_half_away(-2.5) == -3
    assert round_half_away(0.0) == 0


@pytest.mark.parametrize(
    "theta1,expected",
    [
        (0.0715, (12811, 878)),
        (0.065 * 1.05, (50269, 3358)),
        (0.065 * 1.01, (1236886, 80848)),
        (0.065 * 1.2, (3321, 239)),
        (0.065 * 1.5, (584, 47)),
        (0.065 * 1.25, (2162, 159)),
    ],
)
def test_published_designs(theta1, expected):
    design = design_approx(DesignParams(theta1=theta1, **BASE))
    assert (design.n_star, design.k_star) == expected


def test_design_local_matches_widened():
    local = design_local(LocalDesignParams(delta=0.1, **BASE))
    wide = design_approx(DesignParams(theta1=0.065 * 1.1, **BASE))
    assert (local.n_star, local.k_star) == (wide.n_star, wide.k_star)
    assert local.delta == 0.1 and wide.delta is None


def test_attained_errors_are_exact_tails():
    design = design_approx(DesignParams(theta1=0.0715, **BASE))
    assert design.attained_alpha == pytest.approx(
        float(scipy.stats.binom.sf(design.k_star, design.n_star, 0.065)), rel=1e-10
    )
    assert design.attained_beta == pytest.approx(
        float(scipy.stats.binom.cdf(design.k_star, design.n_star, 0.0715)), rel=1e-10
    )


def test_design_exact_brute_force_oracle():
    params = DesignParams(0.1, 0.2, 0.2, 0.5)
    design = design_exact(params)
    found = None
    for n in range(1, 200):
        for k in range(n):
            a = float(scipy.stats.binom.sf(k, n, params.theta0))
            b = float(scipy.stats.binom.cdf(k, n, params.theta1))
            if a <= params.alpha and b <= params.beta:
                found = (n, k)
                break
        if found:
            break
    assert (design.n_star, design.k_star) == found
    assert design.attained_alpha <= params.alpha
    assert design.attained_beta <= params.beta
    assert design.mode == "exact"


def test_design_exact_large_agrees_with_guard():
    # The scan start below the approximate N must never skip the true minimum:
    # spot-check a mid-sized design against a full scan from 1.
    params = DesignParams(0.05, 0.1, 0.2, 0.35)
    design = design_exact(params)
    for n in range(1, design.n_star):
        feasible = any(
            float(scipy.stats.binom.sf(k, n, params.theta0)) <= params.alpha
            and float(scipy.stats.binom.cdf(k, n, params.theta1)) <= params.beta
            for k in range(n)
        )
        assert not feasible, f"exact search missed feasible N={n}"


def test_k_for_n_published_value():
    assert k_for_n(19821, 0.005, 0.05) == 115


def test_n_for_k_published_value():
    assert n_for_k(52, 0.002, 0.05) == 20934


def test_n_for_k_round_trips():
    for k in (10, 52, 115, 878):
        n = n_for_k(k, 0.01, 0.05)
        assert k_for_n(n, 0.01, 0.05) == k


def test_n_for_k_skipped_value():
    # For theta0=0.6 the integer map N -> k jumps over small k values.
    with pytest.raises(NoSolutionError):
        n_for_k(1, 0.6, 0.05)


def test_sample_size_grows_as_delta_shrinks():
    sizes = [design_local(LocalDesignParams(delta=d, **BASE)).n_star
             for d in (0.5, 0.25, 0.1, 0.05)]
    assert sizes == sorted(sizes)
    assert sizes[0] < sizes[-1]


def test_degenerate_design_raises():
    with pytest.raises(DegenerateDesignError):
        design_approx(DesignParams(0.4, 0.4, 0.5, 0.99))
    with pytest.raises(DegenerateDesignError):
        TestDesign(10, 10, 0.0, 0.0, "exact", 0.1, 0.2)


def test_param_validation():
    with pytest.raises(ValueError):
        DesignParams(0.0, 0.1, 0.065, 0.0715)
    with pytest.raises(ValueError):
        DesignParams(0.05, 0.1, 0.0715, 0.065)  # reversed rates
    with pytest.raises(ValueError):
        LocalDesignParams(0.05, 0.1, 0.6, 0.9)  # theta1 above 1
    with pytest.raises(ValueError):
        LocalDesignParams(0.05, 0.1, 0.065, -0.1)


def test_design_dict_round_trip():
    design = design_local(LocalDesignParams(delta=0.2, **BASE))
    assert TestDesign.from_dict(design.to_dict()) == design


def test_attained_errors_normal_published():
    a, b = attained_errors_normal(19821, 115, 0.005, 0.0065)
    assert a == pytest.approx(0.0494, abs=5e-4)
    assert b == pytest.approx(0.1192, abs=5e-4)
