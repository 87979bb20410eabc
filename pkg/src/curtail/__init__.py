"""Optimal curtailed sequential testing for elevated side-effect rates.

The test executes the fixed-sample most-powerful binomial test (N*, k*)
sequentially: stop and reject the moment the side-effect count exceeds k*,
otherwise complete at N* without rejection.  The package covers design,
closed-form operating characteristics, live trial monitoring, post-test
estimation, Monte Carlo verification, and one-shot reproduction of the
published results.
"""

from .characteristics import (
    OperatingCharacteristics,
    asn,
    m_moments,
    oc_csv,
    oc_curve,
    power,
    power_limit,
    relative_savings,
    savings_limit,
)
from .design import (
    DegenerateDesignError,
    DesignParams,
    LocalDesignParams,
    NoSolutionError,
    SearchBoundError,
    TestDesign,
    attained_errors_normal,
    design_approx,
    design_exact,
    design_local,
    k_for_n,
    n_for_k,
)
from .distributions import (
    ConvergenceError,
    DomainError,
    binom_cdf,
    binom_pmf,
    binom_tail,
    negbin_cdf,
    negbin_pmf,
    normal_cdf,
    normal_quantile,
    reg_inc_beta,
)
from .estimation import (
    EstimatorMoments,
    NotTerminalError,
    PostTestEstimate,
    confidence_interval,
    estimator_moments,
    moments_limit_check,
    point_estimate,
)
from .monitor import (
    Decision,
    MonitorError,
    MonitorState,
    Observation,
    Status,
    decision,
    feed_outcomes,
    monitor_new,
    observe,
    persist,
    read_event_log,
    restore,
)
from .simulation import SimConfig, SimReport, empirical_oc, replication_rng, simulate

__version__ = "0.1.0"
