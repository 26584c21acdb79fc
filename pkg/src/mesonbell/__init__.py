"""Desk-scale feasibility toolkit for Bell tests with entangled meson pairs.

The package covers four questions end to end:

* what quantum mechanics predicts for flavor correlations of an entangled
  neutral-meson pair as a function of the two decay times;
* what restricted local hidden-variable models can predict, and how to
  diagnose the restrictions from simulated event samples;
* how the Bell bound loosens from 2 to 2 + 2(1 - exp(-2 gamma dt_spread))
  when only decay-time differences are observable, and where (in the
  oscillation ratio x = delta_m / gamma) a conclusive test becomes possible;
* which fraction of paired decay vertices is space-like separated, against
  the 2 - sqrt(2) fraction a conclusive mixed test requires.
"""

from .bell import (
    BellReport,
    QM_MAX,
    SearchResult,
    TimeQuadruple,
    bell_report,
    chsh_cell,
    combination_search,
    lrt_bound,
    lrt_bound_exponential,
    mixed_bound,
    p_threshold,
    qm_r_factor,
    r_factor,
    theta_scan,
    x_threshold,
)
from .kinematics import (
    BoostConfig,
    FourEvent,
    PsCurve,
    PsEstimate,
    Separation,
    SeparationCriterion,
    boost_event,
    classify_separation,
    default_meson_speed,
    derive_boost,
    ps_curve,
    sample_pair_events,
    spacelike_probability,
)
from .lrt import (
    CellGridSpec,
    ConstantAnticorrelated,
    OscillatingSign,
    RestrictedLrtModel,
    TimeGridSpec,
    UnrestrictedDemoModel,
    check_homogeneity,
    check_marginal_factorization,
    lrt_correlation_cell,
    lrt_correlation_delta,
    lrt_joint_probability,
    make_model,
)
from .montecarlo import (
    CellGrid,
    CorrelationEstimate,
    DeltaHistogram,
    EventBatch,
    bin_cells,
    bin_delta,
    estimate_correlation,
    generate_lrt_events,
    generate_model_events,
    generate_qm_events,
)
from .params import B_PARAMS, DecayRecord, Flavor, K_PARAMS, MesonParams, TimePair
from .qm import (
    eta_exponential,
    eta_tilde,
    expected_counts,
    n_of_delta,
    qm_correlation,
    qm_correlation_delta,
    qm_joint_rate,
)

__version__ = "0.1.0"

__all__ = [
    "B_PARAMS",
    "BellReport",
    "BoostConfig",
    "CellGrid",
    "CellGridSpec",
    "ConstantAnticorrelated",
    "CorrelationEstimate",
    "DecayRecord",
    "DeltaHistogram",
    "EventBatch",
    "Flavor",
    "FourEvent",
    "K_PARAMS",
    "MesonParams",
    "OscillatingSign",
    "PsCurve",
    "PsEstimate",
    "QM_MAX",
    "RestrictedLrtModel",
    "SearchResult",
    "Separation",
    "SeparationCriterion",
    "TimeGridSpec",
    "TimePair",
    "TimeQuadruple",
    "UnrestrictedDemoModel",
    "bell_report",
    "bin_cells",
    "bin_delta",
    "boost_event",
    "check_homogeneity",
    "check_marginal_factorization",
    "chsh_cell",
    "classify_separation",
    "combination_search",
    "default_meson_speed",
    "derive_boost",
    "estimate_correlation",
    "eta_exponential",
    "eta_tilde",
    "expected_counts",
    "generate_lrt_events",
    "generate_model_events",
    "generate_qm_events",
    "lrt_bound",
    "lrt_bound_exponential",
    "lrt_correlation_cell",
    "lrt_correlation_delta",
    "lrt_joint_probability",
    "make_model",
    "mixed_bound",
    "n_of_delta",
    "p_threshold",
    "ps_curve",
    "qm_correlation",
    "qm_correlation_delta",
    "qm_joint_rate",
    "qm_r_factor",
    "r_factor",
    "sample_pair_events",
    "spacelike_probability",
    "theta_scan",
    "x_threshold",
]
