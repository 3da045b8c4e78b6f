"""Random walks in sparse random environments: simulation, closed-form
evaluation, and statistical verification."""

from .dists import (
    Constant,
    ConfigurationError,
    DiscreteTable,
    Dist,
    ParetoGap,
    TwoPoint,
    UniformInterval,
)
from .env import (
    DualSampleWeight,
    EnvironmentSpec,
    SparseEnvironment,
    UnsupportedRegimeError,
    dual_gap_invariant,
    dual_gap_kernel,
    dualize,
    dump_environment_csv,
    sample_dual,
    sample_environment,
)
from .analysis import (
    RECURRENT,
    RECURRENT_HEAVY_GAPS,
    TRANSIENT_LEFT,
    TRANSIENT_RIGHT,
    NoFiniteKappaError,
    RegimeReport,
    SpeedBreakdown,
    WrongRegimeError,
    classify,
    dual_gap_moments,
    dual_S_tilde,
    identity_check_F,
    identity_check_S,
    identity_E_S_tilde,
    kappa_root,
    lambda_functional,
    max_speed_fixed_b,
    max_speed_fixed_Sbar,
    mean_F_bar,
    mean_S_bar,
    sinai_density,
    speed_formula,
    speed_via_dual,
)
from .stable import StableLaw, one_sided_half_stable_cdf
from .walk import (
    HittingRecord,
    SpeedEstimate,
    embedded_kernel,
    embedded_step,
    estimate_speed,
    mean_crossing_time,
    conditional_exit_time,
    recurrence_diagnostic,
    run_to_hit,
    step,
)
from .sinai import (
    PotentialPath,
    Valley,
    find_valleys,
    normalized_potential,
    predictor_b_n,
    sinai_experiment,
    u_scale,
)

__version__ = "0.1.0"
