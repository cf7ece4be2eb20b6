"""MAC resolvability codes from black-box source resolvability codes,
two-universal hashing, and block-Markov randomness recycling."""

from .probcore import (
    Alphabet,
    BudgetError,
    Dist,
    InfeasibleTargetError,
    JointDist,
    MacChannel,
    conditional_entropy,
    entropy,
    make_rng,
    min_entropy_conditional,
    mutual_information,
    target_output_dist,
    transmit,
    variational_distance,
)
from .polar import PolarProfile, ResolvabilityCode, compute_profile, encode, \
    output_dist_exact, polar_transform
from .hashing import ToeplitzHash, hashed_joint_dist_exact, sample_hash
from .ratesplit import SplitPoint, solve_eps, split_dists, split_rates
from .encoder import (
    BatchTranscript,
    IdealizedOverrides,
    LengthPlan,
    MacCode,
    achieved_rates,
    build_mac_code,
    make_plan,
    make_plan_multi,
    run_trials,
)
from .evaluator import (
    MetricRow,
    RegionSpec,
    RunReport,
    exact_report,
    independence_diagnostics,
    lhl_bound_check,
    region_2user,
    region_multi,
    tv_exhaustive,
    tv_monte_carlo,
)

__version__ = "0.1.0"
