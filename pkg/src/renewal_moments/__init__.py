"""Moments between two i.i.d. renewal processes, exact and simulated, and the
bicolored sensor matching problem built on them."""

__version__ = "0.1.0"

from .distributions import ProcessSpec, SeedSpec, analytic_profile, arrival_prefix_sums, parse_dist, sample_increments
from .matching import (
    CostReport,
    MatchingInstance,
    estimate_T_b,
    fit_T_b_scaling,
    lemma1_expectation_check,
    matching_cost,
    optimal_assignment,
)
from .moments import (
    ExactMomentResult,
    MomentProfile,
    OrderInsufficientError,
    PartitionTerm,
    central_diff_moment,
    enumerate_partition_terms,
    exact_pair_moment,
    remainder_ratio_scan,
)
from .montecarlo import (
    MomentEstimate,
    MomentQuery,
    SlopeFit,
    convexity_split_check,
    estimate_moment,
    fit_scaling_exponent,
    shift_gap_check,
)
