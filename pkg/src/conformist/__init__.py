"""Deterministic simulator and verification harness for an iterated
minimum-variance core selection process with stochastic replacement.

Start with N points in R^d. Each step removes the K points whose removal
minimizes the spread energy (sum of squared distances to the barycenter)
of the remaining N-K, then replaces them with K i.i.d. draws from a
configurable law. The package simulates the process reproducibly,
monitors its provable invariants, and classifies finite-horizon runs.
"""

from .diagnostics import (
    NOT_APPLICABLE,
    BatchSummary,
    DriftReport,
    batch_run,
    check_monotone,
    check_rejection,
    check_sandwich,
    count_crossings,
    supermartingale_drift,
)
from .distributions import (
    DistributionSpec,
    Region,
    RegularityReport,
    Sampler,
    TailReport,
    cantor_sample,
    estimate_regularity,
    estimate_tail_constant,
    has_clean_ternary_prefix,
    make_sampler,
    spec_from_json,
)
from .engine import (
    CONVERGED_TO_POINT,
    DIVERGED,
    OSCILLATING_CORE,
    UNDECIDED,
    Outcome,
    RunConfig,
    StepRecord,
    Trajectory,
    classify,
    config_from_json,
    init_state,
    run,
    step,
    stream_for,
)
from .errors import (
    BadInitial,
    EmptyConfiguration,
    Error,
    InconsistentMoments,
    InsufficientMass,
    InsufficientTailMass,
    InvalidDistribution,
    InvalidK,
)
from .geometry import PointConfiguration, barycenter, energy, energy_pairwise, point_range
from .selection import (
    CoreSelection,
    enumerate_removals,
    furthest_point_core,
    moments_energy,
    select_core,
)

__version__ = "0.1.0"

__all__ = [
    "BadInitial",
    "BatchSummary",
    "CONVERGED_TO_POINT",
    "CoreSelection",
    "DIVERGED",
    "DistributionSpec",
    "DriftReport",
    "EmptyConfiguration",
    "Error",
    "InconsistentMoments",
    "InsufficientMass",
    "InsufficientTailMass",
    "InvalidDistribution",
    "InvalidK",
    "NOT_APPLICABLE",
    "OSCILLATING_CORE",
    "Outcome",
    "PointConfiguration",
    "Region",
    "RegularityReport",
    "RunConfig",
    "Sampler",
    "StepRecord",
    "TailReport",
    "Trajectory",
    "UNDECIDED",
    "barycenter",
    "batch_run",
    "cantor_sample",
    "check_monotone",
    "check_rejection",
    "check_sandwich",
    "classify",
    "config_from_json",
    "count_crossings",
    "energy",
    "energy_pairwise",
    "enumerate_removals",
    "estimate_regularity",
    "estimate_tail_constant",
    "furthest_point_core",
    "has_clean_ternary_prefix",
    "init_state",
    "make_sampler",
    "moments_energy",
    "point_range",
    "run",
    "select_core",
    "spec_from_json",
    "step",
    "stream_for",
    "supermartingale_drift",
    "__version__",
]
