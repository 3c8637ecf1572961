"""Low-discrepancy colorings for set systems of bounded primal shatter dimension."""

from .approx import (
    HalvingParams,
    HalvingTrace,
    IntervalCounter,
    d_nu,
    epsilon_net_check,
    halving_step,
    random_sample_approx,
    relative_approx_by_halving,
    verify_nu_alpha,
    verify_relative_approx,
)
from .chaining import (
    Hierarchy,
    build_hierarchy,
    decompose,
    layer_families,
    reconstruct,
    verify_reconstruction,
)
from .coloring import (
    PipelineParams,
    WalkParams,
    brute_force_min_disc,
    evaluate_sensitive,
    full_coloring,
    lm_partial_coloring,
    random_coloring,
)
from .generators import (
    PointSet,
    gen_points,
    halfspace_ranges,
    interval_ranges,
    kset_count,
    random_abstract_system,
)
from .packing import (
    Packing,
    greedy_packing,
    packing_bound_report,
    verify_maximal,
    verify_separated,
)
from .schedule import (
    DeltaSchedule,
    ScheduleParams,
    calibrate_amp,
    entropy_budget,
    lm_condition,
)
from .setsystem import (
    Coloring,
    DiscrepancyReport,
    GroundSet,
    SetSystem,
    discrepancy,
    measure,
    project,
    sym_diff_size,
)

__version__ = "0.1.0"

__all__ = [
    "Coloring",
    "DeltaSchedule",
    "DiscrepancyReport",
    "GroundSet",
    "HalvingParams",
    "HalvingTrace",
    "Hierarchy",
    "IntervalCounter",
    "Packing",
    "PipelineParams",
    "PointSet",
    "ScheduleParams",
    "SetSystem",
    "WalkParams",
    "brute_force_min_disc",
    "build_hierarchy",
    "calibrate_amp",
    "d_nu",
    "decompose",
    "discrepancy",
    "entropy_budget",
    "epsilon_net_check",
    "evaluate_sensitive",
    "full_coloring",
    "gen_points",
    "greedy_packing",
    "halfspace_ranges",
    "halving_step",
    "interval_ranges",
    "kset_count",
    "layer_families",
    "lm_condition",
    "lm_partial_coloring",
    "measure",
    "packing_bound_report",
    "project",
    "random_abstract_system",
    "random_coloring",
    "random_sample_approx",
    "reconstruct",
    "relative_approx_by_halving",
    "sym_diff_size",
    "verify_maximal",
    "verify_nu_alpha",
    "verify_reconstruction",
    "verify_relative_approx",
    "__version__",
]
