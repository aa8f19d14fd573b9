from .operators import (
    MaximalResult,
    DominationFit,
    apply_kernel,
    radial_maximal,
    hl_maximal,
    riesz_potential,
    riesz_l1_constant,
    fit_domination,
)
from .checks import (
    CommutationReport,
    NonvanishingReport,
    lipschitz_commutation_excess,
    nonvanishing_constants,
    nonvanishing_margin,
    pointwise_domination_deficit,
)
from .grand import (
    METHODS,
    HolderCutoffLP,
    GrandMaximalResult,
    grand_maximal,
    holder_cutoff,
    project_to_family,
    candidate_value,
    ascend,
)

__all__ = [
    "MaximalResult",
    "DominationFit",
    "apply_kernel",
    "radial_maximal",
    "hl_maximal",
    "riesz_potential",
    "riesz_l1_constant",
    "fit_domination",
    "CommutationReport",
    "NonvanishingReport",
    "lipschitz_commutation_excess",
    "nonvanishing_constants",
    "nonvanishing_margin",
    "pointwise_domination_deficit",
    "METHODS",
    "HolderCutoffLP",
    "GrandMaximalResult",
    "grand_maximal",
    "holder_cutoff",
    "project_to_family",
    "candidate_value",
    "ascend",
]
