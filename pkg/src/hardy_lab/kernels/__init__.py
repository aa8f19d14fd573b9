from .kernel import (
    KINDS,
    Kernel,
    RadialKernel,
    ExplicitKernel,
    make_kernel,
    check_profile,
    triangle_profile,
    raised_cosine_profile,
    poisson_profile,
)
from .heat import (
    HeatTorusKernel,
    GaussianBounds,
    periodic_heat_1d,
    torus_heat,
    semigroup_residual,
    fit_gaussian_bounds,
)
from .subordination import Subordinator, SubordinatedKernel, subordinator_density
from .certify import (
    FittedConstants,
    verify_lai,
    gradient_holder_constant,
    lip_range_constant,
    cutoff_constants,
)
from .split import LocalizedKernel, split_ai, tail_norm_trend
from .charts import (
    Chart,
    GluedKernel,
    GlueReport,
    glue_kernel,
    glue_over_centers,
    identity_chart,
    dilation_chart,
    zeta,
)

__all__ = [
    "KINDS",
    "Kernel",
    "RadialKernel",
    "ExplicitKernel",
    "make_kernel",
    "check_profile",
    "triangle_profile",
    "raised_cosine_profile",
    "poisson_profile",
    "HeatTorusKernel",
    "GaussianBounds",
    "periodic_heat_1d",
    "torus_heat",
    "semigroup_residual",
    "fit_gaussian_bounds",
    "Subordinator",
    "SubordinatedKernel",
    "subordinator_density",
    "FittedConstants",
    "verify_lai",
    "gradient_holder_constant",
    "lip_range_constant",
    "cutoff_constants",
    "LocalizedKernel",
    "split_ai",
    "tail_norm_trend",
    "Chart",
    "GluedKernel",
    "GlueReport",
    "glue_kernel",
    "glue_over_centers",
    "identity_chart",
    "dilation_chart",
    "zeta",
]
