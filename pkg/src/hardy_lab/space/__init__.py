from .metric import (
    DiscreteSpace,
    Field,
    build_space,
    table_space,
    audit_triangle,
    equiv_dist_holds,
    lipschitz_constant,
    in_ball,
)
from .ahlfors import AhlforsReport, verify_ahlfors, certify_space
from .nets import Net, NetReport, average_bound, maximal_net, overlap_bound, separated_set, verify_net
from .patchwork import Patchwork, build_patchwork, taper

__all__ = [
    "DiscreteSpace",
    "Field",
    "build_space",
    "table_space",
    "audit_triangle",
    "equiv_dist_holds",
    "lipschitz_constant",
    "in_ball",
    "AhlforsReport",
    "verify_ahlfors",
    "certify_space",
    "Net",
    "NetReport",
    "average_bound",
    "maximal_net",
    "overlap_bound",
    "verify_net",
    "separated_set",
    "Patchwork",
    "build_patchwork",
    "taper",
]
