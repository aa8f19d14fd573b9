from .ledger import (
    CONDITIONS,
    ConstantLedger,
    calibrate_sum_constants,
    choose_constants,
    ledger_at_eta,
    with_E,
)
from .uchiyama import (
    Level,
    Decomposition,
    uchiyama_decompose,
    reconstruct,
    resolvable_depth,
    coefficient_audit,
)
from .majorization import (
    MajorizationReport,
    majorization_check,
    cutoff_family,
    random_piecewise_fields,
    global_maximal_at,
    relative_change,
)

__all__ = [
    "CONDITIONS",
    "ConstantLedger",
    "calibrate_sum_constants",
    "choose_constants",
    "ledger_at_eta",
    "with_E",
    "Level",
    "Decomposition",
    "uchiyama_decompose",
    "reconstruct",
    "resolvable_depth",
    "coefficient_audit",
    "MajorizationReport",
    "majorization_check",
    "cutoff_family",
    "random_piecewise_fields",
    "global_maximal_at",
    "relative_change",
]
