from .atoms import (
    FLAVORS,
    Atom,
    Ion,
    Verdict,
    validate_atom,
    validate_ion,
    dipole_atom,
    indicator_atom,
    random_atom,
)
from .pushforward import PushforwardSpec, atom_to_ion
from .suites import (
    AtomSuiteReport,
    hardy_norm_estimate,
    atom_maximal_suite,
    tail_contribution,
    complement_shape,
)

__all__ = [
    "FLAVORS",
    "Atom",
    "Ion",
    "Verdict",
    "validate_atom",
    "validate_ion",
    "dipole_atom",
    "indicator_atom",
    "random_atom",
    "PushforwardSpec",
    "atom_to_ion",
    "AtomSuiteReport",
    "hardy_norm_estimate",
    "atom_maximal_suite",
    "tail_contribution",
    "complement_shape",
]
