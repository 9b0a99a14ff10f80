"""Dissipative two-level system dynamics at three levels of fidelity.

Weak-coupling master equations in Lindblad form (with and without the
rotating wave approximation) and the numerically exact hierarchy of
auxiliary density operators, plus the bath-fitting machinery and the
Ramsey-type measurement protocols that separate the two approximations'
footprints.
"""

from .bath import (
    BathSpec,
    correlation_quadrature,
    jump_correlator_power,
    noise_power,
    relaxation_rate,
    spectral_density,
)
from .expansion import CorrelationExpansion, fit_expansion, load_expansion
from .heom import (
    ADOState,
    HEOMConfig,
    apply_pulse,
    build_generator,
    equilibrate,
    heom_rhs,
    load_state,
    propagate_heom,
    save_state,
)
from .lindblad import (
    LindbladRates,
    build_rates,
    equilibrium_le,
    lamb_shift,
    propagate_le,
    propagate_ule,
)
from .protocols import (
    FitResult,
    blp_from_pair,
    blp_quantifier,
    extract_frequency,
    fit_exponentials,
    niba_frequency,
    pi_pulse_delta_p,
    ramsey_delta_p,
    relaxation_run,
    universal_decoherence,
    x_pulse,
    y_pulse,
)
from .scenarios import ScenarioConfig, check_scenario, run_scenario
from .topology import HierarchyTopology, build_topology, hierarchy_size
from .trajectory import Trajectory

__version__ = "0.1.0"

__all__ = [
    "BathSpec",
    "correlation_quadrature",
    "jump_correlator_power",
    "noise_power",
    "relaxation_rate",
    "spectral_density",
    "CorrelationExpansion",
    "fit_expansion",
    "load_expansion",
    "ADOState",
    "HEOMConfig",
    "apply_pulse",
    "build_generator",
    "equilibrate",
    "heom_rhs",
    "load_state",
    "propagate_heom",
    "save_state",
    "LindbladRates",
    "build_rates",
    "equilibrium_le",
    "lamb_shift",
    "propagate_le",
    "propagate_ule",
    "FitResult",
    "blp_from_pair",
    "blp_quantifier",
    "extract_frequency",
    "fit_exponentials",
    "niba_frequency",
    "pi_pulse_delta_p",
    "ramsey_delta_p",
    "relaxation_run",
    "universal_decoherence",
    "x_pulse",
    "y_pulse",
    "ScenarioConfig",
    "check_scenario",
    "run_scenario",
    "HierarchyTopology",
    "build_topology",
    "hierarchy_size",
    "Trajectory",
    "__version__",
]
