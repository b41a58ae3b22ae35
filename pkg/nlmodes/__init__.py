"""
nlmodes - adaptive phase-amplitude reduced-order models.

Builds families of forced periodic orbits of ẋ = F(x, u) that emanate from a
stable focus, computes their Floquet and adjoint data, and integrates the
resulting reduced models next to full and linearized simulations.
"""

__version__ = "0.1.0"
__license__ = "MIT"

from nlmodes.core import (
    NlmodesError,
    DynamicalSystem,
    CallableSystem,
    eval_rhs,
    setup_logger,
)
from nlmodes.models import (
    available_models,
    build_model,
    register_model,
    linearized_model,
    LinearizedSystem,
)
from nlmodes.spectral import (
    Spectrum,
    SpectralMode,
    compute_spectrum,
    find_fixed_point,
    oscillatory_mode,
    perturb_eigenpair,
)
from nlmodes.periodic import (
    ForcedOrbit,
    analyze_orbit,
    monodromy,
    refine_orbit,
    seed_orbit,
)
from nlmodes.family import (
    BackboneCurve,
    ContinuationOptions,
    OrbitFamily,
    backbone,
    build_family,
    extend_family,
    extend_family_two_mode,
    retune_period,
    select_modes,
)
from nlmodes.reduce import (
    ReducedModel,
    ReducedState,
    SimulationTrace,
    lift_state,
    reconstruct_state,
    reduced_rhs,
    reduced_rhs_two_mode,
    simulate_reduced,
)
from nlmodes.response import (
    amplitude_sweep,
    compare_traces,
    simulate_full,
    steady_state_amplitude,
)
from nlmodes.artifact import load_family, save_family

__all__ = [
    # Systems
    "DynamicalSystem",
    "CallableSystem",
    "eval_rhs",
    "available_models",
    "build_model",
    "register_model",
    "linearized_model",
    "LinearizedSystem",
    # Spectra
    "Spectrum",
    "SpectralMode",
    "compute_spectrum",
    "find_fixed_point",
    "oscillatory_mode",
    "perturb_eigenpair",
    # Orbits and families
    "ForcedOrbit",
    "seed_orbit",
    "refine_orbit",
    "monodromy",
    "analyze_orbit",
    "ContinuationOptions",
    "OrbitFamily",
    "BackboneCurve",
    "select_modes",
    "build_family",
    "extend_family",
    "extend_family_two_mode",
    "retune_period",
    "backbone",
    # Reduced models and simulation
    "ReducedModel",
    "ReducedState",
    "SimulationTrace",
    "reduced_rhs",
    "reduced_rhs_two_mode",
    "reconstruct_state",
    "lift_state",
    "simulate_reduced",
    "simulate_full",
    "steady_state_amplitude",
    "amplitude_sweep",
    "compare_traces",
    # Persistence
    "save_family",
    "load_family",
    # Misc
    "NlmodesError",
    "setup_logger",
    "__version__",
]
