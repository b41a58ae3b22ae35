"""
nlmodes core - infrastructure shared by the numerical modules.

Vector-field interface, error hierarchy, structured logging, configuration
validation, crash-safe output, Fourier interpolation on the θ-grid and
``solve_ivp`` settings. Only numpy, scipy and pandas are required.
"""

from .base import CallableSystem, DynamicalSystem, check_state_input, eval_rhs, finite_difference_jacobian
from .errors import (
    EXIT_BOUNDARY,
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    ArtifactError,
    ContractViolationError,
    DegeneracyError,
    FamilyBoundaryError,
    InvalidModeError,
    MalformedArtifactError,
    NlmodesError,
    NoConvergenceError,
    NoSteadyStateError,
    NotAFixedPointError,
    OutOfNeighborhoodError,
    ParameterError,
    RangeError,
    RepeatedEigenvalueError,
    RetuneNeededError,
    SingularityError,
    StabilityError,
    UnsupportedConfigurationError,
)
from .logger import ERROR_CODES, StageLogger, get_logger, setup_logger
from .config_validator import (
    ConfigError,
    ConfigValidationError,
    ValidationResult,
    apply_overrides,
    config_hash,
    load_config_strict,
    validate_and_load_config,
    validate_config_schema,
)
from .atomic_write import atomic_write, atomic_write_bytes, check_write_permissions
from .reporting import provenance_line, read_table, summarize_run, write_table
from .signal_handlers import GracefulShutdown, shutdown_manager
from .fourier import FourierSeries, theta_grid
from .integrate import IntegratorSettings, integrate

__all__ = [
    # Systems
    "DynamicalSystem",
    "CallableSystem",
    "check_state_input",
    "eval_rhs",
    "finite_difference_jacobian",
    # Errors
    "NlmodesError",
    "ContractViolationError",
    "ParameterError",
    "UnsupportedConfigurationError",
    "NotAFixedPointError",
    "NoConvergenceError",
    "StabilityError",
    "InvalidModeError",
    "RepeatedEigenvalueError",
    "DegeneracyError",
    "RetuneNeededError",
    "FamilyBoundaryError",
    "SingularityError",
    "RangeError",
    "OutOfNeighborhoodError",
    "NoSteadyStateError",
    "ArtifactError",
    "MalformedArtifactError",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_NUMERICAL",
    "EXIT_BOUNDARY",
    # Logging
    "ERROR_CODES",
    "StageLogger",
    "get_logger",
    "setup_logger",
    # Config
    "ConfigError",
    "ConfigValidationError",
    "ValidationResult",
    "apply_overrides",
    "config_hash",
    "load_config_strict",
    "validate_and_load_config",
    "validate_config_schema",
    # Output
    "atomic_write",
    "atomic_write_bytes",
    "check_write_permissions",
    "provenance_line",
    "read_table",
    "summarize_run",
    "write_table",
    "GracefulShutdown",
    "shutdown_manager",
    # Numerics
    "FourierSeries",
    "theta_grid",
    "IntegratorSettings",
    "integrate",
]
