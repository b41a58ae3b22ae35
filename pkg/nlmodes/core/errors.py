"""
Exception hierarchy for nlmodes.

Every library error carries an ``error_code`` (see ``core.logger.ERROR_CODES``)
and the process ``exit_code`` the CLI uses when the error reaches it:

    0  success
    2  configuration / parameter error
    3  numerical failure
    4  family boundary reached before q_max

Library code raises; only ``nlmodes.cli`` turns errors into exit codes.
"""

from typing import Any, List, Optional, Sequence, Tuple

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BOUNDARY = 4


class NlmodesError(Exception):
    """Base class for all nlmodes errors."""

    error_code = "RT-00"
    exit_code = EXIT_NUMERICAL


class ContractViolationError(NlmodesError, ValueError):
    """Arguments violate a documented shape or dimension contract."""

    error_code = "CFG-02"


class ParameterError(NlmodesError, ValueError):
    """A numerical parameter lies outside its admissible interval."""

    error_code = "CFG-02"
    exit_code = EXIT_CONFIG

    def __init__(self, name: str, message: str, value: Any = None):
        self.name = name
        self.value = value
        full_message = f"Parameter '{name}': {message}"
        if value is not None:
            full_message += f" (got: {value!r})"
        super().__init__(full_message)


class UnsupportedConfigurationError(NlmodesError):
    """Requested model or model variant is not supported."""

    error_code = "CFG-02"
    exit_code = EXIT_CONFIG


class NotAFixedPointError(NlmodesError):
    """Linearization requested away from an equilibrium."""

    error_code = "NUM-02"

    def __init__(self, residual: float, tol: float):
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"State is not a fixed point: |F(x, 0)| = {residual:.3e} exceeds {tol:.1e}"
        )


class NoConvergenceError(NlmodesError):
    """Newton-type iteration failed; keeps the residual history for diagnosis."""

    error_code = "NUM-01"

    def __init__(self, message: str, residual_history: Optional[Sequence[float]] = None):
        self.residual_history: List[float] = list(residual_history or [])
        if self.residual_history:
            message += f" (residuals: {', '.join(f'{r:.2e}' for r in self.residual_history[-5:])})"
        super().__init__(message)


class StabilityError(NlmodesError):
    """Fixed point Jacobian is not Hurwitz."""

    error_code = "NUM-02"


class InvalidModeError(NlmodesError):
    """Selected eigenvalue cannot serve as an oscillatory mode."""

    error_code = "NUM-03"


class RepeatedEigenvalueError(InvalidModeError):
    """Eigenvalue is not simple within tolerance."""


class DegeneracyError(NlmodesError):
    """Floquet data cannot be normalized (defective or colliding multipliers)."""

    error_code = "NUM-03"

    def __init__(self, message: str, q: Any = None):
        self.q = q
        if q is not None:
            message += f" at q={_format_q(q)}"
        super().__init__(message)


class RetuneNeededError(DegeneracyError):
    """Tracked multiplier pair is about to coincide; the period must be retuned."""

    error_code = "NUM-05"

    def __init__(self, q: Any, delta_omega: float, argument: float):
        self.delta_omega = delta_omega
        self.argument = argument
        super().__init__(
            f"Multiplier pair near the real axis (arg = {argument:.4f} rad); "
            f"retune by delta_omega={delta_omega:.4g}",
            q=q,
        )


class FamilyBoundaryError(NlmodesError):
    """The tracked complex multiplier pair became real; continuation stops."""

    error_code = "NUM-04"
    exit_code = EXIT_BOUNDARY

    def __init__(self, terminal_q: Any, message: str = "", family: Any = None):
        self.terminal_q = terminal_q
        self.family = family
        text = f"Family boundary reached after q={_format_q(terminal_q)}"
        if message:
            text += f": {message}"
        super().__init__(text)


class SingularityError(NlmodesError):
    """Reduced-model linear solve is singular."""

    error_code = "NUM-06"

    def __init__(self, theta: float, q: Any, message: str = "singular reduced solve"):
        self.theta = theta
        self.q = q
        super().__init__(f"{message} at theta={theta:.6f}, q={_format_q(q)}")


class RangeError(NlmodesError, ValueError):
    """Amplitude coordinate outside the stored family."""

    error_code = "RNG-01"

    def __init__(self, q: Any, bounds: Sequence[Tuple[float, float]]):
        self.q = q
        self.bounds = list(bounds)
        ranges = ", ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in self.bounds)
        super().__init__(f"q={_format_q(q)} outside family range {ranges}")


class OutOfNeighborhoodError(NlmodesError):
    """State too far from every stored orbit to be lifted."""

    error_code = "RNG-02"

    def __init__(self, distance: float, limit: float):
        self.distance = distance
        self.limit = limit
        super().__init__(
            f"State lies {distance:.4g} from the family, beyond the lift limit {limit:.4g}"
        )


class NoSteadyStateError(NlmodesError):
    """Forced response did not settle onto a periodic steady state."""

    error_code = "NUM-07"


class ArtifactError(NlmodesError):
    """Family artifact is malformed or written by an incompatible schema."""

    error_code = "ART-01"
    exit_code = EXIT_CONFIG


class MalformedArtifactError(ArtifactError):
    """Artifact is not a readable family archive."""

    error_code = "ART-02"


def _format_q(q: Any) -> str:
    try:
        values = [float(v) for v in q]
    except TypeError:
        return f"{float(q):.6g}"
    return "(" + ", ".join(f"{v:.6g}" for v in values) + ")"
