"""
Damped pendulum driven by an external torque.

State (φ, φ̇) in rad and rad/s; input u is a torque in N·m entering the
φ̇ equation through 1/(mL²):

    φ̈ = -(g/L) sin φ - b/(mL²) φ̇ + u/(mL²)
"""

from dataclasses import dataclass

import numpy as np

from ..core.base import DynamicalSystem
from ..core.errors import ParameterError


@dataclass(frozen=True)
class PendulumParams:
    """Pendulum constants (kg, m, kg·m²/s, m/s²)."""
    mass: float = 0.104
    length: float = 9.8
    damping: float = 1.0
    gravity: float = 9.8

    def __post_init__(self):
        for name in ("mass", "length", "damping", "gravity"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f"pendulum.{name}", "must be strictly positive", value)

    @property
    def inertia(self) -> float:
        return self.mass * self.length ** 2


class Pendulum(DynamicalSystem):
    name = "pendulum"

    def __init__(self, params: PendulumParams = PendulumParams()):
        super().__init__(2, 1, state_labels=("phi", "phi_dot"), input_labels=("torque",))
        self.params = params
        self._stiffness = params.gravity / params.length
        self._friction = params.damping / params.inertia
        self._gain = 1.0 / params.inertia

    def rhs(self, x, u):
        return np.array([
            x[1],
            -self._stiffness * np.sin(x[0]) - self._friction * x[1] + self._gain * u[0],
        ])

    def jac_state(self, x, u):
        return np.array([
            [0.0, 1.0],
            [-self._stiffness * np.cos(x[0]), -self._friction],
        ])

    def jac_input(self, x, u):
        return np.array([[0.0], [self._gain]])

    def energy(self, x) -> np.ndarray:
        """Mechanical energy ½mL²φ̇² + mgL(1 - cos φ) for states on the last axis."""
        x = np.asarray(x, dtype=float)
        p = self.params
        return 0.5 * p.inertia * x[..., 1] ** 2 + p.mass * p.gravity * p.length * (1.0 - np.cos(x[..., 0]))
