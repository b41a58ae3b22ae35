"""
Classical multi-machine power system in phase-difference form.

Each generator i obeys the swing equation with constant internal EMF E_i

    δ̇_i = ω_i
    ω̇_i = ω₀/(2H_i) · (P_m,i - D_i ω_i/ω₀ - P_e,i(δ) + u_i)
    P_e,i = E_i² G_ii + Σ_{j≠i} E_i E_j (G_ij cos δ_ij + B_ij sin δ_ij)

where ω_i is the rotor speed deviation from the synchronous speed ω₀ (rad/s)
and G + jB is the network admittance matrix reduced to the internal buses.
Angles are measured relative to generator 1: φ_1j = δ_1 - δ_j. The state is
(φ_12, ..., φ_1m, ω_1, ..., ω_m), dimension 2m - 1; u_i are torque (power)
perturbations in per unit on each rotor-speed equation.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from ..core.base import DynamicalSystem
from ..core.errors import ParameterError, UnsupportedConfigurationError

SYNCHRONOUS_SPEED_60HZ = 2.0 * np.pi * 60.0

# IEEE 3-generator 9-bus system (Anderson & Fouad data), admittance matrix
# reduced to the generator internal nodes, per unit on 100 MVA.
IEEE9_INERTIA = (23.64, 6.40, 3.01)
IEEE9_EMF = (1.0566, 1.0502, 1.0170)
IEEE9_LOAD_FLOW_ANGLES_DEG = (2.2717, 19.7315, 13.1752)
IEEE9_PUBLISHED_MECHANICAL_POWER = (0.716, 1.630, 0.850)
IEEE9_ADMITTANCE = np.array([
    [0.846 - 2.988j, 0.287 + 1.513j, 0.210 + 1.226j],
    [0.287 + 1.513j, 0.420 - 2.724j, 0.213 + 1.088j],
    [0.210 + 1.226j, 0.213 + 1.088j, 0.277 - 2.368j],
])


def electrical_power(delta: np.ndarray, emf: np.ndarray, admittance: np.ndarray) -> np.ndarray:
    """P_e,i for absolute angles ``delta``."""
    g, b = admittance.real, admittance.imag
    diff = delta[:, None] - delta[None, :]
    return emf * ((g * np.cos(diff) + b * np.sin(diff)) @ emf)


def electrical_power_gradient(delta: np.ndarray, emf: np.ndarray, admittance: np.ndarray) -> np.ndarray:
    """∂P_e,i/∂δ_j (m×m)."""
    g, b = admittance.real, admittance.imag
    diff = delta[:, None] - delta[None, :]
    coupling = np.outer(emf, emf) * (g * np.sin(diff) - b * np.cos(diff))
    np.fill_diagonal(coupling, 0.0)
    grad = coupling.copy()
    np.fill_diagonal(grad, -coupling.sum(axis=1))
    return grad


@dataclass(frozen=True)
class PowerSystemParams:
    """
    Classical-model data.

    ``mechanical_power=None`` balances each generator at ``operating_angles_deg``
    (P_m,i = P_e,i there), placing the equilibrium exactly at those angles.
    """
    inertia: Sequence[float] = IEEE9_INERTIA
    damping: Optional[Sequence[float]] = None
    emf: Sequence[float] = IEEE9_EMF
    admittance: np.ndarray = field(default_factory=lambda: IEEE9_ADMITTANCE.copy())
    mechanical_power: Optional[Sequence[float]] = None
    operating_angles_deg: Sequence[float] = IEEE9_LOAD_FLOW_ANGLES_DEG
    omega0: float = SYNCHRONOUS_SPEED_60HZ

    def __post_init__(self):
        m = len(self.inertia)
        admittance = np.asarray(self.admittance, dtype=complex)
        if admittance.shape != (m, m):
            raise ParameterError("power.admittance", f"must be {m}x{m}", admittance.shape)
        if not np.all(np.isfinite(admittance)):
            raise ParameterError("power.admittance", "entries must be finite")
        if any(h <= 0 for h in self.inertia):
            raise ParameterError("power.inertia", "every H_i must be positive", tuple(self.inertia))
        damping = tuple(self.damping) if self.damping is not None else tuple(self.inertia)
        for name, values in (("emf", self.emf), ("damping", damping),
                             ("operating_angles_deg", self.operating_angles_deg)):
            if len(values) != m:
                raise ParameterError(f"power.{name}", f"needs {m} entries", tuple(values))
        if self.mechanical_power is not None and len(self.mechanical_power) != m:
            raise ParameterError("power.mechanical_power", f"needs {m} entries")
        object.__setattr__(self, "admittance", admittance)
        object.__setattr__(self, "damping", damping)

    @property
    def generator_count(self) -> int:
        return len(self.inertia)

    def operating_angles(self) -> np.ndarray:
        return np.deg2rad(np.asarray(self.operating_angles_deg, dtype=float))

    def balanced_mechanical_power(self) -> np.ndarray:
        if self.mechanical_power is not None:
            return np.asarray(self.mechanical_power, dtype=float)
        return electrical_power(self.operating_angles(), np.asarray(self.emf), self.admittance)


def ieee9bus_params(**overrides) -> PowerSystemParams:
    """IEEE 3-generator 9-bus data with D_i = H_i (uniform damping ratio 0.5)."""
    return PowerSystemParams(**overrides)


class PowerSystem(DynamicalSystem):
    """Phase-difference swing model, state (φ_12..φ_1m, ω_1..ω_m)."""

    name = "ieee9bus"

    def __init__(self, params: PowerSystemParams):
        m = params.generator_count
        labels = [f"phi1{j}" for j in range(2, m + 1)] + [f"omega{i}" for i in range(1, m + 1)]
        super().__init__(2 * m - 1, m, state_labels=labels,
                         input_labels=[f"torque{i}" for i in range(1, m + 1)])
        self.params = params
        self._m = m
        self._emf = np.asarray(params.emf, dtype=float)
        self._y = params.admittance
        self._gain = params.omega0 / (2.0 * np.asarray(params.inertia, dtype=float))
        self._friction = np.asarray(params.damping, dtype=float) / params.omega0
        self._pm = params.balanced_mechanical_power()

    @property
    def mechanical_power(self) -> np.ndarray:
        return self._pm.copy()

    def angles(self, x: np.ndarray) -> np.ndarray:
        """Absolute angles with δ_1 = 0."""
        return np.concatenate([[0.0], -np.asarray(x[:self._m - 1])])

    def rhs(self, x, u):
        m = self._m
        omega = x[m - 1:]
        pe = electrical_power(self.angles(x), self._emf, self._y)
        domega = self._gain * (self._pm - self._friction * omega - pe + u)
        return np.concatenate([omega[0] - omega[1:], domega])

    def jac_state(self, x, u):
        m = self._m
        n = 2 * m - 1
        jac = np.zeros((n, n))
        jac[:m - 1, m - 1] = 1.0
        jac[np.arange(m - 1), m + np.arange(m - 1)] = -1.0

        grad = electrical_power_gradient(self.angles(x), self._emf, self._y)
        # δ_j = δ_1 - φ_1j for j ≥ 2
        jac[m - 1:, :m - 1] = self._gain[:, None] * grad[:, 1:]
        jac[m - 1:, m - 1:] = -np.diag(self._gain * self._friction)
        return jac

    def jac_input(self, x, u):
        b = np.zeros((2 * self._m - 1, self._m))
        b[self._m - 1:, :] = np.diag(self._gain)
        return b

    def default_guess(self) -> np.ndarray:
        delta = self.params.operating_angles()
        return np.concatenate([delta[0] - delta[1:], np.zeros(self._m)])


def build_phase_difference_model(params: PowerSystemParams) -> PowerSystem:
    """Three-generator phase-difference model, state (φ12, φ13, ω1, ω2, ω3)."""
    if params.generator_count != 3:
        raise UnsupportedConfigurationError(
            f"Phase-difference model supports m=3 generators, got m={params.generator_count}"
        )
    return PowerSystem(params)


__all__: Tuple[str, ...] = (
    "PowerSystemParams", "PowerSystem", "build_phase_difference_model", "ieee9bus_params",
    "electrical_power", "electrical_power_gradient", "IEEE9_PUBLISHED_MECHANICAL_POWER",
)
