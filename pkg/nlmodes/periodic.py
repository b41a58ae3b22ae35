"""
Forced periodic orbits of the augmented autonomous system and their Floquet data.

A forced orbit solves ẋ = F(x, 0) + α(q, θ) with θ = ω t. Appending the time
variable s (ṡ = 1) gives an autonomous system in y = (x, s) ∈ R^{N+1} whose
Jacobian along the orbit is

    J(t) = [[∂F/∂x(x^γ(t), 0),  ∂α/∂s],
            [0,                 0    ]],     ∂α/∂s = ω ∂α/∂θ.

All θ-periodic quantities are stored as samples on the uniform grid
θ_k = 2πk/n_θ (time t_k = θ_k/ω) and interpolated with ``FourierSeries``.

Floquet functions come from the eigen-decomposition Φ(T) V = V diag(μ) of
the monodromy matrix and the sampled fundamental matrix Φ(t):

    g_j(t) = Φ(t) v_j e^{-κ_j t},   I_j(t) = Φ(t)^{-T} w_j e^{κ_j t},
    Z(t)   = ω Φ(t)^{-T} w_0,       κ_j = log(μ_j)/T (principal branch),

with Wᵀ V = Id so g_kᵀ I_j = δ_kj holds at every sample.
"""

import dataclasses
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .core.base import DynamicalSystem
from .core.errors import (
    ContractViolationError,
    DegeneracyError,
    FamilyBoundaryError,
    NoConvergenceError,
    ParameterError,
    RetuneNeededError,
)
from .core.fourier import FourierSeries, theta_grid
from .core.integrate import DEFAULT_SETTINGS, IntegratorSettings, integrate
from .core.logger import StageLogger
from .spectral import SpectralMode

logger = logging.getLogger(__name__)

DEFAULT_N_THETA = 256
SHOOTING_TOL = 1e-10
MAX_NEWTON = 20
CONDITION_LIMIT = 1e10
REAL_MULTIPLIER_TOL = 1e-10
PHASE_MULTIPLIER_TOL = 1e-6
PERIODICITY_TOL = 1e-8
# Harmonics below this fraction of the largest are skipped inside integrators
FORCING_CUTOFF = 1e-14


@dataclass(frozen=True, eq=False)
class ForcedOrbit:
    """
    One forced periodic orbit with (optionally) its Floquet data.

    Mode-indexed arrays follow ``modes``: position 0 is the family mode, the
    others are additional oscillatory modes, each standing for a conjugate
    pair whose second member is implied.

    Attributes:
        q: amplitude parameters, shape (1,) or (3,)
        omega: angular frequency 2π/T (rad/s)
        x_gamma: (n_θ, N) orbit samples
        alpha: (n_θ, N) forcing samples
        x_ss: fixed point the family grows from
        modes: 1-based oscillatory labels of the linear modes tracked
        anchor_indices: anchor entry per tracked mode
        multipliers: all N+1 monodromy eigenvalues
        mode_multipliers: multiplier matched to each tracked mode
        kappa: Floquet exponent per tracked mode (principal logarithm)
        branch: integer m per tracked mode with Imag κ = Imag λ - 2πm/T + O(q)
        g, I: (n_modes, n_θ, N+1) complex eigenfunctions and gradients
        Z: (n_θ, N+1) phase gradient
        E: (n_modes, n_θ, n_q) sensitivities -I_jᵀ ∂y/∂q_k
    """
    q: np.ndarray
    omega: float
    x_gamma: np.ndarray
    alpha: np.ndarray
    x_ss: np.ndarray
    modes: Tuple[int, ...] = (1,)
    anchor_indices: Tuple[int, ...] = (0,)
    multipliers: Optional[np.ndarray] = None
    mode_multipliers: Optional[np.ndarray] = None
    kappa: Optional[np.ndarray] = None
    branch: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None
    I: Optional[np.ndarray] = None
    Z: Optional[np.ndarray] = None
    E: Optional[np.ndarray] = None
    retuned: bool = False
    shooting_residual: float = np.nan
    newton_iterations: int = 0

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    @property
    def n_theta(self) -> int:
        return self.x_gamma.shape[0]

    @property
    def dim_state(self) -> int:
        return self.x_gamma.shape[1]

    @property
    def theta(self) -> np.ndarray:
        return theta_grid(self.n_theta)

    @property
    def times(self) -> np.ndarray:
        return self.theta / self.omega

    @property
    def analyzed(self) -> bool:
        return self.g is not None and self.I is not None

    @cached_property
    def orbit_series(self) -> FourierSeries:
        return FourierSeries(self.x_gamma)

    @cached_property
    def forcing_series(self) -> FourierSeries:
        return FourierSeries(self.alpha, cutoff=FORCING_CUTOFF)

    @cached_property
    def forcing_derivative(self) -> FourierSeries:
        """dα/dθ."""
        return FourierSeries(self.alpha).derivative()

    def mode_position(self, label: int) -> int:
        try:
            return self.modes.index(label)
        except ValueError:
            raise ContractViolationError(
                f"Mode {label} is not tracked on this orbit (tracked: {self.modes})"
            ) from None

    def require_analysis(self) -> None:
        if not self.analyzed:
            raise ContractViolationError(f"Orbit at q={self.q} has no Floquet data; run analyze_orbit first")

    def without_floquet(self, **changes) -> "ForcedOrbit":
        """Copy with Floquet fields cleared (after the orbit or period changed)."""
        cleared = dict(multipliers=None, mode_multipliers=None, kappa=None, branch=None,
                       g=None, I=None, Z=None, E=None)
        cleared.update(changes)
        return dataclasses.replace(self, **cleared)


@dataclass(frozen=True, eq=False)
class MonodromyResult:
    """
    Monodromy matrix of the augmented system and its eigen-decomposition.

    ``right`` columns are eigenvectors; ``left`` satisfies leftᵀ right = Id.
    ``fundamental[k]`` is Φ(t_k) on the orbit's time grid.
    """
    phi: np.ndarray
    multipliers: np.ndarray
    right: np.ndarray
    left: np.ndarray
    fundamental: np.ndarray
    period: float
    phase_index: int

    @property
    def exponents(self) -> np.ndarray:
        """Principal-branch Floquet exponents log(μ)/T."""
        return np.log(self.multipliers.astype(complex)) / self.period

    def branch_integer(self, index: int, reference_imag: float) -> int:
        """m with Imag κ = reference_imag - 2πm/T, rounded to the nearest integer."""
        principal = np.angle(self.multipliers[index])
        return int(np.round((reference_imag * self.period - principal) / (2.0 * np.pi)))


# =============================================================================
# Seeds
# =============================================================================

def admissible_delta_omega(frequency: float, delta_omega: Optional[float]) -> float:
    """
    Default and check the detuning Δω for a mode with Imag λ = ``frequency``.

    Raises:
        ParameterError: unless Δω ≠ 0 and -frequency/3 < Δω < frequency
    """
    if delta_omega is None:
        return 0.1 * frequency
    delta_omega = float(delta_omega)
    if delta_omega == 0.0 or not -frequency / 3.0 < delta_omega < frequency:
        raise ParameterError(
            "delta_omega",
            f"must be nonzero and inside ({-frequency / 3.0:.6g}, {frequency:.6g})",
            delta_omega,
        )
    return delta_omega


def seed_orbit(
    mode: SpectralMode,
    x_ss,
    q0: float,
    delta_omega: Optional[float] = None,
    n_theta: int = DEFAULT_N_THETA,
    extra_modes: Sequence[SpectralMode] = (),
) -> ForcedOrbit:
    """
    Analytic small-amplitude orbit and forcing of the linearized dynamics.

        x^γ(θ) = x_ss + 2q [Re v cos θ - Im v sin θ]
        α(θ)   = -2q Re λ [Re v cos θ - Im v sin θ] - 2Δω q [Im v cos θ + Re v sin θ]

    with ω = Imag λ + Δω and θ = ω t.
    """
    if q0 < 0 or not np.isfinite(q0):
        raise ParameterError("q0", "must be a finite non-negative amplitude", q0)
    if n_theta < 4:
        raise ParameterError("n_theta", "needs at least 4 samples", n_theta)
    delta_omega = admissible_delta_omega(mode.frequency, delta_omega)
    x_ss = np.asarray(x_ss, dtype=float)
    if x_ss.shape != mode.v.shape:
        raise ContractViolationError(f"x_ss has shape {x_ss.shape}, mode vector has {mode.v.shape}")

    theta = theta_grid(n_theta)[:, None]
    cos, sin = np.cos(theta), np.sin(theta)
    re_v, im_v = mode.v.real[None, :], mode.v.imag[None, :]
    in_phase = re_v * cos - im_v * sin
    quadrature = im_v * cos + re_v * sin

    x_gamma = x_ss[None, :] + 2.0 * q0 * in_phase
    alpha = -2.0 * q0 * mode.decay * in_phase - 2.0 * delta_omega * q0 * quadrature

    modes = (mode.mode_index,) + tuple(m.mode_index for m in extra_modes)
    anchors = (mode.anchor_index,) + tuple(m.anchor_index for m in extra_modes)
    return ForcedOrbit(
        q=np.array([float(q0)]),
        omega=mode.frequency + delta_omega,
        x_gamma=x_gamma,
        alpha=alpha,
        x_ss=x_ss.copy(),
        modes=modes,
        anchor_indices=anchors,
    )


# =============================================================================
# Shooting
# =============================================================================

def _shooting_rhs(system: DynamicalSystem, forcing: FourierSeries, omega: float):
    n = system.dim_state
    u0 = system.zero_input()

    def rhs(t, z):
        x = z[:n]
        stm = z[n:].reshape(n, n)
        dx = system.rhs(x, u0) + forcing(omega * t)
        dstm = system.jac_state(x, u0) @ stm
        return np.concatenate([dx, dstm.ravel()])

    return rhs


def _orbit_rhs(system: DynamicalSystem, forcing: FourierSeries, omega: float):
    u0 = system.zero_input()

    def rhs(t, x):
        return system.rhs(x, u0) + forcing(omega * t)

    return rhs


def refine_orbit(
    system: DynamicalSystem,
    orbit: ForcedOrbit,
    tol: float = SHOOTING_TOL,
    max_iter: int = MAX_NEWTON,
    settings: IntegratorSettings = DEFAULT_SETTINGS,
) -> ForcedOrbit:
    """
    Newton shooting for the exact T-periodic response to the orbit's forcing.

    Only x(0) is corrected: x0 ← x0 - (Φ(T) - Id)⁻¹ (x(T; x0) - x0), where Φ is
    the N×N state-transition matrix. Convergence means
    ‖x(T) - x(0)‖∞ ≤ tol·(1 + ‖x(0)‖∞). The returned orbit is resampled on
    the θ-grid and carries no Floquet data.

    Raises:
        NoConvergenceError: after ``max_iter`` steps, with the residual history
    """
    log = StageLogger("refine", logger)
    n = system.dim_state
    if orbit.dim_state != n:
        raise ContractViolationError(f"Orbit has N={orbit.dim_state}, system has N={n}")

    period = orbit.period
    rhs = _shooting_rhs(system, orbit.forcing_series, orbit.omega)
    x0 = orbit.x_gamma[0].astype(float).copy()
    eye = np.eye(n)
    history: List[float] = []
    iterations = 0

    while True:
        sol = integrate(rhs, (0.0, period), np.concatenate([x0, eye.ravel()]), settings)
        end = sol.y[:, -1]
        mismatch = end[:n] - x0
        residual = float(np.max(np.abs(mismatch)))
        history.append(residual)
        log.debug("shooting residual", q=orbit.q, iteration=iterations, residual=residual)

        if not np.isfinite(residual):
            raise NoConvergenceError(f"Shooting diverged at q={orbit.q}", history)
        if residual <= tol * (1.0 + np.max(np.abs(x0))):
            break
        if iterations >= max_iter:
            raise NoConvergenceError(
                f"Shooting did not converge in {max_iter} Newton steps at q={orbit.q}", history
            )
        stm = end[n:].reshape(n, n)
        try:
            x0 = x0 - np.linalg.solve(stm - eye, mismatch)
        except np.linalg.LinAlgError as exc:
            raise NoConvergenceError(f"Singular shooting Jacobian at q={orbit.q}", history) from exc
        iterations += 1

    samples = integrate(
        _orbit_rhs(system, orbit.forcing_series, orbit.omega),
        (0.0, period),
        x0,
        settings,
        t_eval=orbit.times,
    )
    return orbit.without_floquet(
        x_gamma=samples.y.T.copy(),
        shooting_residual=history[-1],
        newton_iterations=iterations,
    )


# =============================================================================
# Monodromy and Floquet data
# =============================================================================

def _variational_rhs(system: DynamicalSystem, orbit: ForcedOrbit):
    n = system.dim_state
    m = n + 1
    u0 = system.zero_input()
    omega = orbit.omega
    forcing = orbit.forcing_series
    slope = orbit.forcing_derivative

    def rhs(t, z):
        x = z[:n]
        phi = z[n:].reshape(m, m)
        theta = omega * t
        jac = np.zeros((m, m))
        jac[:n, :n] = system.jac_state(x, u0)
        jac[:n, n] = omega * slope(theta)
        dx = system.rhs(x, u0) + forcing(theta)
        return np.concatenate([dx, (jac @ phi).ravel()])

    return rhs


def monodromy(
    system: DynamicalSystem,
    orbit: ForcedOrbit,
    settings: IntegratorSettings = DEFAULT_SETTINGS,
) -> MonodromyResult:
    """
    Integrate the augmented variational equation over one period.

    Raises:
        DegeneracyError: eigenvector matrix of Φ(T) is numerically singular
    """
    n = system.dim_state
    m = n + 1
    period = orbit.period
    t_eval = np.append(orbit.times, period)
    z0 = np.concatenate([orbit.x_gamma[0], np.eye(m).ravel()])
    sol = integrate(_variational_rhs(system, orbit), (0.0, period), z0, settings, t_eval=t_eval)

    fundamental = sol.y[n:, :].T.reshape(-1, m, m)
    phi = fundamental[-1].copy()
    multipliers, right = scipy.linalg.eig(phi)
    right = right / np.linalg.norm(right, axis=0)

    if np.linalg.cond(right) > CONDITION_LIMIT:
        raise DegeneracyError("Monodromy matrix is not diagonalizable within tolerance", q=orbit.q)
    left = np.linalg.inv(right).T

    phase_index = int(np.argmin(np.abs(multipliers - 1.0)))
    if abs(multipliers[phase_index] - 1.0) > PHASE_MULTIPLIER_TOL:
        logger.warning(
            "No monodromy multiplier within %.0e of 1 (closest %s)", PHASE_MULTIPLIER_TOL,
            multipliers[phase_index], extra={"stage": "monodromy", "q": orbit.q},
        )

    return MonodromyResult(
        phi=phi,
        multipliers=multipliers,
        right=right,
        left=left,
        fundamental=fundamental[:-1],
        period=period,
        phase_index=phase_index,
    )


def match_multipliers(multipliers: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """
    Assign one multiplier to each target by minimum total distance.

    The multiplier 1 of the phase direction is always reserved, so targets
    never claim it.
    """
    wanted = np.concatenate([[1.0 + 0.0j], np.asarray(targets, dtype=complex)])
    cost = np.abs(wanted[:, None] - multipliers[None, :])
    rows, cols = linear_sum_assignment(cost)
    assignment = cols[np.argsort(rows)]
    return assignment[1:]


def _normalize_right(vector: np.ndarray, anchor: int) -> np.ndarray:
    vector = vector / np.linalg.norm(vector)
    if abs(vector[anchor]) < 1e-12:
        raise DegeneracyError(f"Anchor entry {anchor} of a Floquet vector vanishes")
    vector = vector * np.exp(1j * (-np.pi - np.angle(vector[anchor])))
    vector[anchor] = -abs(vector[anchor])
    return vector


def _floquet_basis(mono: MonodromyResult, indices: Sequence[int], anchors: Sequence[int]):
    """Right eigenvectors normalized for ``indices`` and the matching dual basis."""
    right = mono.right.astype(complex).copy()
    for index, anchor in zip(indices, anchors):
        right[:, index] = _normalize_right(right[:, index], anchor)
    left = np.linalg.inv(right).T
    return right, left


def _eigenfunction_samples(mono: MonodromyResult, vector: np.ndarray, kappa: complex, times) -> np.ndarray:
    decay = np.exp(-kappa * times)
    return np.einsum("kij,j->ki", mono.fundamental, vector) * decay[:, None]


def _gradient_samples(mono: MonodromyResult, dual: np.ndarray, kappa: complex, times) -> np.ndarray:
    inverse_t = np.swapaxes(np.linalg.inv(mono.fundamental), 1, 2)
    growth = np.exp(kappa * times)
    return np.einsum("kij,j->ki", inverse_t, dual) * growth[:, None]


def _locate(mono: MonodromyResult, kappa: complex) -> int:
    target = np.exp(kappa * mono.period)
    distance = np.abs(mono.multipliers - target)
    order = np.argsort(distance)
    index = int(order[0])
    if distance.size > 1 and distance[order[1]] < 1e-8 * max(1.0, abs(target)):
        raise DegeneracyError(f"Multiplier {target:.6g} is repeated")
    return index


def floquet_eigenfunction(
    system: DynamicalSystem,
    orbit: ForcedOrbit,
    kappa: complex,
    anchor_index: int = 0,
    monodromy_result: Optional[MonodromyResult] = None,
) -> np.ndarray:
    """
    Periodic solution g of ġ = (J(t) - κ Id) g on the θ-grid, (n_θ, N+1).

    Scaled so ‖g(0)‖ = 1 and the anchor entry of g(0) is a negative real.
    """
    mono = monodromy_result or monodromy(system, orbit)
    index = _locate(mono, kappa)
    vector = _normalize_right(mono.right[:, index].astype(complex), anchor_index)
    return _eigenfunction_samples(mono, vector, mono.exponents[index], orbit.times)


def floquet_gradient(
    system: DynamicalSystem,
    orbit: ForcedOrbit,
    kappa: complex,
    anchor_index: int = 0,
    monodromy_result: Optional[MonodromyResult] = None,
) -> np.ndarray:
    """
    Periodic solution I of İ = -(Jᵀ(t) - κ Id) I on the θ-grid, (n_θ, N+1).

    Normalized against the eigenfunctions of ``floquet_eigenfunction`` so that
    g_kᵀ I_j = δ_kj.
    """
    mono = monodromy_result or monodromy(system, orbit)
    index = _locate(mono, kappa)
    _, left = _floquet_basis(mono, [index], [anchor_index])
    return _gradient_samples(mono, left[:, index], mono.exponents[index], orbit.times)


def orbit_tangent(system: DynamicalSystem, orbit: ForcedOrbit) -> np.ndarray:
    """∂y^γ/∂θ on the grid: ((F(x,0) + α)/ω, 1/ω), shape (n_θ, N+1)."""
    u0 = system.zero_input()
    flow = np.array([system.rhs(x, u0) for x in orbit.x_gamma]) + orbit.alpha
    tangent = np.empty((orbit.n_theta, orbit.dim_state + 1))
    tangent[:, :-1] = flow / orbit.omega
    tangent[:, -1] = 1.0 / orbit.omega
    return tangent


def phase_gradient(
    system: DynamicalSystem,
    orbit: ForcedOrbit,
    monodromy_result: Optional[MonodromyResult] = None,
) -> np.ndarray:
    """
    Periodic adjoint solution Z with Z(θ)ᵀ ∂y^γ/∂t = ω at every θ, (n_θ, N+1).

    For a forced orbit the state block is ≈ 0 and the last entry ≈ ω.
    """
    mono = monodromy_result or monodromy(system, orbit)
    velocity0 = orbit_tangent(system, orbit)[0] * orbit.omega
    dual = mono.left[:, mono.phase_index].astype(complex)
    dual = dual / (dual @ velocity0)
    inverse_t = np.swapaxes(np.linalg.inv(mono.fundamental), 1, 2)
    return (orbit.omega * np.einsum("kij,j->ki", inverse_t, dual)).real


def sensitivity_E(orbit: ForcedOrbit, dx_dq: np.ndarray) -> np.ndarray:
    """
    E_j,k(θ) = -I_j(θ)ᵀ ∂y^γ/∂q_k with ∂s/∂q = 0.

    Args:
        orbit: analyzed orbit
        dx_dq: (n_q, n_θ, N) or (n_θ, N) orbit derivatives

    Returns:
        (n_modes, n_θ, n_q) complex
    """
    orbit.require_analysis()
    dx_dq = np.asarray(dx_dq, dtype=float)
    if dx_dq.ndim == 2:
        dx_dq = dx_dq[None]
    if dx_dq.shape[1:] != orbit.x_gamma.shape:
        raise ContractViolationError(
            f"dx_dq has shape {dx_dq.shape}, expected (n_q,) + {orbit.x_gamma.shape}"
        )
    return -np.einsum("jkn,qkn->jkq", orbit.I[:, :, :-1], dx_dq)


def family_direction(orbit: ForcedOrbit, label: Optional[int] = None) -> np.ndarray:
    """2 Re g_j,1: the orbit increment per unit q along mode ``label`` (default: family mode)."""
    orbit.require_analysis()
    position = 0 if label is None else orbit.mode_position(label)
    return 2.0 * orbit.g[position, :, :-1].real


def analyze_orbit(
    system: DynamicalSystem,
    orbit: ForcedOrbit,
    modes: Sequence[SpectralMode],
    previous: Optional[ForcedOrbit] = None,
    settings: IntegratorSettings = DEFAULT_SETTINGS,
    retune_threshold: Optional[float] = None,
    dx_dq: Optional[np.ndarray] = None,
    retune_step: float = 0.02,
) -> ForcedOrbit:
    """
    Fill κ, g, I, Z and E for ``orbit``.

    Multipliers are matched to ``previous`` (continuation) or to exp(λ_j T)
    (seed). ``modes[0]`` is the family mode. E defaults to the single-mode
    construction direction ∂x^γ/∂q = 2 Re g_1,1, which gives E_1 = -1.

    Raises:
        FamilyBoundaryError: family multiplier became real or Re κ_1 ≥ 0
        RetuneNeededError: |sin arg μ_1| < retune_threshold
        DegeneracyError: another tracked multiplier became real or is repeated
    """
    log = StageLogger("monodromy", logger)
    if not modes:
        raise ContractViolationError("analyze_orbit needs at least the family mode")
    mono = monodromy(system, orbit, settings)
    period = mono.period

    if previous is not None and previous.mode_multipliers is not None:
        targets = np.asarray(previous.mode_multipliers)
        references = previous.kappa.imag + 2.0 * np.pi * previous.branch / previous.period
    else:
        targets = np.array([np.exp(m.eigenvalue * period) for m in modes])
        references = np.array([m.frequency for m in modes])
    if targets.size != len(modes):
        raise ContractViolationError("previous orbit tracks a different number of modes")

    indices = match_multipliers(mono.multipliers, targets)
    mode_multipliers = mono.multipliers[indices]
    principal = np.array([mono.branch_integer(i, ref) for i, ref in zip(indices, references)])
    # stay on the previous node's branch so g and I vary continuously in q
    branch = principal if previous is None or previous.branch is None else np.asarray(previous.branch)
    kappa = mono.exponents[indices] + 2j * np.pi * (principal - branch) / period

    first = mode_multipliers[0]
    if abs(first.imag) <= REAL_MULTIPLIER_TOL * abs(first):
        raise FamilyBoundaryError(
            previous.q if previous is not None else orbit.q,
            f"tracked multiplier pair became real ({first.real:.6g}) at q={orbit.q}",
        )
    if kappa[0].real >= 0.0:
        raise FamilyBoundaryError(
            previous.q if previous is not None else orbit.q,
            f"Re(kappa_1) = {kappa[0].real:.4g} is no longer negative at q={orbit.q}",
        )
    for label, mu in zip(modes[1:], mode_multipliers[1:]):
        if abs(mu.imag) <= REAL_MULTIPLIER_TOL * abs(mu):
            raise DegeneracyError(f"multiplier pair of mode {label.mode_index} became real", q=orbit.q)

    # arg μ_1 moves by about -2πΔω/ω under a retune; step away from the real axis
    argument = float(np.angle(first))
    if retune_threshold is not None and abs(np.sin(argument)) < retune_threshold:
        direction = -np.sign(np.sin(2.0 * argument)) or 1.0
        raise RetuneNeededError(orbit.q, direction * retune_step * orbit.omega, argument)

    anchors = [m.anchor_index for m in modes]
    right, left = _floquet_basis(mono, indices, anchors)
    times = orbit.times
    g = np.stack([_eigenfunction_samples(mono, right[:, i], k, times) for i, k in zip(indices, kappa)])
    grad = np.stack([_gradient_samples(mono, left[:, i], k, times) for i, k in zip(indices, kappa)])

    # g(T) = Φ(T) v e^{-κT} must return to g(0) = v
    for position, i in enumerate(indices):
        wrapped = mono.phi @ right[:, i] * np.exp(-kappa[position] * period)
        defect = float(np.max(np.abs(wrapped - right[:, i])))
        if defect > PERIODICITY_TOL:
            log.warning(f"Floquet eigenfunction periodicity defect {defect:.2e}",
                        q=orbit.q, mode=modes[position].mode_index)

    analyzed = dataclasses.replace(
        orbit,
        modes=tuple(m.mode_index for m in modes),
        anchor_indices=tuple(anchors),
        multipliers=mono.multipliers.copy(),
        mode_multipliers=mode_multipliers,
        kappa=kappa,
        branch=branch,
        g=g,
        I=grad,
        Z=phase_gradient(system, orbit, mono),
    )
    direction = family_direction(analyzed) if dx_dq is None else dx_dq
    analyzed = dataclasses.replace(analyzed, E=sensitivity_E(analyzed, direction))

    log.debug(
        "orbit analyzed",
        q=orbit.q,
        kappa=[complex(k) for k in kappa],
        multiplier=complex(first),
    )
    return analyzed


def normalization_defects(system: DynamicalSystem, orbit: ForcedOrbit) -> Tuple[float, float]:
    """
    Largest violations of the adjoint normalizations on the grid.

    Returns:
        (max |g_kᵀ I_j - δ_kj| over tracked pairs and conjugates,
         max |I_jᵀ ∂y/∂θ| / ‖∂y/∂θ‖)
    """
    orbit.require_analysis()
    g_all = np.concatenate([orbit.g, np.conj(orbit.g)])
    i_all = np.concatenate([orbit.I, np.conj(orbit.I)])
    gram = np.einsum("akn,bkn->kab", g_all, i_all)
    identity = np.eye(g_all.shape[0])[None]
    biorthogonality = float(np.max(np.abs(gram - identity)))

    tangent = orbit_tangent(system, orbit)
    scale = np.linalg.norm(tangent, axis=1)
    tangency = float(np.max(np.abs(np.einsum("jkn,kn->jk", orbit.I, tangent)) / scale[None, :]))
    return biorthogonality, tangency
