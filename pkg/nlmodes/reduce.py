"""
Adaptive phase-amplitude reduced models.

State of the single-mode model: phase θ, amplitude q and the retained
Floquet coordinates ψ_j (one complex value per conjugate pair). With the
effective input U_e = F(x, u) - F(x, 0) - α(q, θ) and b_j = I_j,1ᵀ U_e:

    [Re E_1  Re I_1,2] [q̇ ]     [Re b_1]
    [Im E_1  Im I_1,2] [f_θ] = - [Im b_1]

    θ̇   = ω(q) (1 + f_θ)
    ψ̇_j = κ_j ψ_j + b_j + I_j,2 f_θ + E_j q̇

so ψ_1 obeys pure decay and is dropped. The two-mode model solves the
analogous 4×4 system for (q̇_1, f_θ, q̇_2, q̇_3) and drops ψ_1 and ψ_3.

Quantities are interpolated with cubic splines in q (linear on a two-mode
lattice) and trigonometric series in θ. Below the first family node the
model follows the small-amplitude structure of the seed: the orbit offset,
α and I_1,2 scale linearly with q while I_1,1, κ, ω and g stay frozen.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline, RegularGridInterpolator
from scipy.optimize import minimize

from .core.base import DynamicalSystem, check_state_input
from .core.errors import (
    ContractViolationError,
    OutOfNeighborhoodError,
    RangeError,
    SingularityError,
)
from .core.fourier import fourier_basis, fourier_coefficients
from .core.integrate import IntegratorSettings, integrate
from .core.logger import StageLogger
from .family import OrbitFamily, decay_ratio

logger = logging.getLogger(__name__)

REDUCED_SETTINGS = IntegratorSettings(rtol=1e-9, atol=1e-11)
SINGULAR_TOL = 1e-13
CONDITION_LIMIT = 1e12
Q_FLOOR_FRACTION = 1e-3
TERMINATIONS = ("completed", "family-boundary", "singularity")

InputFunction = Callable[[float], np.ndarray]


# =============================================================================
# Linear solves
# =============================================================================

def solve_single_mode(drive, i12, e1, theta=None, q=None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve E_1 q̇ + I_1,2 f_θ = -b_1 for real (q̇, f_θ).

    Arguments broadcast, so whole θ-grids can be solved at once.

    Raises:
        SingularityError: determinant Re E_1 Im I_1,2 - Im E_1 Re I_1,2 vanishes
    """
    drive = np.asarray(drive, dtype=complex)
    i12 = np.asarray(i12, dtype=complex)
    e1 = np.asarray(e1, dtype=complex)
    det = e1.real * i12.imag - e1.imag * i12.real
    scale = np.maximum(np.abs(e1) * np.abs(i12), np.finfo(float).tiny)
    bad = np.abs(det) <= SINGULAR_TOL * scale
    if np.any(bad):
        where = float(np.broadcast_to(np.asarray(theta if theta is not None else np.nan), bad.shape)[bad].flat[0])
        raise SingularityError(where, q if q is not None else np.nan,
                               "phase equation singular: Imag(I_1,2) and Imag(E_1) are parallel")
    q_dot = (-drive.real * i12.imag + drive.imag * i12.real) / det
    phase_rate = (-e1.real * drive.imag + e1.imag * drive.real) / det
    return q_dot, phase_rate


def two_mode_matrix(i12: complex, i32: complex, e1: np.ndarray, e3: np.ndarray) -> np.ndarray:
    """The 4×4 real system acting on (q̇_1, f_θ, q̇_2, q̇_3)."""
    rows = []
    for e, i2 in ((e1, i12), (e3, i32)):
        complex_row = np.array([e[0], i2, e[1], e[2]], dtype=complex)
        rows.extend([complex_row.real, complex_row.imag])
    return np.array(rows)


def solve_two_mode(drive1: complex, drive3: complex, i12: complex, i32: complex,
                   e1: np.ndarray, e3: np.ndarray, theta=None, q=None) -> Tuple[np.ndarray, float]:
    """
    Solve the two-mode system; returns ((q̇_1, q̇_2, q̇_3), f_θ).

    Raises:
        SingularityError: the 4×4 matrix is singular to working precision
    """
    matrix = two_mode_matrix(i12, i32, np.asarray(e1), np.asarray(e3))
    rhs = -np.array([drive1.real, drive1.imag, drive3.real, drive3.imag])
    if np.linalg.cond(matrix) > CONDITION_LIMIT:
        raise SingularityError(np.nan if theta is None else float(theta), q, "two-mode matrix singular")
    z = np.linalg.solve(matrix, rhs)
    return np.array([z[0], z[2], z[3]]), float(z[1])


# =============================================================================
# Interpolation tables
# =============================================================================

@dataclass(frozen=True)
class _Slot:
    name: str
    shape: Tuple[int, ...]
    offset: int
    periodic: bool

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1


class _Constant:
    """Interpolant of a single node."""

    def __init__(self, values: np.ndarray):
        self.values = values

    def __call__(self, q) -> np.ndarray:
        return self.values


class _NodeTable:
    """
    Complex node arrays packed into one real table and interpolated in q.

    Periodic fields are stored as Fourier coefficients (harmonics first) so
    evaluation at (θ, q) is interpolation in q followed by a series sum.
    """

    def __init__(self, family: OrbitFamily, fields: Dict[str, Tuple[np.ndarray, bool]]):
        self.slots: List[_Slot] = []
        columns = []
        offset = 0
        n_nodes = len(family)
        for name, (values, periodic) in fields.items():
            per_node = np.asarray(values, dtype=complex)
            if periodic:
                per_node = fourier_coefficients(np.moveaxis(per_node, 0, -1))
                per_node = np.moveaxis(per_node, -1, 0)
            shape = per_node.shape[1:]
            flat = per_node.reshape(n_nodes, -1)
            columns.extend([flat.real, flat.imag])
            self.slots.append(_Slot(name, shape, offset, periodic))
            offset += 2 * flat.shape[1]
        packed = np.concatenate(columns, axis=1)

        if family.mode_count == 1:
            grid = family.q_grid
            if grid.size >= 2:
                self._interp = CubicSpline(grid, packed, axis=0)
            else:
                self._interp = _Constant(packed[0])
            self._active: Optional[List[int]] = None
        else:
            node_shape = tuple(family.lattice_shape)
            lattice = packed.reshape(node_shape + (packed.shape[1],))
            self._active = [k for k, n in enumerate(node_shape) if n >= 2]
            squeezed = lattice.reshape(tuple(node_shape[k] for k in self._active) + (packed.shape[1],))
            if self._active:
                self._interp = RegularGridInterpolator(
                    tuple(family.q_axes[k] for k in self._active), squeezed,
                    method="linear", bounds_error=False, fill_value=None,
                )
            else:
                self._interp = _Constant(squeezed.reshape(-1))

    def __call__(self, q: np.ndarray) -> Dict[str, np.ndarray]:
        if self._active is None:
            packed = np.asarray(self._interp(float(q[0])))
        elif self._active:
            packed = np.asarray(self._interp(np.asarray(q)[self._active][None, :]))[0]
        else:
            packed = np.asarray(self._interp(q))
        out: Dict[str, np.ndarray] = {}
        for slot in self.slots:
            half = slot.size
            re = packed[slot.offset:slot.offset + half]
            im = packed[slot.offset + half:slot.offset + 2 * half]
            out[slot.name] = (re + 1j * im).reshape(slot.shape)
        return out


@dataclass(frozen=True)
class ModelPoint:
    """Reduced-model quantities at one (θ, q)."""
    theta: float
    q: np.ndarray
    omega: float
    kappa: np.ndarray
    x_gamma: np.ndarray
    alpha: np.ndarray
    I: np.ndarray
    g: np.ndarray
    E: np.ndarray


@dataclass(frozen=True)
class ReducedState:
    """(θ, q, ψ) with ψ aligned to ``ReducedModel.retained``."""
    theta: float
    q: np.ndarray
    psi: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    @classmethod
    def make(cls, theta: float, q, psi=None) -> "ReducedState":
        return cls(
            theta=float(np.mod(theta, 2.0 * np.pi)),
            q=np.atleast_1d(np.asarray(q, dtype=float)).copy(),
            psi=np.zeros(0, dtype=complex) if psi is None else np.atleast_1d(np.asarray(psi, dtype=complex)),
        )


@dataclass(frozen=True)
class ReducedRates:
    """Right-hand side of the reduced model at one state."""
    theta: float
    q: np.ndarray
    psi: np.ndarray
    phase_rate: float


@dataclass
class SimulationTrace:
    """
    Time series of a reduced, full or linear simulation.

    ``theta``, ``q`` and ``psi`` are only present for reduced runs.
    """
    kind: str
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    termination: str = "completed"
    theta: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    psi_labels: Tuple[int, ...] = ()

    def observable(self, weights: np.ndarray) -> np.ndarray:
        return self.x @ np.asarray(weights, dtype=float)

    def to_frame(self, state_labels: Sequence[str], input_labels: Sequence[str]) -> pd.DataFrame:
        columns: Dict[str, np.ndarray] = {"t": self.t}
        if self.theta is not None:
            columns["theta"] = self.theta
            for k in range(self.q.shape[1]):
                columns[f"q{k + 1}"] = self.q[:, k]
            for k, label in enumerate(self.psi_labels):
                index = 2 * label - 1
                columns[f"psi{index}_re"] = self.psi[:, k].real
                columns[f"psi{index}_im"] = self.psi[:, k].imag
        for k, label in enumerate(state_labels):
            columns[label] = self.x[:, k]
        for k, label in enumerate(input_labels):
            columns[label] = self.u[:, k]
        return pd.DataFrame(columns)


# =============================================================================
# Reduced model
# =============================================================================

class ReducedModel:
    """
    Interpolated single- or two-mode reduced model of ``system`` along ``family``.

    Use ``from_family``; instances are immutable and can be shared between
    simulations.
    """

    def __init__(self, family: OrbitFamily, system: DynamicalSystem, retained: Sequence[int]):
        family.orbits[0].require_analysis()
        self.family = family
        self.system = system
        self.two_mode = family.mode_count == 2
        labels = family.orbits[0].modes
        self.labels = labels
        self.second_label: Optional[int] = None
        if self.two_mode:
            self.second_label = int(family.provenance.get("lattice", {}).get("second_mode_index", labels[1]))
        for label in retained:
            if label not in labels:
                raise ContractViolationError(f"Mode {label} is not tracked by the family (tracked: {labels})")
            if label == labels[0] or label == self.second_label:
                raise ContractViolationError(f"Mode {label} is a nonlinear mode of the model, not a ψ coordinate")
        self.retained = tuple(int(label) for label in retained)
        self.positions = tuple(labels.index(label) for label in self.retained)
        self.second_position = labels.index(self.second_label) if self.two_mode else None

        n_theta = family.orbits[0].n_theta
        self.n_theta = n_theta
        # node arrays in family order (C order on a lattice)
        self._table = _NodeTable(family, {
            "omega": (np.array([o.omega for o in family.orbits]), False),
            "kappa": (np.stack([o.kappa for o in family.orbits]), False),
            "x": (np.stack([o.x_gamma for o in family.orbits]), True),
            "alpha": (np.stack([o.alpha for o in family.orbits]), True),
            "I": (np.moveaxis(np.stack([o.I for o in family.orbits]), 1, 2), True),
            "g": (np.moveaxis(np.stack([o.g[:, :, :-1] for o in family.orbits]), 1, 2), True),
            "E": (np.moveaxis(np.stack([o.E for o in family.orbits]), 1, 2), True),
        })
        self.x_ss = family.x_ss
        self.q_first = float(family.q0)
        self.q_floor = Q_FLOOR_FRACTION * self.q_first
        if self.two_mode:
            self.bounds = family.bounds
        else:
            self.bounds = [(self.q_floor, family.bounds[0][1])]

    @classmethod
    def from_family(
        cls,
        family: OrbitFamily,
        system: DynamicalSystem,
        retained: Optional[Sequence[int]] = None,
        psi_decay_threshold: float = -0.5,
    ) -> "ReducedModel":
        """
        Build the reduced model, choosing the retained ψ coordinates.

        Without ``retained``, a tracked oscillatory mode keeps its ψ when its
        slowest decay over the family satisfies Re κ_j·2π/Imag λ_1 > threshold.
        """
        if retained is None:
            labels = family.orbits[0].modes
            second = family.provenance.get("lattice", {}).get("second_mode_index") if family.mode_count == 2 else None
            kappas = family.stacked("kappa").reshape(len(family), -1)
            chosen = []
            for position, label in enumerate(labels):
                if position == 0 or label == second:
                    continue
                slowest = float(np.max(kappas[:, position].real))
                ratio = slowest * 2.0 * np.pi / family.family_mode.frequency
                at_rest = decay_ratio(family.modes[position], family.family_mode)
                if ratio > psi_decay_threshold:
                    chosen.append(label)
                logger.debug(
                    "psi retention: mode %d decay ratio %.3f over the family (%.3f at rest)", label, ratio, at_rest,
                    extra={"stage": "reduce"},
                )
            retained = chosen
        return cls(family, system, retained)

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    @property
    def n_q(self) -> int:
        return 3 if self.two_mode else 1

    @property
    def n_psi(self) -> int:
        return len(self.retained)

    def in_range(self, q) -> bool:
        q = np.atleast_1d(q)
        return all(lo - 1e-12 <= value <= hi + 1e-12 for value, (lo, hi) in zip(q, self.bounds))

    def check_range(self, q) -> None:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if q.size != self.n_q:
            raise ContractViolationError(f"Expected {self.n_q} amplitude coordinate(s), got {q.size}")
        if not self.in_range(q):
            raise RangeError(q, self.bounds)

    def point(self, theta: float, q, checked: bool = True) -> ModelPoint:
        """All interpolated quantities at (θ, q); exact at family nodes and grid phases."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if checked:
            self.check_range(q)
        scale = None
        lookup = q
        if not self.two_mode and q[0] < self.q_first:
            scale = q[0] / self.q_first
            lookup = np.array([self.q_first])
        data = self._table(lookup)

        basis = fourier_basis(theta, self.n_theta)

        def series(name):
            return np.tensordot(basis, data[name], axes=(0, 0))

        x_gamma = series("x").real
        alpha = series("alpha").real
        grad = series("I")
        if scale is not None:
            x_gamma = self.x_ss + scale * (x_gamma - self.x_ss)
            alpha = scale * alpha
            grad = grad.copy()
            grad[:, -1] *= scale
        return ModelPoint(
            theta=float(theta),
            q=q,
            omega=float(data["omega"].real),
            kappa=data["kappa"],
            x_gamma=x_gamma,
            alpha=alpha,
            I=grad,
            g=series("g"),
            E=series("E"),
        )

    def _state_at(self, point: ModelPoint, psi: np.ndarray) -> np.ndarray:
        x = point.x_gamma.copy()
        for value, position in zip(psi, self.positions):
            x += 2.0 * (value * point.g[position]).real
        return x

    def rates(self, state: ReducedState, u: np.ndarray, checked: bool = True) -> ReducedRates:
        point = self.point(state.theta, state.q, checked)
        x = self._state_at(point, state.psi)
        u0 = self.system.zero_input()
        effective = self.system.rhs(x, u) - self.system.rhs(x, u0) - point.alpha
        drive = point.I[:, :-1] @ effective

        if self.two_mode:
            p2 = self.second_position
            q_dot, phase_rate = solve_two_mode(
                drive[0], drive[p2], point.I[0, -1], point.I[p2, -1], point.E[0], point.E[p2],
                theta=state.theta, q=state.q,
            )
        else:
            rate, phase = solve_single_mode(drive[0], point.I[0, -1], point.E[0, 0], theta=state.theta, q=state.q)
            q_dot, phase_rate = np.array([float(rate)]), float(phase)

        psi_dot = np.array([
            point.kappa[p] * value + drive[p] + point.I[p, -1] * phase_rate + point.E[p] @ q_dot
            for value, p in zip(state.psi, self.positions)
        ], dtype=complex)
        return ReducedRates(theta=point.omega * (1.0 + phase_rate), q=q_dot, psi=psi_dot, phase_rate=phase_rate)

    # packed layout: [θ, q..., Re ψ..., Im ψ...]
    def pack(self, state: ReducedState) -> np.ndarray:
        return np.concatenate([[state.theta], state.q, state.psi.real, state.psi.imag])

    def unpack(self, y: np.ndarray) -> ReducedState:
        n_q, n_psi = self.n_q, self.n_psi
        psi = y[1 + n_q:1 + n_q + n_psi] + 1j * y[1 + n_q + n_psi:]
        return ReducedState(theta=float(y[0]), q=np.array(y[1:1 + n_q]), psi=psi)

    def packed_rhs(self, u_of_t: InputFunction) -> Callable[[float, np.ndarray], np.ndarray]:
        def rhs(t, y):
            r = self.rates(self.unpack(y), u_of_t(t), checked=False)
            return np.concatenate([[r.theta], r.q, r.psi.real, r.psi.imag])
        return rhs

    def boundary_events(self) -> List[Callable]:
        """Terminal solve_ivp events for leaving the admissible amplitude box."""
        events = []
        for k, (lo, hi) in enumerate(self.bounds):
            def below(t, y, k=k, lo=lo):
                return y[1 + k] - lo

            def above(t, y, k=k, hi=hi):
                return hi - y[1 + k]

            for event in (below, above):
                event.terminal = True
                event.direction = -1
                events.append(event)
        return events


# =============================================================================
# Public operations
# =============================================================================

def effective_input(system: DynamicalSystem, x, u, q, theta: float, model: ReducedModel) -> np.ndarray:
    """
    U_e = F(x, u) - F(x, 0) - α(q, θ).

    Raises:
        RangeError: q outside the model's range
    """
    x, u = check_state_input(system, x, u)
    point = model.point(theta, q)
    return system.rhs(x, u) - system.rhs(x, system.zero_input()) - point.alpha


def reduced_rhs(model: ReducedModel, state: ReducedState, u) -> ReducedRates:
    """
    Single-mode reduced dynamics at ``state`` under input ``u``.

    Raises:
        RangeError: q outside the family range
        SingularityError: phase equation singular at (θ, q)
    """
    if model.two_mode:
        raise ContractViolationError("reduced_rhs needs a single-mode model; use reduced_rhs_two_mode")
    return model.rates(state, np.asarray(u, dtype=float))


def reduced_rhs_two_mode(model: ReducedModel, state: ReducedState, u) -> ReducedRates:
    """Two-mode reduced dynamics; q̇ holds (q̇_1, q̇_2, q̇_3)."""
    if not model.two_mode:
        raise ContractViolationError("reduced_rhs_two_mode needs a lattice family")
    return model.rates(state, np.asarray(u, dtype=float))


def reconstruct_state(model: ReducedModel, state: ReducedState) -> np.ndarray:
    """x ≈ x^γ_q(θ) + Σ_j 2 Re(ψ_j g_j,1(θ, q))."""
    point = model.point(state.theta, state.q)
    if state.psi.size != model.n_psi:
        raise ContractViolationError(f"Expected {model.n_psi} ψ value(s), got {state.psi.size}")
    return model._state_at(point, state.psi)


def _default_limit(model: ReducedModel) -> float:
    offsets = model.family.stacked("x_gamma") - model.x_ss
    radius = float(np.max(np.linalg.norm(offsets, axis=-1)))
    return max(0.5 * radius, 1e-8)


def lift_state(model: ReducedModel, x, limit: Optional[float] = None) -> ReducedState:
    """
    Reduced coordinates of a full state near the family.

    (θ*, q*) minimise ‖x - x^γ_q(θ)‖ by a scan over stored samples followed
    by a bounded quasi-Newton polish; ψ_j = I_j,1ᵀ(θ*, q*)(x - x^γ_q*(θ*)).

    Raises:
        OutOfNeighborhoodError: closest orbit point farther than ``limit``
            (default: half the largest orbit radius)
    """
    x = np.asarray(x, dtype=float)
    if x.shape != model.x_ss.shape:
        raise ContractViolationError(f"State has shape {x.shape}, expected {model.x_ss.shape}")
    family = model.family
    samples = np.stack([o.x_gamma for o in family.orbits])
    distances = np.linalg.norm(samples - x, axis=-1)
    node, k = np.unravel_index(int(np.argmin(distances)), distances.shape)
    theta0 = 2.0 * np.pi * k / model.n_theta
    q0 = family.orbits[node].q.copy()

    def objective(p):
        point = model.point(p[0], p[1:], checked=False)
        diff = x - point.x_gamma
        return float(diff @ diff)

    bounds = [(None, None)] + [tuple(b) for b in model.bounds]
    result = minimize(objective, np.concatenate([[theta0], q0]), method="L-BFGS-B", bounds=bounds,
                      options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200})
    best = result.x if result.fun <= distances[node, k] ** 2 else np.concatenate([[theta0], q0])
    distance = float(np.sqrt(min(result.fun, distances[node, k] ** 2)))

    limit = _default_limit(model) if limit is None else float(limit)
    if distance > limit:
        raise OutOfNeighborhoodError(distance, limit)

    theta = float(np.mod(best[0], 2.0 * np.pi))
    q = np.clip(best[1:], [b[0] for b in model.bounds], [b[1] for b in model.bounds])
    point = model.point(theta, q)
    offset = x - point.x_gamma
    psi = np.array([point.I[p, :-1] @ offset for p in model.positions], dtype=complex)
    return ReducedState(theta=theta, q=q, psi=psi)


def output_grid(t_span: Sequence[float], dt_out: float) -> np.ndarray:
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ContractViolationError(f"t_span must be increasing, got {t_span}")
    if not dt_out > 0:
        raise ContractViolationError(f"dt_out must be positive, got {dt_out}")
    count = int(np.floor((t1 - t0) / dt_out + 1e-9))
    grid = t0 + dt_out * np.arange(count + 1)
    if t1 - grid[-1] > 1e-9 * max(1.0, abs(t1)):
        grid = np.append(grid, t1)
    return grid


def simulate_reduced(
    model: ReducedModel,
    u_of_t: InputFunction,
    init: ReducedState,
    t_span: Sequence[float],
    dt_out: float,
    settings: IntegratorSettings = REDUCED_SETTINGS,
    chunk: int = 200,
) -> SimulationTrace:
    """
    Integrate the reduced model and reconstruct full states on the output grid.

    The run ends early with termination ``family-boundary`` when q leaves the
    admissible range (the crossing point is the last sample) or
    ``singularity`` when the reduced solve fails.
    """
    log = StageLogger("simulate", logger, model=model.system.name)
    model.check_range(init.q)
    if init.psi.size != model.n_psi:
        raise ContractViolationError(f"Initial state needs {model.n_psi} ψ value(s), got {init.psi.size}")

    grid = output_grid(t_span, dt_out)
    rhs = model.packed_rhs(u_of_t)
    events = model.boundary_events()
    y = model.pack(init)

    times: List[float] = []
    states: List[ReducedState] = []

    def record(t, vector):
        times.append(float(t))
        states.append(model.unpack(vector))

    record(grid[0], y)
    termination = "completed"
    start = 0
    while start < grid.size - 1:
        stop = min(start + chunk, grid.size - 1)
        try:
            sol = integrate(rhs, (grid[start], grid[stop]), y, settings,
                            t_eval=grid[start + 1:stop + 1], events=events)
        except SingularityError as exc:
            log.warning(f"Reduced solve singular: {exc}", q=states[-1].q)
            termination = "singularity"
            break
        for t, vector in zip(sol.t, sol.y.T):
            record(t, vector)
        if sol.status == 1:
            hits = [(te[0], ye[0]) for te, ye in zip(sol.t_events, sol.y_events) if len(te)]
            t_hit, y_hit = min(hits, key=lambda pair: pair[0])
            if t_hit > times[-1]:
                record(t_hit, y_hit)
            termination = "family-boundary"
            log.info(f"Left the family range at t={t_hit:.4g}", q=states[-1].q)
            break
        y = sol.y[:, -1].copy()
        y[0] = np.mod(y[0], 2.0 * np.pi)
        start = stop

    theta = np.mod(np.array([s.theta for s in states]), 2.0 * np.pi)
    q = np.array([s.q for s in states])
    psi = np.array([s.psi for s in states]).reshape(len(states), model.n_psi)
    x = np.array([model._state_at(model.point(s.theta, s.q, checked=False), s.psi) for s in states])
    u = np.array([u_of_t(t) for t in times]).reshape(len(times), model.system.dim_input)
    log.info(f"Reduced simulation finished ({termination})", iteration=len(times))
    return SimulationTrace(
        kind="reduced",
        t=np.array(times),
        x=x,
        u=u,
        termination=termination,
        theta=theta,
        q=q,
        psi=psi,
        psi_labels=model.retained,
    )
