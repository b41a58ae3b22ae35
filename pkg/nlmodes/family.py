"""
Families of forced periodic orbits.

A one-parameter family grows from a small-amplitude seed by repeatedly
stepping along the family mode,

    x^γ_{q+Δq} = x^γ_q + 2Δq Re g_1,1
    α_{q+Δq}   = α_q + 2Δq Re(ω ∂g_1,1/∂θ) - 2Δq ∂F/∂x Re g_1,1,

and Newton-refining the guess. Continuation stops at q_max, at the family
boundary (the tracked multiplier pair turns real) or when interrupted.

A two-mode family is a (q1, q2, q3) lattice built from selected nodes of a
one-parameter family that also tracks the second oscillatory mode:
q2 steps along 2 Re g_3,1 and q3 along -2 Im g_3,1.
"""

import dataclasses
import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .core.base import DynamicalSystem
from .core.errors import (
    ContractViolationError,
    DegeneracyError,
    FamilyBoundaryError,
    NoConvergenceError,
    ParameterError,
    RangeError,
    RetuneNeededError,
    SingularityError,
)
from .core.fourier import FourierSeries
from .core.integrate import DEFAULT_SETTINGS, IntegratorSettings
from .core.logger import StageLogger
from .periodic import (
    DEFAULT_N_THETA,
    ForcedOrbit,
    analyze_orbit,
    family_direction,
    refine_orbit,
    seed_orbit,
    sensitivity_E,
)
from .spectral import Spectrum, SpectralMode, find_fixed_point, oscillatory_mode

logger = logging.getLogger(__name__)

HARD_NEWTON = 10
EASY_STEPS_TO_GROW = 3
THREADS_ENV = "NLMODES_THREADS"


def default_workers() -> int:
    """Worker count from NLMODES_THREADS, else min(cpu_count, 4)."""
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV, value)
    return max(1, min(os.cpu_count() or 1, 4))


@dataclass(frozen=True)
class ContinuationOptions:
    """Step control and tolerances of a family build."""
    delta_q_min: float = 1e-5
    delta_q_max: float = 0.05
    n_theta: int = DEFAULT_N_THETA
    retune_threshold: Optional[float] = 0.05
    retune_step: float = 0.02
    max_retunes: int = 3
    boundary_refinements: int = 3
    max_nodes: int = 5000
    shooting_tol: float = 1e-10
    max_newton: int = 20
    integrator: IntegratorSettings = DEFAULT_SETTINGS

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> "ContinuationOptions":
        """Options from a validated config (``family`` and ``tolerances`` sections)."""
        fam = config.get("family", {})
        tol = config.get("tolerances", {})
        return cls(
            delta_q_min=fam.get("delta_q_min", cls.delta_q_min),
            delta_q_max=fam.get("delta_q_max", cls.delta_q_max),
            n_theta=fam.get("n_theta", cls.n_theta),
            retune_threshold=fam.get("retune_threshold", cls.retune_threshold),
            retune_step=fam.get("retune_step", cls.retune_step),
            max_retunes=fam.get("max_retunes", cls.max_retunes),
            boundary_refinements=fam.get("boundary_refinements", cls.boundary_refinements),
            max_nodes=fam.get("max_nodes", cls.max_nodes),
            shooting_tol=tol.get("shooting", cls.shooting_tol),
            max_newton=tol.get("max_newton", cls.max_newton),
            integrator=IntegratorSettings(
                rtol=tol.get("rtol", DEFAULT_SETTINGS.rtol),
                atol=tol.get("atol", DEFAULT_SETTINGS.atol),
            ),
        )


@dataclass(eq=False)
class OrbitFamily:
    """
    Ordered collection of analyzed forced orbits.

    One-parameter families keep ``orbits`` in ascending q. Lattice families
    keep them in C order over ``lattice_shape`` with coordinates ``q_axes``.

    Attributes:
        orbits: analyzed orbits
        modes: tracked spectral modes at the fixed point, family mode first
        mode_count: number of nonlinear modes (1 or 2)
        lattice_shape: (n1, n2, n3) for two-mode families
        q_axes: coordinate arrays of the lattice axes
        provenance: seed parameters, tolerances and retune events
        termination: completed | family-boundary | interrupted | max-nodes
        terminal_q: last stored q when the build stopped early
    """
    orbits: List[ForcedOrbit]
    modes: Tuple[SpectralMode, ...]
    mode_count: int = 1
    lattice_shape: Optional[Tuple[int, int, int]] = None
    q_axes: Optional[Tuple[np.ndarray, ...]] = None
    provenance: Dict[str, Any] = field(default_factory=dict)
    termination: str = "completed"
    terminal_q: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.orbits:
            raise ContractViolationError("A family needs at least one orbit")
        if self.mode_count == 2:
            if self.lattice_shape is None or self.q_axes is None:
                raise ContractViolationError("Two-mode families need lattice_shape and q_axes")
            if int(np.prod(self.lattice_shape)) != len(self.orbits):
                raise ContractViolationError(
                    f"Lattice shape {self.lattice_shape} does not match {len(self.orbits)} orbits"
                )

    def __len__(self) -> int:
        return len(self.orbits)

    @property
    def family_mode(self) -> SpectralMode:
        return self.modes[0]

    @property
    def x_ss(self) -> np.ndarray:
        return self.orbits[0].x_ss

    @property
    def last(self) -> ForcedOrbit:
        return self.orbits[-1]

    @property
    def q_grid(self):
        """Node amplitudes (1-D) or the lattice axes (q1, q2, q3)."""
        if self.mode_count == 2:
            return self.q_axes
        return np.array([orbit.q[0] for orbit in self.orbits])

    @property
    def q0(self) -> float:
        return float(self.orbits[0].q[0]) if self.mode_count == 1 else float(self.q_axes[0][0])

    @property
    def bounds(self) -> List[Tuple[float, float]]:
        if self.mode_count == 2:
            return [(float(axis[0]), float(axis[-1])) for axis in self.q_axes]
        grid = self.q_grid
        return [(float(grid[0]), float(grid[-1]))]

    @property
    def retuned(self) -> bool:
        return any(orbit.retuned for orbit in self.orbits)

    def node(self, i1: int, i2: int = 0, i3: int = 0) -> ForcedOrbit:
        if self.mode_count == 1:
            return self.orbits[i1]
        return self.orbits[int(np.ravel_multi_index((i1, i2, i3), self.lattice_shape))]

    def stacked(self, name: str) -> np.ndarray:
        """Node arrays of one ForcedOrbit field, stacked on axis 0 (lattice-shaped for two modes)."""
        values = np.stack([np.asarray(getattr(orbit, name)) for orbit in self.orbits])
        if self.mode_count == 2:
            values = values.reshape(tuple(self.lattice_shape) + values.shape[1:])
        return values

    def appended(self, orbit: ForcedOrbit) -> "OrbitFamily":
        return dataclasses.replace(self, orbits=list(self.orbits) + [orbit])

    def replace_last(self, orbit: ForcedOrbit) -> "OrbitFamily":
        return dataclasses.replace(self, orbits=list(self.orbits[:-1]) + [orbit])


@dataclass(frozen=True)
class BackboneCurve:
    """Effective frequency and amplitude along a one-parameter family."""
    q: np.ndarray
    omega_bar: np.ndarray
    amplitude: np.ndarray
    re_kappa: np.ndarray
    omega: np.ndarray
    mode_labels: Tuple[int, ...] = (1,)


# =============================================================================
# Mode selection
# =============================================================================

def decay_ratio(mode: SpectralMode, family_mode: SpectralMode) -> float:
    """Re λ_j times the characteristic period 2π/Imag λ_1."""
    return mode.decay * 2.0 * np.pi / family_mode.frequency


def select_modes(
    spectrum: Spectrum,
    mode_index: int = 1,
    eigen_index: Optional[int] = None,
    anchor_index: Optional[int] = None,
    retain_modes: Optional[Sequence[int]] = None,
    psi_decay_threshold: float = -0.5,
    second_mode_index: Optional[int] = None,
) -> Tuple[SpectralMode, ...]:
    """
    Spectral modes tracked along a family, family mode first.

    Additional oscillatory modes are ``retain_modes`` when given, otherwise
    every oscillatory mode whose decay over one characteristic period stays
    above ``psi_decay_threshold``. ``second_mode_index`` is always included.
    """
    family_mode = oscillatory_mode(spectrum, mode_index, anchor_index, eigen_index)
    labels: List[int] = []
    if retain_modes is not None:
        labels.extend(int(label) for label in retain_modes)
    else:
        for label in range(1, len(spectrum.oscillatory_indices) + 1):
            if label == family_mode.mode_index:
                continue
            candidate = oscillatory_mode(spectrum, label)
            if decay_ratio(candidate, family_mode) > psi_decay_threshold:
                labels.append(label)
    if second_mode_index is not None:
        if second_mode_index == family_mode.mode_index:
            raise ParameterError("second_mode_index", "must differ from the family mode", second_mode_index)
        labels.append(int(second_mode_index))

    ordered: List[int] = []
    for label in labels:
        if label != family_mode.mode_index and label not in ordered:
            ordered.append(label)
    return (family_mode,) + tuple(oscillatory_mode(spectrum, label) for label in ordered)


# =============================================================================
# Continuation
# =============================================================================

def forcing_increment(system: DynamicalSystem, orbit: ForcedOrbit, dx: np.ndarray) -> np.ndarray:
    """δα = ω ∂δx/∂θ - ∂F/∂x δx, which keeps x^γ + δx a forced orbit to first order."""
    u0 = system.zero_input()
    slope = FourierSeries(dx).derivative().samples
    coupling = np.stack([system.jac_state(x, u0) @ d for x, d in zip(orbit.x_gamma, dx)])
    return orbit.omega * slope - coupling


def step_orbit(system: DynamicalSystem, orbit: ForcedOrbit, dx: np.ndarray, q_new) -> ForcedOrbit:
    """Unrefined guess displaced by ``dx`` with the matching forcing update."""
    return orbit.without_floquet(
        q=np.atleast_1d(np.asarray(q_new, dtype=float)).copy(),
        x_gamma=orbit.x_gamma + dx,
        alpha=orbit.alpha + forcing_increment(system, orbit, dx),
        retuned=False,
        shooting_residual=np.nan,
        newton_iterations=0,
    )


def retune_period(orbit: ForcedOrbit, delta_omega: float) -> ForcedOrbit:
    """
    Same spatial orbit traversed at frequency ω + Δω.

    On the θ-grid the forcing becomes α̂ = α + Δω ∂x^γ/∂θ; ∂x^γ/∂q is
    unchanged. Floquet data must be recomputed.

    Raises:
        ParameterError: ω + Δω ≤ 0
    """
    delta_omega = float(delta_omega)
    if delta_omega == 0.0:
        return orbit
    if orbit.omega + delta_omega <= 0.0:
        raise ParameterError("delta_omega", f"retuned frequency {orbit.omega + delta_omega:.6g} must be positive",
                             delta_omega)
    slope = orbit.orbit_series.derivative().samples
    return orbit.without_floquet(
        omega=orbit.omega + delta_omega,
        alpha=orbit.alpha + delta_omega * slope,
        retuned=True,
    )


def _refine_and_analyze(
    system: DynamicalSystem,
    guess: ForcedOrbit,
    modes: Sequence[SpectralMode],
    previous: Optional[ForcedOrbit],
    options: ContinuationOptions,
    retune: bool = True,
) -> ForcedOrbit:
    refined = refine_orbit(system, guess, options.shooting_tol, options.max_newton, options.integrator)
    return analyze_orbit(
        system,
        refined,
        modes,
        previous=previous,
        settings=options.integrator,
        retune_threshold=options.retune_threshold if retune else None,
        retune_step=options.retune_step,
    )


def extend_family(
    family: OrbitFamily,
    system: DynamicalSystem,
    delta_q: float,
    options: ContinuationOptions = ContinuationOptions(),
) -> OrbitFamily:
    """
    Append the orbit at q + Δq to a one-parameter family.

    Raises:
        ParameterError: Δq ≤ 0
        FamilyBoundaryError: tracked pair turned real (``family`` attached)
        RetuneNeededError: multiplier pair close to the real axis
        NoConvergenceError: shooting failed
    """
    if not delta_q > 0:
        raise ParameterError("delta_q", "must be positive", delta_q)
    if family.mode_count != 1:
        raise ContractViolationError("extend_family works on one-parameter families")
    last = family.last
    guess = step_orbit(system, last, delta_q * family_direction(last), last.q + delta_q)
    try:
        orbit = _refine_and_analyze(system, guess, family.modes, last, options)
    except FamilyBoundaryError as exc:
        exc.family = family
        raise
    return family.appended(orbit)


def _retune_last(
    system: DynamicalSystem,
    family: OrbitFamily,
    delta_omega: float,
    options: ContinuationOptions,
) -> OrbitFamily:
    last = family.last
    retuned = retune_period(last, delta_omega)
    orbit = _refine_and_analyze(system, retuned, family.modes, last, options, retune=False)
    return family.replace_last(dataclasses.replace(orbit, retuned=True))


def build_family(
    system: DynamicalSystem,
    mode: SpectralMode,
    q0: float,
    delta_q: float,
    q_max: float,
    delta_omega: Optional[float] = None,
    x_ss: Optional[np.ndarray] = None,
    extra_modes: Sequence[SpectralMode] = (),
    options: ContinuationOptions = ContinuationOptions(),
    should_stop: Optional[Callable[[], bool]] = None,
) -> OrbitFamily:
    """
    Continue a one-parameter family from q0 towards q_max.

    The step adapts: it halves when shooting needs more than 10 Newton steps
    and doubles (capped at ``delta_q_max``) after 3 easy steps. A boundary
    detection is confirmed by halving the step ``boundary_refinements`` times.
    Early stops are recorded in ``termination`` and ``terminal_q``.

    Args:
        system: vector field
        mode: family mode
        q0, delta_q, q_max: seed amplitude, initial step and target amplitude
        delta_omega: detuning of the seed (default 0.1 Imag λ)
        x_ss: fixed point (computed when omitted)
        extra_modes: further oscillatory modes whose Floquet data is tracked
        options: step control and tolerances
        should_stop: polled between steps; True stops the build cleanly

    Raises:
        ParameterError: inadmissible q0, Δq, q_max or Δω
        NoConvergenceError: shooting failed at the minimum step (``family`` attached)
        FamilyBoundaryError: the seed itself lies beyond the boundary
    """
    if not 0 < delta_q:
        raise ParameterError("delta_q", "must be positive", delta_q)
    if not q_max > q0:
        raise ParameterError("q_max", f"must exceed q0={q0}", q_max)
    if x_ss is None:
        x_ss = find_fixed_point(system)

    log = StageLogger("continuation", logger, model=system.name)
    modes = (mode,) + tuple(extra_modes)
    seed = seed_orbit(mode, x_ss, q0, delta_omega, options.n_theta, extra_modes)
    log.operation_start("build_family", q=q0, omega=seed.omega, tracked=[m.mode_index for m in modes])

    provenance: Dict[str, Any] = {
        "q0": float(q0),
        "delta_q": float(delta_q),
        "delta_q_min": options.delta_q_min,
        "delta_q_max": options.delta_q_max,
        "q_max": float(q_max),
        "delta_omega": float(seed.omega - mode.frequency),
        "n_theta": options.n_theta,
        "anchor_index": mode.anchor_index,
        "shooting_tol": options.shooting_tol,
        "rtol": options.integrator.rtol,
        "atol": options.integrator.atol,
        "retune_events": [],
    }

    orbit = _refine_and_analyze(system, seed, modes, None, options, retune=False)
    family = OrbitFamily(orbits=[orbit], modes=modes, provenance=provenance)

    step = float(delta_q)
    easy = 0
    retunes = 0
    refinements = 0
    termination = "completed"
    span = q_max - q0

    while family.last.q[0] < q_max - 1e-12 * span:
        if should_stop is not None and should_stop():
            termination = "interrupted"
            break
        if len(family) >= options.max_nodes:
            termination = "max-nodes"
            break

        dq = min(step, q_max - family.last.q[0])
        try:
            family = extend_family(family, system, dq, options)
        except RetuneNeededError as exc:
            if retunes >= options.max_retunes:
                log.warning("Retune budget exhausted; treating as family boundary", q=family.last.q)
                termination = "family-boundary"
                break
            retunes += 1
            try:
                family = _retune_last(system, family, exc.delta_omega, options)
            except (FamilyBoundaryError, DegeneracyError) as boundary:
                # the retuned orbit is already past the boundary; keep the last good node
                log.info(f"Family boundary while retuning: {boundary}", q=family.last.q)
                termination = "family-boundary"
                break
            provenance["retune_events"].append({
                "q": float(family.last.q[0]),
                "delta_omega": float(exc.delta_omega),
                "argument": float(exc.argument),
            })
            log.info("Retuned period", q=family.last.q, delta_omega=exc.delta_omega)
            continue
        except (FamilyBoundaryError, DegeneracyError) as exc:
            if refinements < options.boundary_refinements and dq / 2.0 >= options.delta_q_min:
                refinements += 1
                step = dq / 2.0
                easy = 0
                log.debug(f"Boundary suspected, retrying with delta_q={step:.3g}", q=family.last.q)
                continue
            log.info(f"Family boundary: {exc}", q=family.last.q)
            termination = "family-boundary"
            break
        except NoConvergenceError as exc:
            if dq / 2.0 >= options.delta_q_min:
                step = dq / 2.0
                easy = 0
                log.debug(f"Shooting failed, retrying with delta_q={step:.3g}", q=family.last.q)
                continue
            exc.family = dataclasses.replace(family, termination="no-convergence", terminal_q=family.last.q)
            raise

        refinements = 0
        retunes = 0
        newest = family.last
        if newest.newton_iterations > HARD_NEWTON:
            step = max(step / 2.0, options.delta_q_min)
            easy = 0
        else:
            easy += 1
            if easy >= EASY_STEPS_TO_GROW:
                step = min(2.0 * step, options.delta_q_max)
                easy = 0
        log.info(
            "Appended orbit",
            q=newest.q,
            iteration=newest.newton_iterations,
            kappa=complex(newest.kappa[0]),
            omega=newest.omega,
        )

    terminal_q = None if termination == "completed" else family.last.q.copy()
    provenance["termination"] = termination
    family = dataclasses.replace(family, termination=termination, terminal_q=terminal_q, provenance=provenance)
    log.operation_complete("build_family", success=termination == "completed",
                           q=family.last.q, nodes=len(family), termination=termination)
    return family


def finite_difference_dx_dq(family: OrbitFamily) -> np.ndarray:
    """∂x^γ/∂q at every node of a one-parameter family by second-order differences, (n_nodes, n_θ, N)."""
    if family.mode_count != 1:
        raise ContractViolationError("finite_difference_dx_dq works on one-parameter families")
    if len(family) < 2:
        raise ContractViolationError("Finite differences need at least two family nodes")
    orbits = family.stacked("x_gamma")
    edge_order = 2 if len(family) >= 3 else 1
    return np.gradient(orbits, family.q_grid, axis=0, edge_order=edge_order)


# =============================================================================
# Backbone
# =============================================================================

def node_effective_frequency(orbit: ForcedOrbit) -> float:
    """
    ω̄ = ω + (ω/2π) ∫ f_θ dθ with U_e = -α evaluated on the orbit.

    Raises:
        SingularityError: the phase equation is singular at a grid θ
    """
    from .reduce import solve_single_mode

    orbit.require_analysis()
    drive = -np.einsum("kn,kn->k", orbit.I[0, :, :-1], orbit.alpha)
    _, phase_rate = solve_single_mode(drive, orbit.I[0, :, -1], orbit.E[0, :, 0], theta=orbit.theta, q=orbit.q)
    return float(orbit.omega * (1.0 + np.mean(phase_rate)))


def effective_frequency(family: OrbitFamily, q: float) -> float:
    """
    Effective unforced natural frequency ω̄(q) of a one-parameter family.

    Exact at nodes, cubic-spline interpolated between them.

    Raises:
        RangeError: q outside the family
        SingularityError: Imag(I_1,2) vanishes at a node
    """
    if family.mode_count != 1:
        raise ContractViolationError("effective_frequency works on one-parameter families")
    grid = family.q_grid
    lo, hi = grid[0], grid[-1]
    if not lo - 1e-12 <= q <= hi + 1e-12:
        raise RangeError(q, family.bounds)
    hits = np.flatnonzero(np.isclose(grid, q, rtol=0.0, atol=1e-14))
    if hits.size:
        return node_effective_frequency(family.orbits[int(hits[0])])
    values = np.array([node_effective_frequency(orbit) for orbit in family.orbits])
    return float(CubicSpline(grid, values)(q))


def backbone(family: OrbitFamily, system: DynamicalSystem, observable: Optional[str] = None) -> BackboneCurve:
    """
    Backbone data of a one-parameter family.

    ``amplitude`` is max - min over the orbit of the observable (default:
    the state entry anchoring the family mode).
    """
    if family.mode_count != 1:
        raise ContractViolationError("backbone works on one-parameter families")
    if observable is None:
        weights = np.zeros(system.dim_state)
        weights[family.family_mode.anchor_index] = 1.0
    else:
        weights = system.observable(observable)

    values = family.stacked("x_gamma") @ weights
    return BackboneCurve(
        q=family.q_grid,
        omega_bar=np.array([node_effective_frequency(orbit) for orbit in family.orbits]),
        amplitude=values.max(axis=1) - values.min(axis=1),
        re_kappa=np.stack([orbit.kappa.real for orbit in family.orbits]),
        omega=np.array([orbit.omega for orbit in family.orbits]),
        mode_labels=family.orbits[0].modes,
    )


# =============================================================================
# Two-mode lattice
# =============================================================================

def lattice_axis(bounds: Sequence[float], step: float) -> np.ndarray:
    """Uniform axis with spacing ``step`` through 0 covering [lo, hi]."""
    lo, hi = float(bounds[0]), float(bounds[1])
    if lo > 0 or hi < 0:
        raise ParameterError("range", "lattice ranges must contain 0", list(bounds))
    if not step > 0:
        raise ParameterError("delta", "lattice step must be positive", step)
    below = int(np.ceil(-lo / step - 1e-9))
    above = int(np.ceil(hi / step - 1e-9))
    return step * np.arange(-below, above + 1, dtype=float)


def second_mode_direction(orbit: ForcedOrbit, second_label: int, axis: int) -> np.ndarray:
    """Orbit increment per unit q2 (2 Re g_3,1) or q3 (-2 Im g_3,1)."""
    g3 = orbit.g[orbit.mode_position(second_label), :, :-1]
    return 2.0 * g3.real if axis == 1 else -2.0 * g3.imag


def _sweep(
    system: DynamicalSystem,
    start: ForcedOrbit,
    modes: Sequence[SpectralMode],
    axis_values: np.ndarray,
    axis: int,
    second_label: int,
    options: ContinuationOptions,
) -> List[ForcedOrbit]:
    """Orbits at every ``axis_values`` entry, stepping outwards from the zero entry."""
    zero = int(np.argmin(np.abs(axis_values)))
    nodes: List[Optional[ForcedOrbit]] = [None] * axis_values.size
    nodes[zero] = start
    for direction in (1, -1):
        previous = start
        index = zero + direction
        while 0 <= index < axis_values.size:
            delta = axis_values[index] - axis_values[index - direction]
            q_new = previous.q.copy()
            q_new[axis] = axis_values[index]
            dx = delta * second_mode_direction(previous, second_label, axis)
            guess = step_orbit(system, previous, dx, q_new)
            previous = _refine_and_analyze(system, guess, modes, previous, options, retune=False)
            nodes[index] = previous
            index += direction
    return nodes  # type: ignore[return-value]


def build_lattice_slice(
    system: DynamicalSystem,
    base: ForcedOrbit,
    modes: Sequence[SpectralMode],
    q2_axis: np.ndarray,
    q3_axis: np.ndarray,
    second_label: int,
    options: ContinuationOptions,
) -> List[ForcedOrbit]:
    """
    All lattice nodes sharing q1 = base.q[0], ordered (i2, i3).

    q2 is swept first on the q3 = 0 plane, then q3 from every q2 node.
    """
    start = dataclasses.replace(base, q=np.array([float(base.q[0]), 0.0, 0.0]))
    column = _sweep(system, start, modes, q2_axis, 1, second_label, options)
    nodes: List[ForcedOrbit] = []
    for orbit in column:
        nodes.extend(_sweep(system, orbit, modes, q3_axis, 2, second_label, options))
    return nodes


def _lattice_derivatives(
    orbits: np.ndarray,
    q_axes: Tuple[np.ndarray, ...],
    zeros: Tuple[int, int],
    second_label: int,
) -> np.ndarray:
    """∂x^γ/∂(q1, q2, q3) per node, shape lattice_shape + (3, n_θ, N)."""
    shape = orbits.shape
    x = np.stack([orbit.x_gamma for orbit in orbits.ravel()]).reshape(shape + orbits.ravel()[0].x_gamma.shape)
    gradients = []
    for axis in range(2):
        if shape[axis] >= 2:
            edge = 2 if shape[axis] >= 3 else 1
            gradients.append(np.gradient(x, q_axes[axis], axis=axis, edge_order=edge))
        else:
            gradients.append(None)

    dx_dq = np.empty(shape + (3,) + x.shape[3:])
    z2, z3 = zeros
    for index in np.ndindex(shape):
        orbit = orbits[index]
        i1, i2, i3 = index
        on_line = i2 == z2 and i3 == z3
        if on_line or gradients[0] is None:
            dx_dq[index + (0,)] = family_direction(orbit)
        else:
            dx_dq[index + (0,)] = gradients[0][index]
        if i3 == z3 or gradients[1] is None:
            dx_dq[index + (1,)] = second_mode_direction(orbit, second_label, 1)
        else:
            dx_dq[index + (1,)] = gradients[1][index]
        dx_dq[index + (2,)] = second_mode_direction(orbit, second_label, 2)
    return dx_dq


def extend_family_two_mode(
    family: OrbitFamily,
    system: DynamicalSystem,
    delta_q2: float,
    delta_q3: float,
    ranges: Tuple[Sequence[float], Sequence[float]],
    second_mode_index: int = 2,
    q1_values: Optional[Sequence[float]] = None,
    q1_stride: int = 1,
    options: ContinuationOptions = ContinuationOptions(),
    workers: Optional[int] = None,
) -> OrbitFamily:
    """
    Lattice family over (q1, q2, q3) from a one-parameter family.

    The one-parameter family must track ``second_mode_index``. q1 nodes are
    the family nodes nearest to ``q1_values`` (or every ``q1_stride``-th
    node). Slices of constant q1 are built in separate processes; E is then
    filled from construction directions where available and from lattice
    differences elsewhere.

    Raises:
        ContractViolationError: second mode not tracked
        FamilyBoundaryError, DegeneracyError, NoConvergenceError: at a lattice node
    """
    if family.mode_count != 1:
        raise ContractViolationError("extend_family_two_mode needs a one-parameter family")
    labels = family.orbits[0].modes
    if second_mode_index not in labels:
        raise ContractViolationError(
            f"Mode {second_mode_index} is not tracked by the family (tracked: {labels}); "
            "rebuild it with family.lattice.second_mode_index set"
        )
    log = StageLogger("lattice", logger, model=system.name)

    grid = family.q_grid
    if q1_values is None:
        picks = list(range(0, len(family), max(1, int(q1_stride))))
    else:
        picks = sorted({int(np.argmin(np.abs(grid - value))) for value in q1_values})
    q1_axis = grid[picks]
    q2_axis = lattice_axis(ranges[0], delta_q2)
    q3_axis = lattice_axis(ranges[1], delta_q3)
    shape = (len(picks), q2_axis.size, q3_axis.size)
    log.operation_start("extend_family_two_mode", nodes=int(np.prod(shape)), shape=shape)

    workers = default_workers() if workers is None else max(1, int(workers))
    slices: Dict[int, List[ForcedOrbit]] = {}
    args = [(system, family.orbits[p], family.modes, q2_axis, q3_axis, second_mode_index, options) for p in picks]
    if workers == 1 or len(picks) == 1:
        for i1, arg in enumerate(args):
            slices[i1] = build_lattice_slice(*arg)
            log.info("Lattice slice complete", q=q1_axis[i1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            future_to_slice = {executor.submit(build_lattice_slice, *arg): i1 for i1, arg in enumerate(args)}
            for future in as_completed(future_to_slice):
                i1 = future_to_slice[future]
                slices[i1] = future.result()
                log.info("Lattice slice complete", q=q1_axis[i1])

    nodes = np.empty(shape, dtype=object)
    for i1 in range(shape[0]):
        for flat, orbit in enumerate(slices[i1]):
            i2, i3 = divmod(flat, shape[2])
            nodes[i1, i2, i3] = orbit

    zeros = (int(np.argmin(np.abs(q2_axis))), int(np.argmin(np.abs(q3_axis))))
    dx_dq = _lattice_derivatives(nodes, (q1_axis, q2_axis, q3_axis), zeros, second_mode_index)
    orbits = [
        dataclasses.replace(nodes[index], E=sensitivity_E(nodes[index], dx_dq[index]))
        for index in np.ndindex(shape)
    ]

    provenance = dict(family.provenance)
    provenance["lattice"] = {
        "second_mode_index": int(second_mode_index),
        "q2_range": [float(v) for v in ranges[0]],
        "q3_range": [float(v) for v in ranges[1]],
        "delta_q2": float(delta_q2),
        "delta_q3": float(delta_q3),
    }
    log.operation_complete("extend_family_two_mode", nodes=len(orbits))
    return OrbitFamily(
        orbits=orbits,
        modes=family.modes,
        mode_count=2,
        lattice_shape=shape,
        q_axes=(q1_axis, q2_axis, q3_axis),
        provenance=provenance,
    )
