"""
Full-order and linear simulations, periodic steady states and comparisons.

The steady-state amplitude of an observable c·x under u = a sin(ω_f t) is
max - min over one forcing period of the periodic steady state. The steady
state is found by Newton shooting on the stroboscopic (period-T_f) map after
a warm-up; reduced models use the same map with θ advanced by 2π per period.
Linear models use the transfer function directly.
"""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.optimize import root

from .core.base import DynamicalSystem, check_state_input
from .core.errors import NlmodesError, NoSteadyStateError
from .core.integrate import IntegratorSettings, integrate
from .core.logger import StageLogger
from .family import default_workers
from .models.linear import LinearizedSystem
from .reduce import REDUCED_SETTINGS, InputFunction, ReducedModel, ReducedState, SimulationTrace, output_grid
from .signals import sine
from .spectral import find_fixed_point

logger = logging.getLogger(__name__)

FULL_SETTINGS = IntegratorSettings(rtol=1e-10, atol=1e-12)
STEADY_TOL = 1e-8
SAMPLES_PER_PERIOD = 400

Simulatable = Union[DynamicalSystem, ReducedModel]


def simulate_full(
    system: DynamicalSystem,
    u_of_t: InputFunction,
    x0,
    t_span: Sequence[float],
    dt_out: float,
    settings: IntegratorSettings = FULL_SETTINGS,
) -> SimulationTrace:
    """Integrate ẋ = F(x, u(t)) on the output grid (also used for linearized models)."""
    x0, _ = check_state_input(system, x0, system.zero_input())
    grid = output_grid(t_span, dt_out)
    kind = "linear" if isinstance(system, LinearizedSystem) else "full"
    log = StageLogger("simulate", logger, model=system.name)

    sol = integrate(lambda t, x: system.rhs(x, u_of_t(t)), (grid[0], grid[-1]), x0, settings, t_eval=grid)
    u = np.array([u_of_t(t) for t in sol.t]).reshape(sol.t.size, system.dim_input)
    log.debug(f"{kind} simulation finished", iteration=sol.t.size)
    return SimulationTrace(kind=kind, t=sol.t.copy(), x=sol.y.T.copy(), u=u)


# =============================================================================
# Steady states
# =============================================================================

@dataclass(frozen=True)
class SteadyState:
    """Periodic steady response to a sinusoidal input."""
    amplitude: float
    frequency: float
    forcing: float
    state: Optional[np.ndarray] = None
    iterations: int = 0


class _Stroboscope:
    """Period map of a full system or a reduced model under a fixed input."""

    def __init__(self, target: Simulatable, u_of_t: InputFunction, period: float,
                 settings: Optional[IntegratorSettings]):
        self.target = target
        self.period = period
        if isinstance(target, ReducedModel):
            self.reduced = True
            self.rhs = target.packed_rhs(u_of_t)
            self.settings = settings or REDUCED_SETTINGS
        else:
            self.reduced = False
            self.rhs = lambda t, x: target.rhs(x, u_of_t(t))
            self.settings = settings or FULL_SETTINGS

    def flow(self, y: np.ndarray, periods: int = 1, samples: Optional[int] = None):
        t_end = periods * self.period
        t_eval = None if samples is None else np.linspace(0.0, t_end, samples)
        sol = integrate(self.rhs, (0.0, t_end), y, self.settings, t_eval=t_eval)
        end = sol.y[:, -1].copy()
        if self.reduced:
            state = self.target.unpack(end)
            if not self.target.in_range(state.q):
                raise NoSteadyStateError(f"Reduced response left the family range (q={state.q})")
        return end, sol

    def defect(self, y: np.ndarray) -> np.ndarray:
        end, _ = self.flow(y)
        if self.reduced:
            end[0] -= 2.0 * np.pi
        return end - y

    def states(self, sol) -> np.ndarray:
        if not self.reduced:
            return sol.y.T
        model = self.target
        return np.array([
            model._state_at(model.point(s.theta, s.q, checked=False), s.psi)
            for s in (model.unpack(y) for y in sol.y.T)
        ])


def _initial_state(target: Simulatable, start) -> np.ndarray:
    if isinstance(target, ReducedModel):
        if start is None:
            q = np.zeros(target.n_q)
            q[0] = 2.0 * target.q_first
            start = ReducedState.make(0.0, q, np.zeros(target.n_psi))
        return target.pack(start) if isinstance(start, ReducedState) else np.asarray(start, dtype=float)
    if start is None:
        return target.default_guess() if isinstance(target, LinearizedSystem) else find_fixed_point(target)
    return np.asarray(start, dtype=float)


def steady_state(
    target: Simulatable,
    amplitude: float,
    frequency: float,
    weights: np.ndarray,
    channel: int = 0,
    start=None,
    warmup_periods: int = 40,
    max_periods: int = 400,
    settings: Optional[IntegratorSettings] = None,
) -> SteadyState:
    """
    Periodic steady state under u = a sin(ω_f t) on ``channel``.

    Raises:
        NoSteadyStateError: no periodic response within ``max_periods``
    """
    weights = np.asarray(weights, dtype=float)
    if isinstance(target, LinearizedSystem):
        gain = target.transfer_function(1j * frequency, weights)[channel]
        return SteadyState(amplitude=float(2.0 * abs(amplitude) * abs(gain)), frequency=frequency,
                           forcing=amplitude)

    system = target.system if isinstance(target, ReducedModel) else target
    signal = sine(amplitude, frequency, channel=channel, dim_input=system.dim_input)
    period = 2.0 * np.pi / frequency
    strobe = _Stroboscope(target, signal, period, settings)

    y = _initial_state(target, start)
    if warmup_periods:
        y, _ = strobe.flow(y, warmup_periods)
        if strobe.reduced:
            y[0] = np.mod(y[0], 2.0 * np.pi)

    periods = warmup_periods
    iterations = 0
    while True:
        solution = root(strobe.defect, y, method="hybr", options={"xtol": 1e-12})
        iterations += 1
        residual = float(np.max(np.abs(strobe.defect(solution.x))))
        if residual <= STEADY_TOL * (1.0 + np.max(np.abs(solution.x))):
            y = solution.x
            break
        # fall back to plain relaxation before another shooting attempt
        y, _ = strobe.flow(y, 10)
        if strobe.reduced:
            y[0] = np.mod(y[0], 2.0 * np.pi)
        periods += 10
        if periods >= max_periods:
            raise NoSteadyStateError(
                f"No periodic steady state for a={amplitude:g}, w={frequency:g} "
                f"after {periods} periods (defect {residual:.2e})"
            )

    _, sol = strobe.flow(y, 1, SAMPLES_PER_PERIOD)
    values = strobe.states(sol) @ weights
    return SteadyState(
        amplitude=float(values.max() - values.min()),
        frequency=frequency,
        forcing=amplitude,
        state=y,
        iterations=iterations,
    )


def steady_state_amplitude(
    target: Simulatable,
    amplitude: float,
    frequency: float,
    weights: np.ndarray,
    channel: int = 0,
    **kwargs,
) -> float:
    """max - min of c·x over one period of the steady response to a sin(ω_f t)."""
    return steady_state(target, amplitude, frequency, weights, channel, **kwargs).amplitude


def _sweep_amplitude(
    targets: Mapping[str, Simulatable],
    amplitude: float,
    frequencies: Sequence[float],
    weights: np.ndarray,
    channel: int,
    warmup_periods: int,
    max_periods: int,
) -> List[Dict[str, float]]:
    """One amplitude across ascending frequencies, warm-starting each target."""
    rows = []
    starts: Dict[str, Optional[np.ndarray]] = {name: None for name in targets}
    for frequency in sorted(frequencies):
        row = {"omega_f": float(frequency), "a": float(amplitude)}
        for name, target in targets.items():
            try:
                result = steady_state(
                    target, amplitude, frequency, weights, channel, start=starts[name],
                    warmup_periods=warmup_periods if starts[name] is None else warmup_periods // 4,
                    max_periods=max_periods,
                )
                row[f"amplitude_{name}"] = result.amplitude
                starts[name] = result.state
            except NlmodesError as exc:
                logger.warning("%s response at a=%g, w=%g: %s", name, amplitude, frequency, exc,
                               extra={"stage": "sweep", "error_code": exc.error_code})
                row[f"amplitude_{name}"] = np.nan
                starts[name] = None
        rows.append(row)
    return rows


def amplitude_sweep(
    system: DynamicalSystem,
    amplitudes: Sequence[float],
    frequencies: Sequence[float],
    weights: np.ndarray,
    reduced: Optional[ReducedModel] = None,
    linear: Optional[LinearizedSystem] = None,
    channel: int = 0,
    warmup_periods: int = 40,
    max_periods: int = 400,
    workers: Optional[int] = None,
) -> pd.DataFrame:
    """
    Steady-state amplitude response curves.

    Returns a frame with columns omega_f, a, amplitude_full and, when the
    models are given, amplitude_reduced and amplitude_linear. Cells without
    a steady state hold NaN.
    """
    targets: Dict[str, Simulatable] = {"full": system}
    if reduced is not None:
        targets["reduced"] = reduced
    if linear is not None:
        targets["linear"] = linear
    log = StageLogger("sweep", logger, model=system.name)
    log.operation_start("amplitude_sweep", cells=len(amplitudes) * len(frequencies))

    workers = default_workers() if workers is None else max(1, int(workers))
    args = [(targets, a, list(frequencies), np.asarray(weights), channel, warmup_periods, max_periods)
            for a in amplitudes]
    rows: List[Dict[str, float]] = []
    if workers == 1 or len(args) == 1:
        for arg in args:
            rows.extend(_sweep_amplitude(*arg))
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(args))) as executor:
            future_to_amplitude = {executor.submit(_sweep_amplitude, *arg): arg[1] for arg in args}
            for future in as_completed(future_to_amplitude):
                rows.extend(future.result())
                log.info(f"Amplitude {future_to_amplitude[future]:g} done")

    columns = ["omega_f", "a"] + [f"amplitude_{name}" for name in ("full", "reduced", "linear") if name in targets]
    frame = pd.DataFrame(rows, columns=columns)
    return frame.sort_values(["a", "omega_f"]).reset_index(drop=True)


# =============================================================================
# Comparisons
# =============================================================================

def compare_traces(
    reference: SimulationTrace,
    other: SimulationTrace,
    observables: Mapping[str, np.ndarray],
    t_max: Optional[float] = None,
) -> Tuple[pd.DataFrame, Dict[str, float]]:
    """
    Per-time errors of ``other`` against ``reference`` for named observables.

    Comparison runs over the times of ``other`` that the reference covers
    (a reduced run may stop at the family boundary), cut at ``t_max`` when
    given so that several models can be scored over one shared window.

    Returns:
        (frame with t and err_<name> columns, summary with rms_<name>,
         l2_<name>, max_<name>, l2_norm over all observables and t_end)
    """
    end = reference.t[-1] if t_max is None else min(reference.t[-1], t_max)
    t = other.t[other.t <= end + 1e-12]
    frame = pd.DataFrame({"t": t})
    summary: Dict[str, float] = {}
    total = np.zeros(t.size)
    for name, weights in observables.items():
        ref = np.interp(t, reference.t, reference.observable(weights))
        value = other.observable(weights)[: t.size]
        error = value - ref
        frame[f"err_{name}"] = error
        total += error ** 2
        summary[f"rms_{name}"] = float(np.sqrt(np.mean(error ** 2))) if t.size else np.nan
        summary[f"l2_{name}"] = float(np.sqrt(trapezoid(error ** 2, t))) if t.size > 1 else 0.0
        summary[f"max_{name}"] = float(np.max(np.abs(error))) if t.size else np.nan
    summary["l2_norm"] = float(np.sqrt(trapezoid(total, t))) if t.size > 1 else 0.0
    summary["t_end"] = float(t[-1]) if t.size else float("nan")
    return frame, summary
