"""
Input signals u(t) for simulations.

Config form (``[simulation.input]``):

    {kind = "zero"}
    {kind = "sine", amplitude = 0.1, frequency = 1.6, phase = 0.0, channel = 0}
    {kind = "ramp-sine", rate = 0.2, period = 12.0, channel = 0}
    {kind = "table", times = [...], values = [...]}

``values`` of a table is either one list (single channel) or a list of
per-time rows with M entries.
"""

from dataclasses import dataclass
from typing import Any, Mapping, Optional

import numpy as np

from .core.errors import ParameterError


@dataclass(frozen=True)
class InputSignal:
    """Callable u(t) returning an M-vector."""
    kind: str
    dim_input: int = 1
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    rate: float = 0.0
    period: float = 1.0
    channel: int = 0
    times: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    def __call__(self, t: float) -> np.ndarray:
        u = np.zeros(self.dim_input)
        if self.kind == "zero":
            return u
        if self.kind == "table":
            for j in range(self.dim_input):
                u[j] = np.interp(t, self.times, self.values[:, j])
            return u
        if self.kind == "sine":
            u[self.channel] = self.amplitude * np.sin(self.frequency * t + self.phase)
        elif self.kind == "ramp-sine":
            u[self.channel] = self.rate * t * np.sin(2.0 * np.pi * t / self.period)
        return u

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind == "sine" and self.amplitude == 0.0)

    def describe(self) -> str:
        if self.kind == "sine":
            return f"sine(a={self.amplitude:g}, w={self.frequency:g})"
        if self.kind == "ramp-sine":
            return f"ramp-sine(rate={self.rate:g}, period={self.period:g})"
        return self.kind


def _channel(channel: int, dim_input: int) -> int:
    if not 0 <= channel < dim_input:
        raise ParameterError("input.channel", f"must address one of {dim_input} input channel(s)", channel)
    return int(channel)


def zero(dim_input: int = 1) -> InputSignal:
    return InputSignal("zero", dim_input)


def sine(amplitude: float, frequency: float, phase: float = 0.0, channel: int = 0,
         dim_input: int = 1) -> InputSignal:
    """u_channel(t) = a sin(ω_f t + phase)."""
    if frequency <= 0:
        raise ParameterError("input.frequency", "must be positive", frequency)
    return InputSignal("sine", dim_input, amplitude=float(amplitude), frequency=float(frequency),
                       phase=float(phase), channel=_channel(channel, dim_input))


def ramp_sine(rate: float, period: float, channel: int = 0, dim_input: int = 1) -> InputSignal:
    """u_channel(t) = rate·t·sin(2πt/period)."""
    if period <= 0:
        raise ParameterError("input.period", "must be positive", period)
    return InputSignal("ramp-sine", dim_input, rate=float(rate), period=float(period),
                       channel=_channel(channel, dim_input))


def table(times, values, dim_input: int = 1) -> InputSignal:
    """Linear interpolation of tabulated samples, held constant outside the table."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if times.ndim != 1 or times.size < 2 or values.shape[0] != times.size:
        raise ParameterError("input.times", "needs at least two times matching the value rows", times.size)
    if np.any(np.diff(times) <= 0):
        raise ParameterError("input.times", "must be strictly increasing")
    if values.shape[1] != dim_input:
        raise ParameterError("input.values", f"rows need {dim_input} entries", values.shape[1])
    return InputSignal("table", dim_input, times=times, values=values)


def signal_from_config(spec: Optional[Mapping[str, Any]], dim_input: int = 1) -> InputSignal:
    """Build an InputSignal from a ``[simulation.input]`` table."""
    spec = dict(spec or {"kind": "zero"})
    kind = spec.pop("kind", "zero")
    try:
        if kind == "zero":
            return zero(dim_input)
        if kind == "sine":
            return sine(dim_input=dim_input, **spec)
        if kind in ("ramp-sine", "ramp_sine"):
            return ramp_sine(dim_input=dim_input, **spec)
        if kind == "table":
            return table(spec["times"], spec["values"], dim_input)
    except TypeError as exc:
        raise ParameterError("simulation.input", f"bad arguments for kind '{kind}': {exc}") from exc
    except KeyError as exc:
        raise ParameterError("simulation.input", f"kind 'table' needs {exc}") from exc
    raise ParameterError("simulation.input.kind", "must be one of zero, sine, ramp-sine, table", kind)
