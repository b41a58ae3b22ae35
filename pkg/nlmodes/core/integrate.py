"""
Time integration helpers around ``scipy.integrate.solve_ivp``.

All orbit, variational, adjoint and simulation runs go through ``integrate``
so integrator settings live in one place (``IntegratorSettings``) and solver
failures surface as nlmodes errors.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NoConvergenceError


@dataclass(frozen=True)
class IntegratorSettings:
    """Adaptive Runge-Kutta settings; defaults are the high-accuracy ones."""
    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = "DOP853"
    max_step: float = np.inf

    def relaxed(self, factor: float = 1e3) -> "IntegratorSettings":
        """Looser copy for long simulations and warm-up runs."""
        return IntegratorSettings(
            rtol=min(self.rtol * factor, 1e-6),
            atol=min(self.atol * factor, 1e-8),
            method=self.method,
            max_step=self.max_step,
        )


DEFAULT_SETTINGS = IntegratorSettings()


def integrate(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t_span: Sequence[float],
    y0: np.ndarray,
    settings: IntegratorSettings = DEFAULT_SETTINGS,
    t_eval: Optional[np.ndarray] = None,
    events=None,
    dense_output: bool = False,
):
    """
    Run ``solve_ivp`` and raise when the solver itself fails.

    Returns the scipy ``OdeResult``; ``status == 1`` (terminal event) is a
    normal outcome and left to the caller.
    """
    sol = solve_ivp(
        fun,
        (float(t_span[0]), float(t_span[1])),
        np.asarray(y0),
        method=settings.method,
        rtol=settings.rtol,
        atol=settings.atol,
        max_step=settings.max_step,
        t_eval=t_eval,
        events=events,
        dense_output=dense_output,
    )
    if sol.status == -1:
        raise NoConvergenceError(f"Integrator failed on [{t_span[0]}, {t_span[1]}]: {sol.message}")
    return sol
