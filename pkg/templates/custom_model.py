"""
Custom Model Template for nlmodes

Copy this file to add your own model:
1. Rename the class and the registry name
2. Implement rhs() and, for accurate adjoints, jac_state()/jac_input()
3. Call register_duffing() (or your own register function) before running
   the CLI from Python, e.g. from a small launcher script

Example run config:
    [model]
    name = "duffing"
    params = { damping = 0.1, stiffness = 1.0, hardening = 0.5 }

    [family]
    q0 = 1e-3
    q_max = 0.5

The fixed point at F(x, 0) = 0 must be a stable focus: at least one complex
eigenvalue pair with negative real part. nlmodes continues forced orbits
from the slowest such pair unless family.mode_index says otherwise.
"""

import sys
from dataclasses import dataclass
from typing import Any, Dict, Mapping

import numpy as np

from nlmodes.core.base import DynamicalSystem
from nlmodes.core.errors import ParameterError
from nlmodes.models import register_model


@dataclass(frozen=True)
class DuffingParams:
    """x'' + c x' + k x + h x^3 = u"""
    damping: float = 0.1
    stiffness: float = 1.0
    hardening: float = 0.5

    def __post_init__(self):
        if self.damping <= 0:
            raise ParameterError("duffing.damping", "must be positive for a stable focus", self.damping)
        if self.stiffness <= 0:
            raise ParameterError("duffing.stiffness", "must be positive", self.stiffness)
        if self.damping ** 2 >= 4 * self.stiffness:
            raise ParameterError("duffing.damping", "overdamped; the origin has no oscillatory mode",
                                 self.damping)


class Duffing(DynamicalSystem):
    """Hardening Duffing oscillator forced through the velocity equation."""

    name = "duffing"

    def __init__(self, params: DuffingParams = DuffingParams()):
        super().__init__(2, 1, state_labels=("x", "x_dot"), input_labels=("force",))
        self.params = params

    def rhs(self, x, u):
        p = self.params
        return np.array([
            x[1],
            -p.stiffness * x[0] - p.hardening * x[0] ** 3 - p.damping * x[1] + u[0],
        ])

    def jac_state(self, x, u):
        p = self.params
        return np.array([
            [0.0, 1.0],
            [-p.stiffness - 3.0 * p.hardening * x[0] ** 2, -p.damping],
        ])

    def jac_input(self, x, u):
        return np.array([[0.0], [1.0]])

    def observables(self) -> Dict[str, np.ndarray]:
        table = super().observables()
        table["energy_proxy"] = np.array([self.params.stiffness, 0.0])
        return table


def duffing_factory(params: Mapping[str, Any]) -> DynamicalSystem:
    """Registry factory: ``[model.params]`` -> Duffing."""
    return Duffing(DuffingParams(**dict(params)))


def register_duffing(replace: bool = True) -> None:
    register_model("duffing", duffing_factory, replace=replace)


if __name__ == "__main__":
    # python templates/custom_model.py spectrum --model duffing
    from nlmodes.cli import main

    register_duffing()
    sys.exit(main(sys.argv[1:]))
