"""
Local linearization about a fixed point, used as a comparison baseline.

    ẋ = A (x - x_ss) + B u,   A = ∂F/∂x(x_ss, 0),   B = ∂F/∂u(x_ss, 0)

The affine system is expressed in the original coordinates so full, reduced
and linear simulations share initial conditions and observables.
"""

from typing import Dict

import numpy as np

from ..core.base import DynamicalSystem, check_state_input
from ..core.errors import NotAFixedPointError

FIXED_POINT_TOL = 1e-8


class LinearizedSystem(DynamicalSystem):
    def __init__(self, base: DynamicalSystem, x_ss: np.ndarray, A: np.ndarray, B: np.ndarray):
        super().__init__(base.dim_state, base.dim_input, base.state_labels, base.input_labels)
        self.name = f"{base.name}-linear"
        self.base = base
        self.x_ss = np.array(x_ss, dtype=float)
        self.A = np.array(A, dtype=float)
        self.B = np.array(B, dtype=float)

    def rhs(self, x, u):
        return self.A @ (x - self.x_ss) + self.B @ u

    def jac_state(self, x, u):
        return self.A.copy()

    def jac_input(self, x, u):
        return self.B.copy()

    def observables(self) -> Dict[str, np.ndarray]:
        return self.base.observables()

    def default_guess(self) -> np.ndarray:
        return self.x_ss.copy()

    def transfer_function(self, s: complex, weights: np.ndarray) -> np.ndarray:
        """c (sI - A)⁻¹ B for observable weights c; one entry per input channel."""
        resolvent = np.linalg.solve(s * np.eye(self.dim_state) - self.A, self.B.astype(complex))
        return np.asarray(weights) @ resolvent


def linearized_model(system: DynamicalSystem, x_ss, tol: float = FIXED_POINT_TOL) -> LinearizedSystem:
    """
    Linearize ``system`` at the fixed point ``x_ss``.

    Raises:
        NotAFixedPointError: if ‖F(x_ss, 0)‖ > tol·(1 + ‖x_ss‖)
    """
    x_ss, u0 = check_state_input(system, x_ss, system.zero_input())
    residual = float(np.linalg.norm(system.rhs(x_ss, u0)))
    if residual > tol * (1.0 + np.linalg.norm(x_ss)):
        raise NotAFixedPointError(residual, tol)
    return LinearizedSystem(system, x_ss, system.jac_state(x_ss, u0), system.jac_input(x_ss, u0))
