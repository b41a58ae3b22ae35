"""
Base classes for dynamical systems.

A ``DynamicalSystem`` is an evaluable vector field ẋ = F(x, u) with state
dimension N and input dimension M. Concrete models live in
``nlmodes.models``; user-defined models either subclass ``DynamicalSystem``
or wrap plain functions with ``CallableSystem``.

Instances are immutable after construction and safe to share between
concurrent evaluations.
"""

from abc import ABC, abstractmethod
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .errors import ContractViolationError

FD_STEP = 1e-6


def finite_difference_jacobian(
    fun: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    step: float = FD_STEP,
) -> np.ndarray:
    """
    Central-difference Jacobian of ``fun`` at ``x``.

    Column i uses the step ``step * (1 + |x_i|)``.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x))
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        h = step * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * h)
    return jac


class DynamicalSystem(ABC):
    """
    Abstract vector field F(x, u).

    Subclasses implement ``rhs``; ``jac_state`` and ``jac_input`` fall back to
    central finite differences and should be overridden analytically when the
    model is used for adjoint computations.

    Attributes:
        name: Registry name of the model
        dim_state: N
        dim_input: M
        state_labels: N names, units documented by the concrete model
        input_labels: M names
    """

    name: str = "system"

    def __init__(
        self,
        dim_state: int,
        dim_input: int,
        state_labels: Optional[Sequence[str]] = None,
        input_labels: Optional[Sequence[str]] = None,
    ):
        if int(dim_state) <= 0 or int(dim_input) <= 0:
            raise ContractViolationError(
                f"State and input dimensions must be positive (got N={dim_state}, M={dim_input})"
            )
        self.dim_state = int(dim_state)
        self.dim_input = int(dim_input)
        self.state_labels = tuple(state_labels or (f"x{i + 1}" for i in range(self.dim_state)))
        self.input_labels = tuple(input_labels or (f"u{i + 1}" for i in range(self.dim_input)))
        if len(self.state_labels) != self.dim_state or len(self.input_labels) != self.dim_input:
            raise ContractViolationError("Label count does not match the system dimensions")

    @abstractmethod
    def rhs(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Return F(x, u)."""

    def jac_state(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """∂F/∂x, N×N."""
        return finite_difference_jacobian(lambda z: self.rhs(z, u), x)

    def jac_input(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """∂F/∂u, N×M."""
        return finite_difference_jacobian(lambda v: self.rhs(x, v), np.asarray(u, dtype=float))

    def zero_input(self) -> np.ndarray:
        return np.zeros(self.dim_input)

    def default_guess(self) -> np.ndarray:
        """Starting point for the fixed-point search."""
        return np.zeros(self.dim_state)

    def observables(self) -> Dict[str, np.ndarray]:
        """Named linear observables c (value c·x); every state label is one."""
        eye = np.eye(self.dim_state)
        return {label: eye[i] for i, label in enumerate(self.state_labels)}

    def observable(self, name: str) -> np.ndarray:
        table = self.observables()
        if name not in table:
            raise ContractViolationError(
                f"Unknown observable '{name}' for model {self.name}; "
                f"available: {', '.join(sorted(table))}"
            )
        return table[name]

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, N={self.dim_state}, M={self.dim_input})"


class CallableSystem(DynamicalSystem):
    """
    Dynamical system assembled from plain functions.

    Example:
        >>> duffing = CallableSystem(
        ...     "duffing", 2, 1,
        ...     rhs=lambda x, u: np.array([x[1], -x[0] - 0.1 * x[1] - x[0] ** 3 + u[0]]),
        ... )
    """

    def __init__(
        self,
        name: str,
        dim_state: int,
        dim_input: int,
        rhs: Callable[[np.ndarray, np.ndarray], np.ndarray],
        jac_state: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
        jac_input: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
        state_labels: Optional[Sequence[str]] = None,
        input_labels: Optional[Sequence[str]] = None,
    ):
        super().__init__(dim_state, dim_input, state_labels, input_labels)
        self.name = name
        self._rhs = rhs
        self._jac_state = jac_state
        self._jac_input = jac_input

    def rhs(self, x, u):
        return np.asarray(self._rhs(x, u), dtype=float)

    def jac_state(self, x, u):
        if self._jac_state is None:
            return super().jac_state(x, u)
        return np.asarray(self._jac_state(x, u), dtype=float)

    def jac_input(self, x, u):
        if self._jac_input is None:
            return super().jac_input(x, u)
        return np.asarray(self._jac_input(x, u), dtype=float)


def check_state_input(system: DynamicalSystem, x, u):
    """Coerce x and u to float vectors and verify their dimensions."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (system.dim_state,):
        raise ContractViolationError(
            f"State has shape {x.shape}, expected ({system.dim_state},) for {system.name}"
        )
    if u.shape != (system.dim_input,):
        raise ContractViolationError(
            f"Input has shape {u.shape}, expected ({system.dim_input},) for {system.name}"
        )
    return x, u


def eval_rhs(system: DynamicalSystem, x, u) -> np.ndarray:
    """Evaluate F(x, u) after checking dimensions."""
    x, u = check_state_input(system, x, u)
    return np.asarray(system.rhs(x, u), dtype=float)
