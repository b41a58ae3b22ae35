"""
Heterogeneous population of coupled planar oscillators.

Oscillator j has state (x_j, y_j) and radius r_j² = x_j² + y_j²:

    ẋ_j = σ x_j (μ_j - r_j²) - y_j (1 + ρ_j (r_j² - μ_j)) + (K/N) Σ_{k≠j} x_k + u
    ẏ_j = σ y_j (μ_j - r_j²) + x_j (1 + ρ_j (r_j² - μ_j))

With the default μ_j and ρ_j (j = 0..N-1) the origin is a stable focus. State ordering is
(x_1..x_N, y_1..y_N); the single input enters every ẋ_j equation.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..core.base import DynamicalSystem
from ..core.errors import ParameterError


def default_mu(count: int) -> Tuple[float, ...]:
    return tuple(-4.0 + 2.0 * j / 9.0 for j in range(count))


def default_rho(count: int) -> Tuple[float, ...]:
    return tuple(0.4 - j / 30.0 for j in range(count))


@dataclass(frozen=True)
class PlanarPopulationParams:
    count: int = 10
    coupling: float = 1.2
    sigma: float = 0.1
    mu: Optional[Sequence[float]] = None
    rho: Optional[Sequence[float]] = None

    def __post_init__(self):
        if int(self.count) < 1:
            raise ParameterError("planar.count", "needs at least one oscillator", self.count)
        mu = tuple(float(v) for v in (self.mu if self.mu is not None else default_mu(self.count)))
        rho = tuple(float(v) for v in (self.rho if self.rho is not None else default_rho(self.count)))
        if len(mu) != self.count or len(rho) != self.count:
            raise ParameterError("planar.mu", f"mu and rho need {self.count} entries each")
        if any(m >= 0 for m in mu):
            raise ParameterError("planar.mu", "every mu_j must be negative for a stable origin", mu)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "rho", rho)


class PlanarPopulation(DynamicalSystem):
    name = "planar10"

    def __init__(self, params: PlanarPopulationParams = PlanarPopulationParams()):
        n = params.count
        labels = [f"x{j}" for j in range(1, n + 1)] + [f"y{j}" for j in range(1, n + 1)]
        super().__init__(2 * n, 1, state_labels=labels, input_labels=("u",))
        self.params = params
        self._n = n
        self._mu = np.asarray(params.mu)
        self._rho = np.asarray(params.rho)
        self._k = params.coupling / n
        self._sigma = params.sigma

    def rhs(self, x, u):
        n = self._n
        px, py = x[:n], x[n:]
        r2 = px ** 2 + py ** 2
        radial = self._sigma * (self._mu - r2)
        rotation = 1.0 + self._rho * (r2 - self._mu)
        coupling = self._k * (px.sum() - px)
        return np.concatenate([
            radial * px - rotation * py + coupling + u[0],
            radial * py + rotation * px,
        ])

    def jac_state(self, x, u):
        n = self._n
        px, py = x[:n], x[n:]
        r2 = px ** 2 + py ** 2
        radial = self._sigma * (self._mu - r2)
        rotation = 1.0 + self._rho * (r2 - self._mu)
        sig, rho = self._sigma, self._rho

        jac = np.zeros((2 * n, 2 * n))
        jac[:n, :n] = self._k * (np.ones((n, n)) - np.eye(n))
        idx = np.arange(n)
        jac[idx, idx] += radial - 2 * sig * px ** 2 - 2 * rho * px * py
        jac[idx, n + idx] = -2 * sig * px * py - rotation - 2 * rho * py ** 2
        jac[n + idx, idx] = -2 * sig * px * py + rotation + 2 * rho * px ** 2
        jac[n + idx, n + idx] = radial - 2 * sig * py ** 2 + 2 * rho * px * py
        return jac

    def jac_input(self, x, u):
        b = np.zeros((2 * self._n, 1))
        b[:self._n, 0] = 1.0
        return b

    def observables(self) -> Dict[str, np.ndarray]:
        table = super().observables()
        mean = np.zeros(2 * self._n)
        mean[:self._n] = 1.0 / self._n
        table["x_mean"] = mean
        return table
