"""
Shared fixtures for the nlmodes test suite.

The pendulum family is built once per session on a coarse grid; tests that
need the full-resolution families to the boundary are marked ``slow``.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from nlmodes.core.base import CallableSystem
from nlmodes.family import ContinuationOptions, build_family, extend_family_two_mode, select_modes
from nlmodes.models import Pendulum
from nlmodes.reduce import ReducedModel
from nlmodes.spectral import compute_spectrum, find_fixed_point, oscillatory_mode

PENDULUM_LAMBDA = complex(-0.050059, 0.998746)


@pytest.fixture(scope="session")
def pendulum():
    return Pendulum()


@pytest.fixture(scope="session")
def pendulum_x_ss(pendulum):
    return find_fixed_point(pendulum, np.zeros(2))


@pytest.fixture(scope="session")
def pendulum_spectrum(pendulum, pendulum_x_ss):
    return compute_spectrum(pendulum.jac_state(pendulum_x_ss, pendulum.zero_input()))


@pytest.fixture(scope="session")
def pendulum_mode(pendulum_spectrum):
    return oscillatory_mode(pendulum_spectrum, 1)


@pytest.fixture(scope="session")
def coarse_options():
    """Grid and step control small enough for unit tests."""
    return ContinuationOptions(n_theta=64, delta_q_min=1e-4, delta_q_max=0.1)


@pytest.fixture(scope="session")
def pendulum_family(pendulum, pendulum_x_ss, pendulum_spectrum, coarse_options):
    """Pendulum family from q=1e-3 to q=0.4 (swing amplitude about 0.57 rad)."""
    modes = select_modes(pendulum_spectrum)
    return build_family(
        pendulum,
        modes[0],
        q0=1e-3,
        delta_q=0.02,
        q_max=0.4,
        x_ss=pendulum_x_ss,
        options=coarse_options,
    )


@pytest.fixture(scope="session")
def pendulum_model(pendulum_family, pendulum):
    return ReducedModel.from_family(pendulum_family, pendulum)


def _pair_rhs(x, u):
    x1, v1, x2, v2 = x
    return np.array([
        v1,
        -0.1 * v1 - x1 - x1 ** 3 - 0.2 * (x1 - x2) + u[0],
        v2,
        -0.3 * v2 - 2.25 * x2 - 0.2 * (x2 - x1),
    ])


def _pair_jac(x, u):
    x1 = x[0]
    return np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-1.2 - 3.0 * x1 ** 2, -0.1, 0.2, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.2, 0.0, -2.45, -0.3],
    ])


@pytest.fixture(scope="session")
def coupled_pair():
    """Hardening oscillator coupled to a faster, more damped linear one."""
    return CallableSystem(
        "coupled-pair", 4, 1,
        rhs=_pair_rhs,
        jac_state=_pair_jac,
        jac_input=lambda x, u: np.array([[0.0], [1.0], [0.0], [0.0]]),
        state_labels=("x1", "v1", "x2", "v2"),
    )


@pytest.fixture(scope="session")
def pair_family(coupled_pair):
    """One-parameter family tracking both oscillatory modes."""
    x_ss = np.zeros(4)
    spectrum = compute_spectrum(coupled_pair.jac_state(x_ss, coupled_pair.zero_input()))
    modes = select_modes(spectrum, retain_modes=[], second_mode_index=2)
    options = ContinuationOptions(n_theta=32, delta_q_min=1e-4, delta_q_max=0.02)
    return build_family(coupled_pair, modes[0], q0=1e-3, delta_q=0.01, q_max=0.06,
                        x_ss=x_ss, extra_modes=modes[1:], options=options)


@pytest.fixture(scope="session")
def pair_lattice(pair_family, coupled_pair):
    """Three q1 slices of a 3x3 (q2, q3) lattice."""
    grid = pair_family.q_grid
    return extend_family_two_mode(
        pair_family,
        coupled_pair,
        delta_q2=0.01,
        delta_q3=0.01,
        ranges=([-0.01, 0.01], [-0.01, 0.01]),
        second_mode_index=2,
        q1_values=[grid[0], grid[len(grid) // 2], grid[-1]],
        options=ContinuationOptions(n_theta=32),
        workers=1,
    )
