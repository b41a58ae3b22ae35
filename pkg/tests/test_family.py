"""
Tests for family continuation, backbones and the two-mode lattice.
"""

import dataclasses
import functools
import os
import sys
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from nlmodes.core.errors import (
    ContractViolationError,
    FamilyBoundaryError,
    ParameterError,
    RangeError,
    RetuneNeededError,
)
from nlmodes.family import (
    THREADS_ENV,
    ContinuationOptions,
    OrbitFamily,
    backbone,
    build_family,
    default_workers,
    effective_frequency,
    extend_family,
    extend_family_two_mode,
    finite_difference_dx_dq,
    lattice_axis,
    select_modes,
)
from nlmodes.models import build_model
from nlmodes.spectral import compute_spectrum, find_fixed_point


class TestSelectModes:
    """Which oscillatory modes are tracked."""

    def test_pendulum_has_only_the_family_mode(self, pendulum_spectrum):
        modes = select_modes(pendulum_spectrum)
        assert len(modes) == 1
        assert modes[0].mode_index == 1

    def test_power_system_threshold(self):
        """Mode 2 decays by about -0.18 per characteristic period and is kept by default."""
        system = build_model("ieee9bus")
        x_ss = find_fixed_point(system)
        spectrum = compute_spectrum(system.jac_state(x_ss, system.zero_input()))
        assert [m.mode_index for m in select_modes(spectrum)] == [1, 2]
        assert [m.mode_index for m in select_modes(spectrum, psi_decay_threshold=0.0)] == [1]
        assert [m.mode_index for m in select_modes(spectrum, mode_index=2, retain_modes=[])] == [2]

    def test_second_mode_must_differ(self, pendulum_spectrum):
        with pytest.raises(ParameterError):
            select_modes(pendulum_spectrum, second_mode_index=1)


class TestOptions:
    """Continuation options and worker counts."""

    def test_from_config(self):
        options = ContinuationOptions.from_config({
            "family": {"n_theta": 128, "delta_q_max": 0.2},
            "tolerances": {"shooting": 1e-9, "rtol": 1e-9},
        })
        assert options.n_theta == 128
        assert options.delta_q_max == 0.2
        assert options.shooting_tol == 1e-9
        assert options.integrator.rtol == 1e-9

    def test_workers_from_environment(self):
        with patch.dict(os.environ, {THREADS_ENV: "3"}):
            assert default_workers() == 3

    def test_non_integer_environment_ignored(self):
        with patch.dict(os.environ, {THREADS_ENV: "many"}):
            assert default_workers() >= 1


class TestBuildFamily:
    """One-parameter continuation of the pendulum."""

    def test_completes(self, pendulum_family):
        assert pendulum_family.termination == "completed"
        assert pendulum_family.terminal_q is None
        assert pendulum_family.q_grid[0] == pytest.approx(1e-3)
        assert pendulum_family.q_grid[-1] == pytest.approx(0.4)

    def test_q_strictly_increasing(self, pendulum_family):
        assert np.all(np.diff(pendulum_family.q_grid) > 0)

    def test_orbits_are_nested(self, pendulum_family):
        """Swing amplitude grows with q, so orbits do not intersect."""
        swings = [np.max(np.abs(o.x_gamma[:, 0])) for o in pendulum_family.orbits]
        assert np.all(np.diff(swings) > 0)

    def test_step_adapts_upwards(self, pendulum_family):
        """Easy steps double the increment up to delta_q_max."""
        steps = np.diff(pendulum_family.q_grid)
        assert steps.max() > 0.02 + 1e-12
        assert steps.max() <= 0.1 + 1e-12

    def test_provenance(self, pendulum_family):
        provenance = pendulum_family.provenance
        assert provenance["q0"] == pytest.approx(1e-3)
        assert provenance["n_theta"] == 64
        assert provenance["termination"] == "completed"

    def test_invalid_arguments(self, pendulum, pendulum_mode):
        with pytest.raises(ParameterError):
            build_family(pendulum, pendulum_mode, q0=0.1, delta_q=0.01, q_max=0.05)
        with pytest.raises(ParameterError):
            build_family(pendulum, pendulum_mode, q0=1e-3, delta_q=0.0, q_max=0.1)

    def test_interrupt_keeps_seed(self, pendulum, pendulum_mode, pendulum_x_ss, coarse_options):
        """A stop request before the first step returns the analyzed seed."""
        family = build_family(pendulum, pendulum_mode, q0=1e-3, delta_q=0.01, q_max=0.1,
                              x_ss=pendulum_x_ss, options=coarse_options, should_stop=lambda: True)
        assert family.termination == "interrupted"
        assert len(family) == 1
        assert family.terminal_q[0] == pytest.approx(1e-3)
        assert family.orbits[0].analyzed

    def test_max_nodes(self, pendulum, pendulum_mode, pendulum_x_ss, coarse_options):
        options = dataclasses.replace(coarse_options, max_nodes=3)
        family = build_family(pendulum, pendulum_mode, q0=1e-3, delta_q=0.01, q_max=0.2,
                              x_ss=pendulum_x_ss, options=options)
        assert family.termination == "max-nodes"
        assert len(family) == 3

    def test_boundary_during_retune_keeps_partial_family(self, pendulum, pendulum_mode, pendulum_x_ss,
                                                         coarse_options):
        """A retuned orbit past the boundary ends the build with the nodes so far."""
        def needs_retune(family, system, delta_q, options):
            raise RetuneNeededError(family.last.q, 0.01, 3.1)

        def real_pair(system, family, delta_omega, options):
            raise FamilyBoundaryError(family.last.q, "tracked multiplier pair became real")

        with patch("nlmodes.family.extend_family", side_effect=needs_retune), \
                patch("nlmodes.family._retune_last", side_effect=real_pair):
            family = build_family(pendulum, pendulum_mode, q0=1e-3, delta_q=0.01, q_max=0.1,
                                  x_ss=pendulum_x_ss, options=coarse_options)
        assert family.termination == "family-boundary"
        assert family.terminal_q[0] == pytest.approx(1e-3)
        assert len(family) == 1
        assert family.provenance["termination"] == "family-boundary"

    def test_extend_rejects_non_positive_step(self, pendulum_family, pendulum):
        with pytest.raises(ParameterError):
            extend_family(pendulum_family, pendulum, 0.0)

    def test_empty_family_rejected(self, pendulum_mode):
        with pytest.raises(ContractViolationError):
            OrbitFamily(orbits=[], modes=(pendulum_mode,))


class TestEffectiveFrequency:
    """Backbone of the pendulum family."""

    def test_small_amplitude_limit(self, pendulum_family):
        """omega_bar(q -> 0) = Imag lambda_1 within 1e-3."""
        assert effective_frequency(pendulum_family, 1e-3) == pytest.approx(0.998746, abs=1e-3)

    def test_decreasing_in_q(self, pendulum_family, pendulum):
        """Softening spring: the period lengthens with amplitude."""
        curve = backbone(pendulum_family, pendulum)
        assert np.all(np.diff(curve.omega_bar) < 0)

    def test_amplitude_matches_orbits(self, pendulum_family, pendulum):
        curve = backbone(pendulum_family, pendulum, "phi")
        last = pendulum_family.last.x_gamma[:, 0]
        assert curve.amplitude[-1] == pytest.approx(last.max() - last.min())
        assert np.all(curve.re_kappa[:, 0] < 0)

    def test_interpolates_between_nodes(self, pendulum_family):
        grid = pendulum_family.q_grid
        middle = 0.5 * (grid[2] + grid[3])
        value = effective_frequency(pendulum_family, middle)
        ends = sorted([effective_frequency(pendulum_family, grid[2]), effective_frequency(pendulum_family, grid[3])])
        assert ends[0] - 1e-6 <= value <= ends[1] + 1e-6

    def test_out_of_range(self, pendulum_family):
        with pytest.raises(RangeError) as exc_info:
            effective_frequency(pendulum_family, 1.0)
        assert "outside family range" in str(exc_info.value)

    def test_finite_difference_matches_construction_direction(self, pendulum_family):
        """Second-order differences of x^gamma agree with 2 Re g_1 in the interior."""
        dx = finite_difference_dx_dq(pendulum_family)
        k = len(pendulum_family) // 2
        direction = 2.0 * pendulum_family.orbits[k].g[0, :, :-1].real
        scale = np.max(np.abs(direction))
        assert np.max(np.abs(dx[k] - direction)) < 0.1 * scale


class TestLatticeAxis:
    """Uniform lattice axes through zero."""

    def test_contains_zero(self):
        axis = lattice_axis([-0.2, 0.3], 0.1)
        np.testing.assert_allclose(axis, [-0.2, -0.1, 0.0, 0.1, 0.2, 0.3], atol=1e-12)

    def test_degenerate_range(self):
        np.testing.assert_allclose(lattice_axis([0.0, 0.0], 0.1), [0.0])

    def test_range_must_contain_zero(self):
        with pytest.raises(ParameterError):
            lattice_axis([0.1, 0.3], 0.1)

    def test_step_must_be_positive(self):
        with pytest.raises(ParameterError):
            lattice_axis([-0.1, 0.1], 0.0)


class TestTwoModeLattice:
    """Lattice extension requires a tracked second mode."""

    def test_needs_tracked_second_mode(self, pendulum_family, pendulum):
        with pytest.raises(ContractViolationError) as exc_info:
            extend_family_two_mode(pendulum_family, pendulum, 0.1, 0.1, ([0.0, 0.1], [0.0, 0.1]), workers=1)
        assert "not tracked" in str(exc_info.value)


@functools.lru_cache(maxsize=None)
def _power_family(mode_index, q_max):
    system = build_model("ieee9bus")
    x_ss = find_fixed_point(system)
    spectrum = compute_spectrum(system.jac_state(x_ss, system.zero_input()))
    modes = select_modes(spectrum, mode_index=mode_index)
    options = ContinuationOptions(n_theta=128, delta_q_max=0.05)
    family = build_family(system, modes[0], q0=1e-3, delta_q=0.005, q_max=q_max,
                          x_ss=x_ss, extra_modes=modes[1:], options=options)
    return system, family


@pytest.mark.slow
@pytest.mark.timeout(3600)
class TestPowerSystemFamilies:
    """Mode-1 and mode-2 families of the power network end at real multipliers."""

    @pytest.mark.parametrize("mode_index", [1, 2])
    def test_terminates_at_boundary(self, mode_index):
        _, family = _power_family(mode_index, q_max=40.0)
        assert family.termination == "family-boundary"
        assert family.terminal_q[0] < 40.0

    def test_mode_one_family_covers_mixed_start(self):
        """The boundary lies past q1 = 5.1, where the two-mode comparison starts."""
        system, family = _power_family(1, q_max=40.0)
        assert family.terminal_q[0] > 5.1
        swings = backbone(family, system, "phi12").amplitude
        assert np.all(np.diff(swings) > 0)


@pytest.mark.slow
class TestPlanarFamily:
    """The planar population stiffens with amplitude."""

    def test_effective_frequency_increases(self):
        system = build_model("planar10")
        x_ss = find_fixed_point(system)
        spectrum = compute_spectrum(system.jac_state(x_ss, system.zero_input()))
        modes = select_modes(spectrum, retain_modes=[])
        family = build_family(system, modes[0], q0=1e-3, delta_q=0.01, q_max=0.6, x_ss=x_ss,
                              options=ContinuationOptions(n_theta=128, delta_q_max=0.05))
        curve = backbone(family, system, "x_mean")
        assert np.all(np.diff(curve.omega_bar) > 0)
