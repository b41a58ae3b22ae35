"""
Tests for the adaptive phase-amplitude reduced model.

Covers:
1. The single- and two-mode linear solves
2. Action-angle behaviour in the small-amplitude limit
3. Lifting full states and reconstructing them
4. Reduced simulations against the full model
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from nlmodes.core.errors import (
    ContractViolationError,
    OutOfNeighborhoodError,
    RangeError,
    SingularityError,
)
from nlmodes.family import ContinuationOptions, build_family
from nlmodes.periodic import normalization_defects
from nlmodes.reduce import (
    ReducedModel,
    ReducedState,
    effective_input,
    lift_state,
    output_grid,
    reconstruct_state,
    reduced_rhs,
    reduced_rhs_two_mode,
    simulate_reduced,
    solve_single_mode,
    solve_two_mode,
    two_mode_matrix,
)
from nlmodes.response import simulate_full
from nlmodes.signals import ramp_sine, sine, zero


def _random_complex(rng, size=None):
    return rng.standard_normal(size) + 1j * rng.standard_normal(size)


class TestSingleModeSolve:
    """E_1 q_dot + I_1,2 f = -b_1 with real unknowns."""

    def test_residual_vanishes_on_random_samples(self):
        rng = np.random.default_rng(11)
        drive, i12, e1 = (_random_complex(rng, 500) for _ in range(3))
        q_dot, phase_rate = solve_single_mode(drive, i12, e1)
        residual = e1 * q_dot + i12 * phase_rate + drive
        assert np.max(np.abs(residual)) < 1e-9 * (1.0 + np.max(np.abs(drive)))

    def test_action_angle_case(self):
        """E_1 = -1, I_1,2 = i: q_dot = Re b, f = -Imag b."""
        q_dot, phase_rate = solve_single_mode(0.3 - 0.2j, 1j, -1.0)
        assert q_dot == pytest.approx(0.3)
        assert phase_rate == pytest.approx(0.2)

    def test_singular_configuration(self):
        """Parallel E_1 and I_1,2 leave the system singular."""
        with pytest.raises(SingularityError) as exc_info:
            solve_single_mode(1.0 + 1.0j, 1.0 + 1.0j, 2.0 + 2.0j, theta=0.5, q=[0.1])
        assert "theta=0.500000" in str(exc_info.value)


class TestTwoModeSolve:
    """The 4x4 system over (q1_dot, f, q2_dot, q3_dot)."""

    def test_residual_vanishes_on_random_samples(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            drive1, drive3, i12, i32 = _random_complex(rng, 4)
            e1, e3 = _random_complex(rng, 3), _random_complex(rng, 3)
            if np.linalg.cond(two_mode_matrix(i12, i32, e1, e3)) > 1e6:
                continue
            q_dot, f = solve_two_mode(drive1, drive3, i12, i32, e1, e3)
            assert abs(drive1 + i12 * f + e1 @ q_dot) < 1e-8
            assert abs(drive3 + i32 * f + e3 @ q_dot) < 1e-8

    def test_singular_matrix(self):
        e = np.array([1.0, 0.0, 0.0], dtype=complex)
        with pytest.raises(SingularityError):
            solve_two_mode(1.0, 1.0, 1.0, 1.0, e, e)


class TestModelRange:
    """Admissible amplitudes of the single-mode model."""

    def test_bounds_extend_below_first_node(self, pendulum_model, pendulum_family):
        lo, hi = pendulum_model.bounds[0]
        assert lo == pytest.approx(1e-3 * pendulum_family.q0)
        assert hi == pytest.approx(pendulum_family.q_grid[-1])

    def test_out_of_range(self, pendulum_model):
        with pytest.raises(RangeError):
            pendulum_model.point(0.0, 1.0)

    def test_wrong_amplitude_count(self, pendulum_model):
        with pytest.raises(ContractViolationError):
            pendulum_model.check_range([0.1, 0.0, 0.0])

    def test_nodes_are_exact(self, pendulum_model, pendulum_family):
        """At a node and grid phase the interpolant returns the stored sample."""
        orbit = pendulum_family.orbits[3]
        point = pendulum_model.point(orbit.theta[5], orbit.q)
        np.testing.assert_allclose(point.x_gamma, orbit.x_gamma[5], atol=1e-12)
        np.testing.assert_allclose(point.alpha, orbit.alpha[5], atol=1e-12)
        assert point.omega == pytest.approx(orbit.omega)


class TestActionAngleLimit:
    """Small amplitudes recover theta_dot = Imag lambda and q_dot = q Re lambda."""

    @staticmethod
    def _relative_errors(model, mode, q):
        errors = []
        for theta in np.linspace(0.0, 2.0 * np.pi, 9, endpoint=False):
            rates = reduced_rhs(model, ReducedState.make(theta, q), np.zeros(1))
            errors.append(max(
                abs(rates.theta - mode.eigenvalue.imag) / mode.eigenvalue.imag,
                abs(rates.q[0] - q * mode.eigenvalue.real) / abs(q * mode.eigenvalue.real),
            ))
        return max(errors)

    def test_first_node(self, pendulum_model, pendulum_mode):
        assert self._relative_errors(pendulum_model, pendulum_mode, 1e-3) < 0.01

    def test_error_shrinks_with_amplitude(self, pendulum, pendulum_mode, pendulum_x_ss,
                                          pendulum_model, coarse_options):
        """A family seeded at q = 1e-4 is at least linearly closer to the limit."""
        small = build_family(pendulum, pendulum_mode, q0=1e-4, delta_q=1e-4, q_max=2e-4,
                             x_ss=pendulum_x_ss, options=coarse_options)
        model = ReducedModel.from_family(small, pendulum)
        at_1e3 = self._relative_errors(pendulum_model, pendulum_mode, 1e-3)
        at_1e4 = self._relative_errors(model, pendulum_mode, 1e-4)
        assert at_1e4 <= max(0.2 * at_1e3, 1e-5)

    def test_extension_below_first_node(self, pendulum_model, pendulum_mode):
        """The small-amplitude extension keeps the limit below q_first."""
        assert pendulum_model.q_floor < 1e-5 < pendulum_model.q_first
        assert self._relative_errors(pendulum_model, pendulum_mode, 1e-5) < 0.01

    def test_effective_input_vanishes_without_input(self, pendulum, pendulum_model, pendulum_family):
        """With u = 0 the effective input is -alpha."""
        orbit = pendulum_family.orbits[2]
        point = pendulum_model.point(0.4, orbit.q)
        value = effective_input(pendulum, point.x_gamma, np.zeros(1), orbit.q, 0.4, pendulum_model)
        np.testing.assert_allclose(value, -point.alpha, atol=1e-14)


class TestLiftAndReconstruct:
    """Moving between full states and reduced coordinates."""

    def test_orbit_sample_round_trip(self, pendulum_model, pendulum_family):
        orbit = pendulum_family.orbits[4]
        state = lift_state(pendulum_model, orbit.x_gamma[10])
        assert state.q[0] == pytest.approx(orbit.q[0], abs=1e-6)
        assert state.theta == pytest.approx(orbit.theta[10], abs=1e-5)

    def test_off_node_state(self, pendulum_model):
        """A state between nodes is lifted and reconstructed within 1e-3."""
        x = np.array([0.3, 0.0])
        state = lift_state(pendulum_model, x)
        np.testing.assert_allclose(reconstruct_state(pendulum_model, state), x, atol=1e-3)

    def test_far_state_rejected(self, pendulum_model):
        with pytest.raises(OutOfNeighborhoodError) as exc_info:
            lift_state(pendulum_model, np.array([3.0, 3.0]))
        assert "beyond the lift limit" in str(exc_info.value)

    def test_dimension_checked(self, pendulum_model):
        with pytest.raises(ContractViolationError):
            lift_state(pendulum_model, np.zeros(3))

    def test_psi_count_checked(self, pendulum_model):
        with pytest.raises(ContractViolationError):
            reconstruct_state(pendulum_model, ReducedState.make(0.0, 0.1, [0.1]))


class TestOutputGrid:

    def test_includes_end_point(self):
        np.testing.assert_allclose(output_grid([0.0, 1.0], 0.3), [0.0, 0.3, 0.6, 0.9, 1.0])

    def test_exact_multiple(self):
        assert output_grid([0.0, 1.0], 0.25).size == 5

    def test_invalid_span(self):
        with pytest.raises(ContractViolationError):
            output_grid([1.0, 0.0], 0.1)


class TestSimulateReduced:
    """Reduced trajectories against the full pendulum."""

    def test_on_orbit_start_tracks_full_model(self, pendulum, pendulum_model, pendulum_family):
        """Unforced decay from an orbit sample matches the full model over one period."""
        orbit = pendulum_family.orbits[-3]
        init = ReducedState.make(0.0, orbit.q)
        x0 = reconstruct_state(pendulum_model, init)
        span = (0.0, 2.0 * np.pi / orbit.omega)
        reduced = simulate_reduced(pendulum_model, zero(), init, span, 0.05)
        full = simulate_full(pendulum, zero(), x0, span, 0.05)

        assert reduced.termination == "completed"
        swing = np.max(np.abs(full.x[:, 0]))
        assert np.max(np.abs(reduced.x - full.x)) < 0.02 * swing

    def test_unforced_amplitude_decays(self, pendulum_model):
        """Without input q shrinks monotonically and the run stays in range."""
        init = ReducedState.make(0.0, 0.2)
        trace = simulate_reduced(pendulum_model, zero(), init, (0.0, 40.0), 0.5)
        assert trace.termination == "completed"
        assert np.all(np.diff(trace.q[:, 0]) < 0)

    def test_strong_forcing_hits_upper_boundary(self, pendulum_model):
        """Forcing near resonance drives q past q_max and stops the run."""
        forcing = sine(2.0, 0.97)
        init = ReducedState.make(0.0, 0.2)
        trace = simulate_reduced(pendulum_model, forcing, init, (0.0, 100.0), 0.1)
        assert trace.termination == "family-boundary"
        assert trace.q[-1, 0] == pytest.approx(pendulum_model.bounds[0][1], abs=1e-6)
        assert trace.t[-1] < 100.0

    def test_trace_frame_columns(self, pendulum, pendulum_model):
        trace = simulate_reduced(pendulum_model, zero(), ReducedState.make(0.0, 0.1), (0.0, 1.0), 0.5)
        frame = trace.to_frame(pendulum.state_labels, pendulum.input_labels)
        assert list(frame.columns) == ["t", "theta", "q1", "phi", "phi_dot", "torque"]

    def test_initial_state_validated(self, pendulum_model):
        with pytest.raises(RangeError):
            simulate_reduced(pendulum_model, zero(), ReducedState.make(0.0, 5.0), (0.0, 1.0), 0.1)

    def test_two_mode_rhs_needs_lattice(self, pendulum_model):
        with pytest.raises(ContractViolationError):
            reduced_rhs_two_mode(pendulum_model, ReducedState.make(0.0, 0.1), np.zeros(1))


class TestTwoModeModel:
    """Reduced model on the (q1, q2, q3) lattice of the coupled pair."""

    @pytest.fixture(scope="class")
    def model(self, pair_lattice, coupled_pair):
        return ReducedModel.from_family(pair_lattice, coupled_pair)

    def test_lattice_shape(self, pair_lattice):
        assert pair_lattice.mode_count == 2
        assert pair_lattice.lattice_shape == (3, 3, 3)
        assert len(pair_lattice) == 27
        np.testing.assert_allclose(pair_lattice.q_axes[1], [-0.01, 0.0, 0.01], atol=1e-12)

    def test_no_psi_for_the_second_mode(self, model):
        assert model.two_mode
        assert model.n_q == 3
        assert model.retained == ()

    def test_lattice_normalizations(self, pair_lattice, coupled_pair):
        for orbit in pair_lattice.orbits:
            biorthogonality, tangency = normalization_defects(coupled_pair, orbit)
            assert biorthogonality <= 1e-6
            assert tangency <= 1e-6

    def test_decoupling_identity(self, model, coupled_pair, pair_lattice):
        """q_dot and f solve both complex equations at lattice samples."""
        rng = np.random.default_rng(5)
        axes = pair_lattice.q_axes
        for _ in range(20):
            q = np.array([rng.choice(axes[0]), rng.choice(axes[1]), rng.choice(axes[2])])
            theta = float(rng.uniform(0.0, 2.0 * np.pi))
            u = np.array([0.05 * rng.standard_normal()])
            state = ReducedState.make(theta, q)
            rates = reduced_rhs_two_mode(model, state, u)
            point = model.point(theta, q)
            x = point.x_gamma
            drive = point.I[:, :-1] @ (coupled_pair.rhs(x, u) - coupled_pair.rhs(x, np.zeros(1)) - point.alpha)
            for position in (0, model.second_position):
                residual = drive[position] + point.I[position, -1] * rates.phase_rate + point.E[position] @ rates.q
                assert abs(residual) < 1e-8

    def test_unforced_second_mode_decays(self, model, pair_lattice):
        """Without input the second-mode amplitudes shrink towards zero."""
        q = np.array([pair_lattice.q_axes[0][1], 0.01, 0.0])
        rates = reduced_rhs_two_mode(model, ReducedState.make(0.0, q), np.zeros(1))
        assert rates.q[1] < 0

    def test_out_of_lattice(self, model):
        with pytest.raises(RangeError):
            model.point(0.0, [0.03, 0.05, 0.0])


@pytest.mark.slow
class TestPendulumBoundaryCrossing:
    """Ramped forcing drives the pendulum out of its family."""

    @pytest.fixture(scope="class")
    def full_family_model(self, pendulum, pendulum_mode, pendulum_x_ss):
        family = build_family(pendulum, pendulum_mode, q0=1e-3, delta_q=0.01, q_max=50.0,
                              x_ss=pendulum_x_ss, options=ContinuationOptions(n_theta=256, delta_q_max=0.05))
        assert family.termination == "family-boundary"
        return ReducedModel.from_family(family, pendulum)

    def test_exit_time_and_fidelity(self, pendulum, full_family_model):
        """u = 0.2 t sin(2 pi t / 12): exit at t = 45 +/- 3, phi within 5% RMS until then."""
        model = full_family_model
        init = ReducedState.make(0.0, 2.0 * model.q_first)
        forcing = ramp_sine(0.2, 12.0)
        reduced = simulate_reduced(model, forcing, init, (0.0, 60.0), 0.05)
        assert reduced.termination == "family-boundary"
        assert 42.0 <= reduced.t[-1] <= 48.0

        x0 = reconstruct_state(model, init)
        full = simulate_full(pendulum, forcing, x0, (0.0, 60.0), 0.05)
        n = reduced.t.size - 1
        phi_full = full.x[:n, 0]
        rms = np.sqrt(np.mean((reduced.x[:n, 0] - phi_full) ** 2))
        assert rms <= 0.05 * (phi_full.max() - phi_full.min())
