"""
Tests for forced periodic orbits and their Floquet data.

Covers:
1. Analytic seeds and detuning admissibility
2. Newton shooting
3. Monodromy multipliers in the small-amplitude limit
4. Floquet eigenfunctions, gradients and their normalizations
5. Period retuning
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from nlmodes.core.errors import ContractViolationError, ParameterError
from nlmodes.family import retune_period
from nlmodes.periodic import (
    admissible_delta_omega,
    analyze_orbit,
    floquet_eigenfunction,
    floquet_gradient,
    monodromy,
    normalization_defects,
    orbit_tangent,
    refine_orbit,
    seed_orbit,
    sensitivity_E,
)

N_THETA = 64


@pytest.fixture(scope="module")
def small_orbit(pendulum, pendulum_mode, pendulum_x_ss):
    """Refined and analyzed pendulum orbit at q = 1e-4."""
    seed = seed_orbit(pendulum_mode, pendulum_x_ss, 1e-4, n_theta=N_THETA)
    refined = refine_orbit(pendulum, seed)
    return analyze_orbit(pendulum, refined, [pendulum_mode])


@pytest.fixture(scope="module")
def moderate_orbit(pendulum_family):
    """A node of the session family well inside the nonlinear range."""
    return pendulum_family.orbits[len(pendulum_family) // 2]


class TestDeltaOmega:
    """Detuning of the seed."""

    def test_default_is_tenth_of_frequency(self):
        assert admissible_delta_omega(2.0, None) == pytest.approx(0.2)

    @pytest.mark.parametrize("value", [0.0, 1.0, 1.5, -0.34])
    def test_rejected(self, value):
        """Zero, |dw| >= frequency and dw <= -frequency/3 are refused."""
        with pytest.raises(ParameterError) as exc_info:
            admissible_delta_omega(1.0, value)
        assert "delta_omega" in str(exc_info.value)

    @pytest.mark.parametrize("value", [-0.3, 0.05, 0.9])
    def test_accepted(self, value):
        assert admissible_delta_omega(1.0, value) == value


class TestSeedOrbit:
    """Small-amplitude linear seed."""

    def test_shapes_and_frequency(self, pendulum_mode, pendulum_x_ss):
        seed = seed_orbit(pendulum_mode, pendulum_x_ss, 1e-3, n_theta=N_THETA)
        assert seed.x_gamma.shape == (N_THETA, 2)
        assert seed.alpha.shape == (N_THETA, 2)
        assert seed.omega == pytest.approx(1.1 * pendulum_mode.frequency)
        assert not seed.analyzed

    def test_zero_amplitude_sits_at_fixed_point(self, pendulum_mode, pendulum_x_ss):
        seed = seed_orbit(pendulum_mode, pendulum_x_ss, 0.0, n_theta=N_THETA)
        np.testing.assert_allclose(seed.x_gamma, 0.0)
        np.testing.assert_allclose(seed.alpha, 0.0)

    def test_negative_amplitude(self, pendulum_mode, pendulum_x_ss):
        with pytest.raises(ParameterError):
            seed_orbit(pendulum_mode, pendulum_x_ss, -1e-3)

    def test_grid_too_small(self, pendulum_mode, pendulum_x_ss):
        with pytest.raises(ParameterError):
            seed_orbit(pendulum_mode, pendulum_x_ss, 1e-3, n_theta=2)

    def test_fixed_point_dimension(self, pendulum_mode):
        with pytest.raises(ContractViolationError):
            seed_orbit(pendulum_mode, np.zeros(3), 1e-3)


class TestRefineOrbit:
    """Newton shooting."""

    def test_linear_regime_barely_moves(self, pendulum, pendulum_mode, pendulum_x_ss):
        """At q = 1e-3 the analytic seed is already periodic to O(q^3)."""
        seed = seed_orbit(pendulum_mode, pendulum_x_ss, 1e-3, n_theta=N_THETA)
        refined = refine_orbit(pendulum, seed)
        assert refined.shooting_residual <= 1e-10 * (1.0 + np.max(np.abs(refined.x_gamma[0])))
        assert np.max(np.abs(refined.x_gamma - seed.x_gamma)) < 1e-6

    def test_refined_orbit_is_a_fixed_point_of_refinement(self, pendulum, moderate_orbit):
        again = refine_orbit(pendulum, moderate_orbit)
        assert np.max(np.abs(again.x_gamma - moderate_orbit.x_gamma)) < 1e-8


class TestMonodromy:
    """Multipliers of the augmented system."""

    def test_small_amplitude_multipliers(self, pendulum, small_orbit, pendulum_mode):
        """At q = 1e-4 the multipliers are exp(lambda_j T) and 1."""
        result = monodromy(pendulum, small_orbit)
        period = small_orbit.period
        expected = [np.exp(pendulum_mode.eigenvalue * period),
                    np.exp(np.conj(pendulum_mode.eigenvalue) * period),
                    1.0]
        for target in expected:
            assert np.min(np.abs(result.multipliers - target)) < 1e-3
        assert abs(result.multipliers[result.phase_index] - 1.0) < 1e-6


class TestAnalyzeOrbit:
    """Floquet exponents, eigenfunctions and gradients."""

    def test_exponent_matches_eigenvalue(self, small_orbit, pendulum_mode):
        """Re kappa = Re lambda and Imag kappa + 2 pi m / T = Imag lambda."""
        kappa = small_orbit.kappa[0]
        branch = small_orbit.branch[0]
        assert kappa.real == pytest.approx(pendulum_mode.eigenvalue.real, abs=1e-4)
        assert kappa.imag + 2.0 * np.pi * branch / small_orbit.period == pytest.approx(
            pendulum_mode.eigenvalue.imag, abs=1e-4)

    def test_shapes(self, small_orbit):
        assert small_orbit.g.shape == (1, N_THETA, 3)
        assert small_orbit.I.shape == (1, N_THETA, 3)
        assert small_orbit.Z.shape == (N_THETA, 3)
        assert small_orbit.E.shape == (1, N_THETA, 1)

    def test_normalizations_small_amplitude(self, pendulum, small_orbit):
        biorthogonality, tangency = normalization_defects(pendulum, small_orbit)
        assert biorthogonality <= 1e-6
        assert tangency <= 1e-6

    def test_normalizations_along_family(self, pendulum, pendulum_family):
        """g_k^T I_j = delta_kj and I_j^T dy/dtheta = 0 at every node."""
        for orbit in pendulum_family.orbits:
            biorthogonality, tangency = normalization_defects(pendulum, orbit)
            assert biorthogonality <= 1e-6, f"q={orbit.q[0]:.4f}"
            assert tangency <= 1e-6, f"q={orbit.q[0]:.4f}"

    def test_eigenfunction_starts_at_mode_vector(self, small_orbit):
        """g(0) is close to v (plus the s component) for small q."""
        g0 = small_orbit.g[0, 0]
        anchor = small_orbit.anchor_indices[0]
        assert g0[anchor].real < 0
        assert abs(g0[anchor].imag) < 1e-10

    def test_phase_gradient_of_forced_orbit(self, small_orbit, moderate_orbit):
        """The phase is omega*s: state block vanishes, last entry is omega."""
        for orbit in (small_orbit, moderate_orbit):
            np.testing.assert_allclose(orbit.Z[:, :-1], 0.0, atol=1e-6)
            np.testing.assert_allclose(orbit.Z[:, -1], orbit.omega, rtol=1e-6)

    def test_construction_direction_gives_unit_sensitivity(self, small_orbit):
        """E_1 = -I_1^T (2 Re g_1) = -1 for the construction direction."""
        np.testing.assert_allclose(small_orbit.E[0, :, 0], -1.0, atol=1e-6)

    def test_standalone_eigenfunction_and_gradient(self, pendulum, small_orbit):
        """Single-mode solves reproduce the analyzed g and I."""
        kappa = small_orbit.kappa[0]
        anchor = small_orbit.anchor_indices[0]
        g = floquet_eigenfunction(pendulum, small_orbit, kappa, anchor_index=anchor)
        grad = floquet_gradient(pendulum, small_orbit, kappa, anchor_index=anchor)
        np.testing.assert_allclose(g, small_orbit.g[0], atol=1e-8)
        np.testing.assert_allclose(grad, small_orbit.I[0], atol=1e-8)
        np.testing.assert_allclose(np.einsum("kn,kn->k", g, grad), 1.0, atol=1e-8)

    def test_sensitivity_contract(self, small_orbit):
        direction = 2.0 * small_orbit.g[0, :, :-1].real
        assert sensitivity_E(small_orbit, direction).shape == (1, N_THETA, 1)
        with pytest.raises(ContractViolationError):
            sensitivity_E(small_orbit, direction[:, :1])

    def test_tangent_shape(self, pendulum, small_orbit):
        tangent = orbit_tangent(pendulum, small_orbit)
        assert tangent.shape == (N_THETA, 3)
        np.testing.assert_allclose(tangent[:, -1], 1.0 / small_orbit.omega)


class TestRetunePeriod:
    """Changing the traversal speed of a refined orbit."""

    def test_zero_is_identity(self, small_orbit):
        assert retune_period(small_orbit, 0.0) is small_orbit

    def test_non_positive_frequency(self, small_orbit):
        with pytest.raises(ParameterError):
            retune_period(small_orbit, -2.0 * small_orbit.omega)

    def test_spatial_curve_unchanged(self, pendulum, moderate_orbit):
        """Re-refining the retuned orbit moves samples by at most 1e-8."""
        retuned = retune_period(moderate_orbit, 0.01 * moderate_orbit.omega)
        assert retuned.retuned
        assert not retuned.analyzed
        refined = refine_orbit(pendulum, retuned)
        assert np.max(np.abs(refined.x_gamma - moderate_orbit.x_gamma)) <= 1e-8

    def test_exponent_shift_is_imaginary(self, pendulum, pendulum_mode, small_orbit):
        """Imag kappa shifts by 2 pi dT / T^2; Re kappa is unchanged."""
        delta_omega = -0.01 * small_orbit.omega
        retuned = refine_orbit(pendulum, retune_period(small_orbit, delta_omega))
        analyzed = analyze_orbit(pendulum, retuned, [pendulum_mode])

        period, new_period = small_orbit.period, analyzed.period
        expected = 2.0 * np.pi * (new_period - period) / period ** 2
        shift = analyzed.kappa[0] - small_orbit.kappa[0]
        assert abs(shift.real) < 1e-4
        assert shift.imag == pytest.approx(expected, rel=0.1)
