"""Tests for the spin-bath decoherence model."""

import math

import numpy as np
import pytest

from montevideo_sim.clocks import GaussianClock, IdealClock, NgVanDamClock
from montevideo_sim.errors import CapacityError, DomainError, StructuralError
from montevideo_sim.hilbert import evolve_state
from montevideo_sim.zurek import (
    CouplingProfile,
    SpinBathConfig,
    brute_force_reduced_density,
    clock_averaged_coherence,
    clock_corrected_coherence,
    coherence_trace,
    coherence_z,
    coupling_profile,
    evolved_state,
    initial_state,
    interaction_hamiltonian,
    max_revival_step,
    reduced_density,
    revival_search,
    revival_statistics,
    windowed_suprema,
)

pytestmark = pytest.mark.unit

COMMENSURATE = SpinBathConfig.balanced([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
INCOMMENSURATE = SpinBathConfig.balanced(
    np.sqrt([2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0])
)


class TestSpinBathConfig:
    """Construction and seeded generation of bath configurations."""

    def test_normalization_error(self):
        with pytest.raises(StructuralError, match="normalization violated"):
            SpinBathConfig([1.0], 1.0, 0.5, [1.0], [0.0])

    def test_bath_normalization_error_names_spin(self):
        with pytest.raises(StructuralError, match="alpha_1"):
            SpinBathConfig([1.0, 1.0], 1.0, 0.0, [1.0, 0.9], [0.0, 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(StructuralError):
            SpinBathConfig([1.0, 2.0], 1.0, 0.0, [1.0], [0.0])

    def test_random_is_reproducible(self):
        first = SpinBathConfig.random(5, seed=11)
        second = SpinBathConfig.random(5, seed=11)
        np.testing.assert_array_equal(first.couplings, second.couplings)
        np.testing.assert_array_equal(first.alpha, second.alpha)
        assert first.b == second.b
        assert first.seed == 11

    def test_random_couplings_in_range(self):
        cfg = SpinBathConfig.random(50, seed=3, g_min=0.2, g_max=0.4)
        assert np.all((cfg.couplings >= 0.2) & (cfg.couplings <= 0.4))

    def test_coupling_profiles(self):
        np.testing.assert_array_equal(coupling_profile(3, "constant", g0=0.5), [0.5, 0.5, 0.5])
        np.testing.assert_array_equal(coupling_profile(3, CouplingProfile.LINEAR), [1.0, 2.0, 3.0])
        with pytest.raises(DomainError):
            coupling_profile(3, "uniform")

    def test_balanced_polarization(self):
        np.testing.assert_allclose(COMMENSURATE.polarization, np.zeros(6), atol=1e-15)


class TestCoherence:
    """Product formula, evolved state and the dense oracle."""

    def test_initial_value(self, rng):
        cfg = SpinBathConfig.random(4, seed=int(rng.integers(1000)))
        assert coherence_z(cfg, 0.0) == pytest.approx(1.0)

    def test_commensurate_full_revival(self):
        assert abs(coherence_z(COMMENSURATE, math.pi / 2)) == pytest.approx(1.0, abs=1e-9)
        assert abs(coherence_z(COMMENSURATE, math.pi)) == pytest.approx(1.0, abs=1e-9)

    def test_trace_matches_pointwise(self):
        cfg = SpinBathConfig.random(6, seed=5)
        times = np.linspace(0.0, 3.0, 13)
        trace = coherence_trace(cfg, times)
        for t, z in zip(times, trace.z_values):
            assert z == pytest.approx(coherence_z(cfg, t), abs=1e-14)
        assert np.all(trace.magnitudes <= 1.0 + 1e-12)

    def test_reduced_density_is_a_density_matrix(self):
        cfg = SpinBathConfig.random(3, seed=9)
        rho = reduced_density(cfg, 0.8)
        assert rho.entries[0, 0].real == pytest.approx(abs(cfg.a) ** 2)

    @pytest.mark.parametrize("seed", range(5))
    def test_product_formula_matches_brute_force(self, seed):
        cfg = SpinBathConfig.random(2 + seed, seed=seed)
        for t in (0.0, 0.37, 1.9, 12.5):
            np.testing.assert_allclose(
                reduced_density(cfg, t).entries,
                brute_force_reduced_density(cfg, t).entries,
                atol=1e-10,
            )

    @pytest.mark.slow
    def test_product_formula_matches_brute_force_exhaustive(self):
        rng = np.random.default_rng(77)
        for seed in range(50):
            cfg = SpinBathConfig.random(int(rng.integers(1, 11)), seed=seed)
            for t in rng.uniform(0.0, 20.0, size=20):
                np.testing.assert_allclose(
                    reduced_density(cfg, t).entries,
                    brute_force_reduced_density(cfg, t).entries,
                    atol=1e-10,
                )

    def test_evolved_state_reduces_to_product_formula(self):
        cfg = SpinBathConfig.random(4, seed=21)
        psi = evolved_state(cfg, 0.9)
        up, down = psi.amplitudes[:16], psi.amplitudes[16:]
        off_diagonal = np.vdot(down, up)
        assert off_diagonal == pytest.approx(reduced_density(cfg, 0.9).entries[0, 1], abs=1e-12)

    def test_evolved_state_at_zero(self):
        cfg = SpinBathConfig.random(3, seed=4)
        np.testing.assert_allclose(
            evolved_state(cfg, 0.0).amplitudes, initial_state(cfg).amplitudes, atol=1e-14
        )

    def test_two_equal_couplings(self):
        cfg = SpinBathConfig.balanced([0.7, 0.7])
        for t in (0.0, 0.3, 1.1, 4.25):
            assert coherence_z(cfg, t) == pytest.approx(math.cos(1.4 * t) ** 2, abs=1e-14)

    def test_incommensurate_bath_is_consistent(self):
        times = np.linspace(0.0, 40.0, 9)
        trace = coherence_trace(INCOMMENSURATE, times)
        for t, z in zip(times, trace.z_values):
            assert z == pytest.approx(coherence_z(INCOMMENSURATE, t), abs=1e-14)
            np.testing.assert_allclose(
                reduced_density(INCOMMENSURATE, t).entries,
                brute_force_reduced_density(INCOMMENSURATE, t).entries,
                atol=1e-10,
            )

    def test_eight_spin_bath_matches_brute_force(self):
        cfg = SpinBathConfig.random(8, seed=13)
        np.testing.assert_allclose(
            reduced_density(cfg, 1.3).entries,
            brute_force_reduced_density(cfg, 1.3).entries,
            atol=1e-10,
        )

    def test_reduced_density_eigenvalues(self, rng):
        for seed in range(6):
            cfg = SpinBathConfig.random(5, seed=seed)
            for t in rng.uniform(0.0, 10.0, size=4):
                eigenvalues = np.linalg.eigvalsh(reduced_density(cfg, t).entries)
                assert np.all(eigenvalues >= -1e-12)
                assert np.all(eigenvalues <= 1.0 + 1e-12)
                assert eigenvalues.sum() == pytest.approx(1.0, abs=1e-12)

    def test_evolved_state_matches_dense_evolution(self):
        cfg = SpinBathConfig.random(4, seed=31)
        H = interaction_hamiltonian(cfg)
        for t in (0.4, 2.7):
            dense = evolve_state(H, initial_state(cfg), t)
            np.testing.assert_allclose(
                evolved_state(cfg, t).amplitudes, dense.amplitudes, atol=1e-12
            )

    def test_state_capacity(self):
        with pytest.raises(CapacityError):
            initial_state(SpinBathConfig.balanced([1.0] * 23))


class TestRevivals:
    """Revival search and statistics."""

    def test_commensurate_revivals(self):
        revivals = revival_search(COMMENSURATE, 4.0, max_revival_step(COMMENSURATE))
        assert [r.time for r in revivals] == pytest.approx([math.pi / 2, math.pi], abs=1e-5)
        assert all(r.magnitude == pytest.approx(1.0, abs=1e-9) for r in revivals)

    def test_statistics(self):
        revivals = revival_search(COMMENSURATE, 4.0, max_revival_step(COMMENSURATE))
        stats = revival_statistics(revivals)
        assert stats.count == 2
        assert stats.mean_spacing == pytest.approx(math.pi / 2, abs=1e-5)
        assert stats.highest in revivals

    def test_single_spin_revivals(self):
        g = 1.3
        cfg = SpinBathConfig.balanced([g])
        revivals = revival_search(cfg, 5.0, max_revival_step(cfg))
        expected = [m * math.pi / (2.0 * g) for m in range(1, 5)]
        assert [r.time for r in revivals] == pytest.approx(expected, abs=1e-7)
        assert all(r.magnitude == pytest.approx(1.0, abs=1e-12) for r in revivals)

    def test_no_revivals(self):
        stats = revival_statistics([])
        assert (stats.count, stats.mean_spacing, stats.highest) == (0, None, None)

    def test_coarse_resolution_is_rejected(self):
        with pytest.raises(DomainError, match="resolution"):
            revival_search(COMMENSURATE, 4.0, 0.5)


class TestRealClockCoherence:
    """Coherence of the central spin read with a realistic clock."""

    def test_ideal_clock_matches_product_formula(self):
        cfg = SpinBathConfig.random(5, seed=2)
        for T in (0.3, 2.2):
            corrected = clock_corrected_coherence(cfg, IdealClock(), T)
            assert corrected == pytest.approx(coherence_z(cfg, T), abs=1e-12)
            assert clock_averaged_coherence(cfg, IdealClock(), T) == coherence_z(cfg, T)

    def test_gaussian_average_matches_damped_sum(self):
        cfg = SpinBathConfig.random(4, seed=8, couplings="linear", g0=0.5)
        clock = GaussianClock(0.1)
        for T in (0.7, 1.7):
            averaged = clock_averaged_coherence(cfg, clock, T)
            corrected = clock_corrected_coherence(cfg, clock, T)
            assert averaged == pytest.approx(corrected, abs=1e-8)

    def test_real_clock_suppresses_revivals(self):
        clock = NgVanDamClock(planck_time=0.05)
        centers = [n * math.pi / 2 for n in range(1, 6)]
        suprema = windowed_suprema(COMMENSURATE, clock, centers, math.pi / 8)
        assert np.all(np.diff(suprema) < 0)
        assert suprema[0] < 1.0

    def test_gaussian_clock_single_spin(self):
        g, s = 0.8, 0.3
        cfg = SpinBathConfig.balanced([g])
        clock = GaussianClock(s)
        for T in (0.5, 1.9):
            expected = math.cos(2.0 * g * T) * math.exp(-2.0 * g**2 * s**2)
            assert clock_corrected_coherence(cfg, clock, T) == pytest.approx(expected, abs=1e-14)
            assert clock_averaged_coherence(cfg, clock, T) == pytest.approx(expected, abs=1e-9)
