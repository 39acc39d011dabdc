"""Tests for the undecidability criterion."""

import math
from dataclasses import replace

import numpy as np
import pytest

from montevideo_sim.chamber import ChamberConfig
from montevideo_sim.errors import DomainError, NumericalError
from montevideo_sim.undecidability import (
    LogMagnitude,
    UndecidabilityInput,
    angular_bound,
    crossover,
    damping_exponent_K,
    log_kappa,
    log_noise,
    noise_floor,
    planck_units,
    report,
    threshold_N,
    to_natural_units,
    verdict_ladder,
)

pytestmark = pytest.mark.unit

S = 1.0 / math.sqrt(2.0)


def chamber(N: int = 4, **overrides) -> ChamberConfig:
    values = dict(
        N=N,
        B=2.0,
        gamma1=1.5,
        gamma2=0.5,
        couplings=np.full(N, 0.05),
        tau=0.8,
        T_total=0.8,
        m_env=1.0,
        d=1.0,
        mu=1.0,
        a=S,
        b=S,
        alpha=np.full(N, S),
        beta=np.full(N, S),
        T_P=0.1,
    )
    values.update(overrides)
    return ChamberConfig(**values)


class TestNoiseFloor:
    """Angular resolution bound and the noise floor in log space."""

    def test_delta_theta_is_exact(self):
        inp = UndecidabilityInput(chamber(), l_P=1e-35, R=1e27)
        assert angular_bound(inp) == 1e-62

    def test_requires_R_above_planck_length(self):
        with pytest.raises(DomainError):
            UndecidabilityInput(chamber(), l_P=1.0, R=1.0)
        with pytest.raises(DomainError):
            UndecidabilityInput(chamber(), l_P=0.0, R=1.0)

    def test_noise_floor_does_not_underflow(self):
        inp = UndecidabilityInput(chamber(), l_P=1e-35, R=1.0)
        floor = noise_floor(inp, 10**6)
        assert floor.value == 0.0
        assert floor.ln == pytest.approx(2e6 * math.log(1e-35), rel=1e-12)
        assert floor.log10 == pytest.approx(-7e7, rel=1e-12)

    def test_error_term_is_added(self):
        assert log_noise(math.log(0.1), 1, math.log(0.01)) == pytest.approx(math.log(0.02))
        assert log_noise(math.log(0.1), 1) == pytest.approx(math.log(0.01))

    def test_N_must_be_positive(self):
        inp = UndecidabilityInput(chamber(), l_P=1.0, R=10.0)
        with pytest.raises(DomainError):
            noise_floor(inp, 0)

    def test_log_magnitude_ordering(self):
        assert LogMagnitude(-5.0) < LogMagnitude(-1.0)
        assert LogMagnitude(0.0).value == 1.0


class TestCrossover:
    """First integer where the signal drops below the noise."""

    def test_quintic_against_linear(self):
        result = crossover(lambda n: -(n**5), lambda n: -285.0 * n)
        assert result.first_integer == 5
        assert result.root == pytest.approx(285.0**0.25, rel=1e-12)

    def test_already_below_at_one(self):
        result = crossover(lambda n: -10.0 * n, lambda n: -1.0)
        assert result.first_integer == 1
        assert result.root is None

    def test_no_crossover(self):
        with pytest.raises(NumericalError):
            crossover(lambda n: 0.0, lambda n: -1.0, n_max=1024)


class TestThreshold:
    """Threshold environment size from the strong damping bound."""

    def setup_method(self):
        self.inp = UndecidabilityInput(chamber(), l_P=1.0, R=1e6)

    def test_kappa(self):
        expected = (4.0 / 3.0) * math.log(0.1) - (8.0 / 3.0) * math.log(0.75)
        assert log_kappa(self.inp.chamber) == pytest.approx(expected, rel=1e-12)

    def test_derived_solves_balance(self):
        estimate = threshold_N(self.inp)
        balance = estimate.kappa * estimate.derived**4
        assert balance == pytest.approx(2.0 * math.log(1e6), rel=1e-9)
        assert estimate.estimate

    def test_crossover_matches_derived(self):
        estimate = threshold_N(self.inp)
        assert estimate.crossover.root == pytest.approx(estimate.derived, rel=1e-8)
        assert estimate.crossover.first_integer == math.floor(estimate.derived) + 1

    def test_literal_is_positive(self):
        assert threshold_N(self.inp).literal > 0

    def test_needs_planck_time(self):
        inp = UndecidabilityInput(chamber(T_P=0.0), l_P=1.0, R=1e6)
        with pytest.raises(DomainError):
            threshold_N(inp)
        assert report(inp).threshold is None


class TestVerdict:
    """Reports and ladders."""

    def test_report_fields(self):
        inp = UndecidabilityInput(chamber(), l_P=1.0, R=10.0)
        result = report(inp)
        assert result.K == pytest.approx(damping_exponent_K(inp.chamber))
        assert result.signal.ln == -result.K
        assert result.noise_floor.ln == pytest.approx(8.0 * math.log(0.1))
        assert result.undecidable == (result.signal.ln < result.noise_floor.ln)
        assert result.N == 4

    def test_strong_damping_is_undecidable(self):
        inp = UndecidabilityInput(chamber(B=100.0, T_P=0.5), l_P=1.0, R=10.0)
        assert report(inp).undecidable

    def test_no_damping_is_decidable(self):
        inp = UndecidabilityInput(chamber(T_P=0.0), l_P=1.0, R=10.0)
        result = report(inp)
        assert result.K == 0.0
        assert not result.undecidable

    def test_explicit_ladder_is_linear_in_N(self):
        inp = UndecidabilityInput(chamber(), l_P=1.0, R=10.0)
        rows = verdict_ladder(inp, [1, 2, 8], k_model="explicit")
        per_spin = damping_exponent_K(inp.chamber) / 4
        assert [row.N for row in rows] == [1, 2, 8]
        for row in rows:
            assert row.log_signal == pytest.approx(-per_spin * row.N)
            assert row.log_noise == pytest.approx(2.0 * row.N * math.log(0.1))

    def test_strong_bound_ladder_turns_undecidable(self):
        inp = UndecidabilityInput(chamber(), l_P=1.0, R=1e6)
        rows = verdict_ladder(inp, range(1, 9))
        verdicts = [row.undecidable for row in rows]
        first = threshold_N(inp).crossover.first_integer
        assert verdicts == [n >= first for n in range(1, 9)]

    def test_damping_exponent_value(self):
        cfg = chamber(N=1, B=1.0, gamma1=1.5, gamma2=0.5, T_P=0.1, tau=1.0)
        K = damping_exponent_K(cfg)
        assert K == pytest.approx(6.0 * 0.1 ** (4.0 / 3.0), rel=1e-12)
        assert K == pytest.approx(0.2785, abs=1e-4)

    def test_equal_gyromagnetic_ratios_do_not_damp(self):
        cfg = chamber(gamma1=0.8, gamma2=0.8)
        assert damping_exponent_K(cfg) == 0.0
        assert not report(UndecidabilityInput(cfg, l_P=1.0, R=10.0)).undecidable

    def test_moderate_damping_stays_above_planck_noise(self):
        cfg = chamber(N=1, B=math.sqrt(50.0 / 6.0), T_P=1.0, tau=1.0)
        result = report(UndecidabilityInput(cfg, l_P=1e-35, R=1e27))
        assert result.K == pytest.approx(50.0, rel=1e-12)
        assert result.delta_theta == 1e-62
        assert result.noise_floor.ln == pytest.approx(2.0 * math.log(1e-62), rel=1e-12)
        assert not result.undecidable

    def test_unknown_k_model(self):
        inp = UndecidabilityInput(chamber(), l_P=1.0, R=10.0)
        with pytest.raises(DomainError):
            verdict_ladder(inp, [1], k_model="weak")


class TestUnits:
    """Unit conventions and rescaling."""

    def test_planck_units(self):
        units = planck_units()
        assert units["l_P"] == pytest.approx(1.616255e-35, rel=1e-4)
        assert units["T_P"] == pytest.approx(5.391247e-44, rel=1e-4)

    def test_time_rescaling_leaves_verdict_unchanged(self):
        base = chamber()
        s = 1e3
        scaled = replace(
            base, B=base.B / s, T_P=base.T_P * s, tau=base.tau * s, T_total=base.T_total * s
        )
        assert damping_exponent_K(scaled) == pytest.approx(damping_exponent_K(base), rel=1e-9)

    def test_joint_rescaling_of_threshold(self):
        # times scale by s, lengths by lam; gamma1 and gamma2 are held fixed
        s, lam = 1e3, 1e-2
        base = chamber()
        scaled = replace(
            base,
            B=base.B / s,
            couplings=base.couplings / s,
            T_P=base.T_P * s,
            tau=base.tau * s,
            T_total=base.T_total * s,
            m_env=base.m_env * s / lam**2,
            mu=base.mu * lam**3 / s,
            d=base.d * lam,
        )
        before = threshold_N(UndecidabilityInput(base, l_P=1.0, R=1e6))
        after = threshold_N(UndecidabilityInput(scaled, l_P=lam, R=1e6 * lam))
        assert after.kappa == pytest.approx(before.kappa, rel=1e-9)
        assert after.derived == pytest.approx(before.derived, rel=1e-9)
        assert after.crossover.root == pytest.approx(before.crossover.root, rel=1e-9)
        assert after.crossover.first_integer == before.crossover.first_integer
        # the closed expression carries a residual s^(1/6) lam^(-1/3)
        ratio = after.literal / before.literal
        assert ratio == pytest.approx(s ** (1.0 / 6.0) * lam ** (-1.0 / 3.0), rel=1e-9)

    def test_literal_threshold_is_invariant_when_times_scale_as_lengths_squared(self):
        lam = 1e-3
        s = lam**2
        base = chamber()
        scaled = replace(
            base,
            B=base.B / s,
            T_P=base.T_P * s,
            tau=base.tau * s,
            T_total=base.T_total * s,
            m_env=base.m_env * s / lam**2,
            mu=base.mu * lam**3 / s,
            d=base.d * lam,
        )
        before = threshold_N(UndecidabilityInput(base, l_P=1.0, R=1e6))
        after = threshold_N(UndecidabilityInput(scaled, l_P=lam, R=1e6 * lam))
        assert after.literal == pytest.approx(before.literal, rel=1e-9)
        assert after.derived == pytest.approx(before.derived, rel=1e-9)

    def test_length_rescaling_leaves_noise_unchanged(self):
        first = UndecidabilityInput(chamber(), l_P=1.6e-35, R=2.0)
        second = UndecidabilityInput(chamber(), l_P=1.6e-32, R=2.0e3)
        assert first.log_delta_theta == pytest.approx(second.log_delta_theta, rel=1e-9)
        assert report(first).undecidable == report(second).undecidable

    def test_natural_units_conversion(self):
        si = chamber(hbar=2.0, gamma1=3.0, gamma2=1.0, mu=0.5, m_env=4.0)
        natural = to_natural_units(si)
        assert natural.hbar == 1.0
        assert (natural.gamma1, natural.gamma2) == (1.5, 0.5)
        assert (natural.mu, natural.m_env) == (1.0, 2.0)
        assert natural.B == si.B and natural.tau == si.tau
