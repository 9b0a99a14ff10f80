"""Rates, frequency renormalisation, and the closed-form master equations."""

import numpy as np
import pytest
from dataclasses import replace

from spinboson.bath import BathSpec, noise_power
from spinboson.lindblad import (
    build_rates,
    equilibrium_le,
    lamb_shift,
    propagate_le,
    propagate_ule,
    validate_density_matrix,
)
from spinboson.protocols import extract_frequency

WEAK = BathSpec(s=1.0, kappa_2pi=1e-3, omega_c=50.0, beta=5.0)
STRONG = BathSpec(s=1.0, kappa_2pi=1e-2, omega_c=50.0, beta=5.0)


@pytest.fixture(scope="module")
def weak_rates():
    return build_rates(WEAK)


class TestLambShift:
    def test_weak_values(self):
        assert lamb_shift(1.0, WEAK) == pytest.approx(-1.35e-2, rel=0.03)
        assert lamb_shift(-1.0, WEAK) == pytest.approx(-1.15e-2, rel=0.03)

    def test_strong_values_scale_tenfold(self):
        assert lamb_shift(1.0, STRONG) == pytest.approx(-0.135, rel=0.03)
        assert lamb_shift(-1.0, STRONG) == pytest.approx(-0.115, rel=0.03)

    def test_linear_in_coupling(self):
        doubled = replace(WEAK, kappa_2pi=2e-3)
        assert lamb_shift(1.0, doubled) == pytest.approx(
            2.0 * lamb_shift(1.0, WEAK), rel=1e-10
        )

    def test_subohmic_zero_frequency_rejected(self):
        sub = replace(WEAK, s=0.25)
        with pytest.raises(ValueError):
            lamb_shift(0.0, sub)


class TestRates:
    def test_relaxation_rate(self, weak_rates):
        assert weak_rates.gamma_r == pytest.approx(1.01e-3, rel=0.01)

    def test_omega_tilde_identity(self, weak_rates):
        assert weak_rates.omega_tilde == pytest.approx(
            1.0 + weak_rates.lambda_plus - weak_rates.lambda_minus, abs=1e-15
        )

    def test_am_gm_bound(self, weak_rates):
        assert 0.0 <= weak_rates.delta <= 0.5 * weak_rates.gamma_r

    def test_high_temperature_limit(self):
        hot = replace(WEAK, beta=1e-6)
        rates = build_rates(hot, with_lamb_shift=False)
        assert rates.delta == pytest.approx(0.5 * rates.gamma_r, rel=1e-6)

    def test_low_temperature_limit(self):
        cold = replace(WEAK, beta=200.0)
        rates = build_rates(cold, with_lamb_shift=False)
        assert rates.delta < 1e-30
        assert noise_power(-1.0, cold) < 1e-80

    def test_lamb_shift_exponent_pinning(self):
        sub = replace(WEAK, s=0.25)
        pinned = build_rates(sub)  # Ohmic-based shift by default
        own = build_rates(WEAK)
        assert pinned.lambda_plus == pytest.approx(own.lambda_plus, rel=1e-9)
        assert pinned.gamma_r == pytest.approx(own.gamma_r, rel=1e-12)


EXCITED = np.array([[0, 0], [0, 1]], dtype=complex)
PLUS_X = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)


class TestPropagateLE:
    def test_boltzmann_limit(self, weak_rates):
        t = np.linspace(0.0, 2e4, 201)
        traj = propagate_le(EXCITED, weak_rates, t)
        assert traj.channel("rho11")[-1] == pytest.approx(
            1.0 / (1.0 + np.exp(5.0)), abs=2e-8
        )

    def test_coherence_decays_at_half_rate(self, weak_rates):
        t = np.linspace(0.0, 1000.0, 2001)
        traj = propagate_le(PLUS_X, weak_rates, t)
        amp = np.hypot(traj.channel("re_rho01"), traj.channel("im_rho01"))
        rate = -np.polyfit(t, np.log(amp), 1)[0]
        assert rate == pytest.approx(0.5 * weak_rates.gamma_r, rel=1e-10)

    def test_fixed_point_is_stationary(self, weak_rates):
        eq = equilibrium_le(WEAK)
        traj = propagate_le(eq, weak_rates, np.linspace(0.0, 100.0, 11))
        assert np.max(np.abs(traj.channel("rho11") - eq[1, 1].real)) <= 1e-12
        assert np.max(np.abs(traj.channel("re_rho01"))) <= 1e-12

    def test_invariants_along_trajectory(self, weak_rates):
        t = np.linspace(0.0, 500.0, 501)
        traj = propagate_le(PLUS_X, weak_rates, t)
        trace = traj.channel("rho00") + traj.channel("rho11")
        assert np.max(np.abs(trace - 1.0)) <= 1e-10
        herm = np.max(np.abs(traj.channel("re_rho01") - traj.channel("re_rho10"))) \
            + np.max(np.abs(traj.channel("im_rho01") + traj.channel("im_rho10")))
        assert herm <= 1e-12
        # positivity: smallest eigenvalue of a 2x2 unit-trace Hermitian matrix
        diff = traj.channel("rho00") - traj.channel("rho11")
        coh2 = traj.channel("re_rho01") ** 2 + traj.channel("im_rho01") ** 2
        eig_min = 0.5 * (1.0 - np.sqrt(diff**2 + 4.0 * coh2))
        assert eig_min.min() >= -1e-10


class TestPropagateULE:
    def test_populations_match_rwa_exactly(self, weak_rates):
        t = np.linspace(0.0, 2000.0, 401)
        le = propagate_le(EXCITED, weak_rates, t)
        ule = propagate_ule(EXCITED, weak_rates, t)
        np.testing.assert_array_equal(le.channel("rho11"), ule.channel("rho11"))

    def test_zero_coupling_reduces_to_rwa(self, weak_rates):
        t = np.linspace(0.0, 300.0, 3001)
        decoupled = replace(weak_rates, delta=0.0)
        le = propagate_le(PLUS_X, weak_rates, t)
        ule = propagate_ule(PLUS_X, decoupled, t)
        assert np.max(np.abs(le.channel("re_rho01")
                             - ule.channel("re_rho01"))) <= 1e-14

    def test_precession_frequency(self, weak_rates):
        t = np.arange(0.0, 400.0, 0.02)
        traj = propagate_ule(PLUS_X, weak_rates, t)
        est = extract_frequency(traj, "re_rho01", window=(1.0, 399.0))
        expected = np.sqrt(weak_rates.omega_tilde**2 - weak_rates.delta**2)
        assert est.zero_crossing == pytest.approx(expected, rel=1e-6)

    def test_hermiticity_preserved(self, weak_rates):
        rho_y = 0.5 * np.array([[1, 1j], [-1j, 1]], dtype=complex)
        t = np.linspace(0.0, 200.0, 2001)
        traj = propagate_ule(rho_y, weak_rates, t)
        herm = np.max(np.abs(traj.channel("re_rho01") - traj.channel("re_rho10"))) \
            + np.max(np.abs(traj.channel("im_rho01") + traj.channel("im_rho10")))
        assert herm <= 1e-12


class TestEquilibrium:
    def test_value(self):
        eq = equilibrium_le(WEAK)
        assert eq[1, 1].real == pytest.approx(6.6929e-3, abs=1e-7)
        assert eq.trace() == 1.0
        assert eq[0, 1] == 0.0

    def test_infinite_temperature(self):
        hot = replace(WEAK, beta=1e-12)
        assert equilibrium_le(hot)[1, 1].real == pytest.approx(0.5, abs=1e-12)


class TestDensityMatrixValidation:
    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            validate_density_matrix(np.array([[1, 0.1], [0.2, 0]], dtype=complex))

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError):
            validate_density_matrix(np.diag([0.6, 0.6]).astype(complex))

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            validate_density_matrix(np.diag([1.2, -0.2]).astype(complex))

    def test_accepts_valid(self):
        validate_density_matrix(PLUS_X)
