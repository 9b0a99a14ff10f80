"""Spectral functions, detailed balance, and the correlation oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from spinboson.bath import (
    BathSpec,
    correlation_quadrature,
    jump_correlator_power,
    noise_power,
    relaxation_rate,
    spectral_density,
)

WEAK = dict(kappa_2pi=1e-3, omega_c=50.0, beta=5.0)


def spec_for(s):
    return BathSpec(s=s, **WEAK)


class TestSpectralDensity:
    def test_zero_frequency(self):
        for s in (0.25, 1.0, 2.0):
            assert spectral_density(0.0, spec_for(s)) == 0.0

    @pytest.mark.parametrize("omega", [0.5, 1.0, 10.0])
    @pytest.mark.parametrize("s", [0.25, 1.0])
    def test_odd(self, omega, s):
        spec = spec_for(s)
        assert spectral_density(-omega, spec) == -spectral_density(omega, spec)

    @given(st.floats(min_value=1e-6, max_value=1e4))
    @settings(max_examples=60, deadline=None)
    def test_odd_property(self, omega):
        spec = spec_for(0.25)
        assert spectral_density(-omega, spec) == -spectral_density(omega, spec)

    def test_weak_ohmic_value_at_qubit_frequency(self):
        # stated cutoff suppression at omega = 1 is 0.99920 of kappa
        spec = spec_for(1.0)
        ratio = spectral_density(1.0, spec) / spec.kappa
        assert ratio == pytest.approx(0.99920, abs=5e-6)

    def test_validation(self):
        with pytest.raises(ValueError):
            BathSpec(s=-1.0, **WEAK)
        with pytest.raises(ValueError):
            BathSpec(s=1.0, kappa_2pi=0.0, omega_c=50.0, beta=5.0)
        with pytest.raises(ValueError):
            BathSpec(s=1.0, kappa_2pi=1e-3, omega_c=50.0, beta=-2.0)


class TestNoisePower:
    @pytest.mark.parametrize("omega", [0.5, 1.0, 2.0])
    def test_detailed_balance(self, omega):
        spec = spec_for(1.0)
        lhs = noise_power(-omega, spec)
        rhs = np.exp(-spec.beta * omega) * noise_power(omega, spec)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    @given(st.floats(min_value=-40.0, max_value=40.0).filter(lambda w: abs(w) > 1e-8),
           st.sampled_from([0.25, 1.0]))
    @settings(max_examples=80, deadline=None)
    def test_detailed_balance_property(self, omega, s):
        spec = spec_for(s)
        lhs = noise_power(-omega, spec)
        rhs = np.exp(-spec.beta * omega) * noise_power(omega, spec)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)

    def test_positive(self):
        spec = spec_for(0.25)
        w = np.array([-20.0, -1.0, -1e-4, 1e-4, 1.0, 20.0])
        assert np.all(noise_power(w, spec) > 0)

    def test_ohmic_zero_frequency_limit(self):
        spec = spec_for(1.0)
        assert noise_power(0.0, spec) == pytest.approx(spec.kappa / spec.beta,
                                                       rel=1e-12)
        # continuity with the limit
        assert noise_power(1e-8, spec) == pytest.approx(spec.kappa / spec.beta,
                                                        rel=1e-6)

    def test_superohmic_zero_frequency(self):
        assert noise_power(0.0, spec_for(1.5)) == 0.0

    def test_subohmic_zero_frequency_raises(self):
        with pytest.raises(ValueError):
            noise_power(0.0, spec_for(0.25))

    def test_relaxation_rate_matches_printed_value(self):
        # gamma_r / omega_q = 1.01e-3 for the weak scenario
        got = relaxation_rate(spec_for(1.0))
        assert got == pytest.approx(1.01e-3, rel=0.01)

    def test_relaxation_rate_closed_form(self):
        spec = spec_for(1.0)
        analytic = (
            spec.kappa_2pi
            / np.tanh(spec.beta / 2.0)
            / (1.0 + spec.omega_c**-2) ** 2
        )
        assert relaxation_rate(spec) == pytest.approx(analytic, rel=1e-12)

    def test_relaxation_rate_independent_of_exponent(self):
        assert relaxation_rate(spec_for(1.0)) == pytest.approx(
            relaxation_rate(spec_for(0.25)), rel=1e-12
        )


class TestJumpCorrelator:
    @pytest.mark.parametrize("omega", [-2.0, -1.0, 0.5, 1.0, 10.0])
    def test_defining_relation(self, omega):
        spec = spec_for(1.0)
        g = jump_correlator_power(omega, spec)
        assert g >= 0
        assert 2.0 * np.pi * g**2 == pytest.approx(noise_power(omega, spec),
                                                   rel=1e-12)

    def test_coherence_coupling_cross_check(self):
        # sqrt(2*pi*S) = 2*pi*g, so the coherence coupling
        # 2*pi*sqrt(S(+1)*S(-1)) equals (2*pi)^2 * g(+1) * g(-1)
        spec = spec_for(1.0)
        lhs = (2.0 * np.pi) ** 2 * jump_correlator_power(1.0, spec) \
            * jump_correlator_power(-1.0, spec)
        rhs = 2.0 * np.pi * np.sqrt(noise_power(1.0, spec)
                                    * noise_power(-1.0, spec))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def onesided_oracle(t, spec, upper=2500.0):
    """Independent evaluation of the correlation integral in its
    one-sided coth/sin form."""
    def re_part(w):
        return (spectral_density(w, spec) / np.tanh(0.5 * spec.beta * w)
                * np.cos(w * t))

    def im_part(w):
        return spectral_density(w, spec) * np.sin(w * t)

    re, _ = integrate.quad(re_part, 0.0, upper, limit=4000, epsabs=1e-14,
                           epsrel=1e-13)
    im, _ = integrate.quad(im_part, 0.0, upper, limit=4000, epsabs=1e-14,
                           epsrel=1e-13)
    return re - 1j * im


class TestCorrelationQuadrature:
    def test_zero_time_real_positive(self):
        c0 = correlation_quadrature(0.0, spec_for(1.0), tol=1e-9)
        assert c0.imag == 0.0
        assert c0.real > 0.0

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_against_onesided_oracle(self, t):
        spec = spec_for(1.0)
        scale = abs(correlation_quadrature(0.0, spec, tol=1e-9))
        ours = correlation_quadrature(t, spec, tol=1e-9 * max(scale, 1.0))
        ref = onesided_oracle(t, spec)
        assert abs(ours - ref) <= 1e-8 * scale

    def test_subohmic_against_onesided_oracle(self):
        spec = spec_for(0.25)
        scale = abs(correlation_quadrature(0.0, spec, tol=1e-9))
        for t in (0.1, 1.0):
            ours = correlation_quadrature(t, spec, tol=1e-9)
            ref = onesided_oracle(t, spec)
            assert abs(ours - ref) <= 1e-7 * scale

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            correlation_quadrature(-1.0, spec_for(1.0))
