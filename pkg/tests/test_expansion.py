"""Exponential decomposition: certification, stability, serialization."""

import numpy as np
import pytest

from spinboson.bath import BathSpec, correlation_quadrature
from spinboson.errors import ExpansionFitError
from spinboson.expansion import CorrelationExpansion, fit_expansion, load_expansion

WEAK = dict(kappa_2pi=1e-3, omega_c=50.0, beta=5.0)


class TestPaperFits:
    def test_ohmic_k15_certifies(self, weak_ohmic_expansion):
        exp = weak_ohmic_expansion
        assert exp.K == 15
        assert exp.fit_error <= 1e-4
        assert exp.t_window[1] >= 1e4

    def test_subohmic_k30(self, weak_subohmic_expansion):
        exp = weak_subohmic_expansion
        assert exp.K == 30
        assert exp.fit_error <= 5e-4

    def test_rates_strictly_decaying(self, weak_ohmic_expansion,
                                     weak_subohmic_expansion):
        for exp in (weak_ohmic_expansion, weak_subohmic_expansion):
            assert np.all(exp.z.real > 0)

    def test_reconstruction_at_zero(self, weak_ohmic_expansion):
        exp = weak_ohmic_expansion
        spec = exp.spec()
        c0 = correlation_quadrature(0.0, spec, tol=1e-9)
        assert abs(exp.reconstruct(0.0) - c0) <= exp.fit_error * abs(c0)

    def test_certification_grid_spot_check(self, weak_ohmic_expansion):
        exp = weak_ohmic_expansion
        spec = exp.spec()
        c0 = abs(correlation_quadrature(0.0, spec, tol=1e-9))
        for t in (1e-3, 0.03, 0.7, 12.0):
            ref = correlation_quadrature(t, spec, tol=1e-9)
            assert abs(exp.reconstruct(t) - ref) <= 1.2 * exp.fit_error * c0

    def test_implied_noise_power_pinned(self, weak_ohmic_expansion):
        from spinboson.bath import noise_power

        exp = weak_ohmic_expansion
        spec = exp.spec()
        for w in (1.0, -1.0):
            assert exp.implied_noise_power(np.array([w]))[0] == pytest.approx(
                noise_power(w, spec), rel=1e-6
            )


class TestFitMachinery:
    def test_deterministic(self):
        spec = BathSpec(s=1.0, **WEAK)
        kw = dict(K=4, t_window=(0.0, 10.0), n_cert=60, max_support=22)
        a = fit_expansion(spec, **kw)
        b = fit_expansion(spec, **kw)
        np.testing.assert_array_equal(a.d, b.d)
        np.testing.assert_array_equal(a.z, b.z)
        assert a.fit_error == b.fit_error

    def test_requested_k_is_reported(self):
        spec = BathSpec(s=1.0, **WEAK)
        exp = fit_expansion(spec, K=4, t_window=(0.0, 10.0), n_cert=60,
                            max_support=22)
        assert exp.K == 4

    def test_unreachable_tolerance_raises_with_best(self):
        spec = BathSpec(s=1.0, **WEAK)
        with pytest.raises(ExpansionFitError) as err:
            fit_expansion(spec, tol=1e-14, t_window=(0.0, 1.0), n_cert=50,
                          max_support=12)
        assert err.value.best_error is not None
        assert err.value.best_error > 1e-14

    def test_needs_a_target(self):
        with pytest.raises(ValueError):
            fit_expansion(BathSpec(s=1.0, **WEAK))

    def test_roundtrip(self, tmp_path, weak_ohmic_expansion):
        exp = weak_ohmic_expansion
        path = tmp_path / "expansion.json"
        exp.save(path)
        back = load_expansion(path)
        np.testing.assert_array_equal(back.d, exp.d)
        np.testing.assert_array_equal(back.z, exp.z)
        assert back.fit_error == exp.fit_error
        assert back.bath == exp.bath
        assert back.t_window == exp.t_window

    def test_file_has_required_fields(self, tmp_path, weak_ohmic_expansion):
        import json

        path = tmp_path / "expansion.json"
        weak_ohmic_expansion.save(path)
        payload = json.loads(path.read_text())
        assert {"K", "fit_error", "t_window", "bath", "terms", "units"} <= set(payload)
        assert {"s", "kappa_2pi", "omega_c", "beta"} <= set(payload["bath"])
        assert {"re_d", "im_d", "re_z", "im_z"} <= set(payload["terms"][0])

    def test_unstable_rates_rejected(self):
        with pytest.raises(ValueError):
            CorrelationExpansion(
                d=np.array([1.0 + 0j]),
                z=np.array([-0.5 + 0j]),
                fit_error=0.0,
                t_window=(0.0, 1.0),
                bath=dict(s=1.0, **WEAK, omega_ph=1.0, omega_q=1.0),
            )
