"""Bath model: spectral density, noise power, and the correlation function.

Everything is expressed in qubit units: hbar = 1, frequencies in units of
the qubit splitting omega_q and times in 1/omega_q.  The coupling knob is
the dimensionless combination ``kappa_2pi`` = 2*pi*hbar*kappa.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .errors import QuadratureError

__all__ = [
    "BathSpec",
    "spectral_density",
    "noise_power",
    "jump_correlator_power",
    "correlation_quadrature",
    "relaxation_rate",
]


@dataclass(frozen=True)
class BathSpec:
    """Physical parameters of one system+bath scenario.

    Attributes
    ----------
    s : float
        Spectral exponent (1 = Ohmic, <1 = sub-Ohmic).
    kappa_2pi : float
        Dimensionless coupling 2*pi*hbar*kappa.
    omega_c : float
        Cutoff frequency in units of omega_q.
    beta : float
        Inverse temperature as beta*hbar*omega_q.
    omega_ph : float
        Frequency fixing the unit of kappa for s != 1 (default omega_q).
    omega_q : float
        Qubit frequency; the internal frequency unit (keep at 1).
    """

    s: float
    kappa_2pi: float
    omega_c: float
    beta: float
    omega_ph: float = 1.0
    omega_q: float = 1.0

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"spectral exponent s must be > 0, got {self.s}")
        if not self.kappa_2pi > 0:
            raise ValueError(f"kappa_2pi must be > 0, got {self.kappa_2pi}")
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.omega_ph > 0:
            raise ValueError(f"omega_ph must be > 0, got {self.omega_ph}")
        if not self.omega_q > 0:
            raise ValueError(f"omega_q must be > 0, got {self.omega_q}")

    @property
    def kappa(self) -> float:
        """Coupling strength kappa = kappa_2pi / (2*pi) with hbar = 1."""
        return self.kappa_2pi / (2.0 * np.pi)

    def with_exponent(self, s: float) -> "BathSpec":
        return replace(self, s=s)

    def as_dict(self) -> dict:
        return {
            "s": self.s,
            "kappa_2pi": self.kappa_2pi,
            "omega_c": self.omega_c,
            "beta": self.beta,
            "omega_ph": self.omega_ph,
            "omega_q": self.omega_q,
        }


def spectral_density(omega, spec: BathSpec):
    """Spectral density J(omega), odd in omega.

    J(omega) = sgn(omega) * kappa * omega_ph**(1-s) * |omega|**s
               / (1 + (omega/omega_c)**2)**2
    """
    omega = np.asarray(omega, dtype=float)
    mag = (
        spec.kappa
        * spec.omega_ph ** (1.0 - spec.s)
        * np.abs(omega) ** spec.s
        / (1.0 + (omega / spec.omega_c) ** 2) ** 2
    )
    out = np.sign(omega) * mag
    return out if out.ndim else float(out)


def noise_power(omega, spec: BathSpec):
    """Spectral noise power S_beta(omega) = J(omega) / (1 - exp(-beta*omega)).

    Positive for all omega != 0 and satisfies detailed balance
    S_beta(-omega) = exp(-beta*omega) * S_beta(omega).  At omega = 0 the
    value is the analytic limit kappa/beta for s = 1 and 0 for s > 1;
    for s < 1 the power diverges there and a ValueError is raised.
    """
    omega = np.asarray(omega, dtype=float)
    scalar = omega.ndim == 0
    omega = np.atleast_1d(omega)
    x = spec.beta * omega
    j = np.atleast_1d(spectral_density(omega, spec))
    out = np.empty_like(j)

    pos = x > 0
    neg = x < 0
    zero = x == 0
    # 1 - e^{-x} = -expm1(-x) is stable for x > 0; for x < 0 multiply
    # numerator and denominator by e^{x} to avoid overflow.
    out[pos] = j[pos] / (-np.expm1(-x[pos]))
    out[neg] = j[neg] * np.exp(x[neg]) / np.expm1(x[neg])
    if np.any(zero):
        if spec.s < 1:
            raise ValueError(
                "noise power diverges at omega = 0 for sub-Ohmic exponents"
            )
        limit = spec.kappa / spec.beta if spec.s == 1 else 0.0
        out[zero] = limit
    return float(out[0]) if scalar else out


def jump_correlator_power(omega, spec: BathSpec):
    """Square root of the noise power over 2*pi, g(omega) = sqrt(S_beta/2pi)."""
    return np.sqrt(noise_power(omega, spec) / (2.0 * np.pi))


def relaxation_rate(spec: BathSpec) -> float:
    """Population relaxation rate gamma_r = 2*pi*(S_beta(w_q) + S_beta(-w_q))."""
    return 2.0 * np.pi * (
        noise_power(spec.omega_q, spec) + noise_power(-spec.omega_q, spec)
    )


def _tail_cut(spec: BathSpec, abs_tol: float) -> float:
    """Upper frequency W such that the integral of S_beta beyond W is < abs_tol.

    Uses the algebraic envelope kappa * omega_ph^(1-s) * omega_c^4 * w^(s-4),
    whose tail integral is kappa * omega_ph^(1-s) * omega_c^4 * W^(s-3)/(3-s).
    """
    amp = 1.05 * spec.kappa * spec.omega_ph ** (1.0 - spec.s) * spec.omega_c**4
    w = (amp / ((3.0 - spec.s) * abs_tol)) ** (1.0 / (3.0 - spec.s))
    return max(12.0 * spec.omega_c, w)


def _fourier_piece(f, t: float, upper: float, abs_tol: float, trig: str):
    """integral_0^upper f(w)*trig(w*t) dw with an integrable singularity at 0.

    Split at a = min(1, pi/t): below a the oscillation is slower than half
    a cycle and plain adaptive quadrature handles the endpoint singularity.
    Above a, a plain rule split at the cutoff knee suffices while the whole
    range holds only a few cycles; beyond that the oscillatory-weight rule
    (analytic trig moments) takes over.
    """
    a = min(1.0, np.pi / t) if t > 0 else 1.0
    a = min(a, 0.5 * upper)
    tfun = np.cos if trig == "cos" else np.sin
    value, err = integrate.quad(
        lambda w: f(w) * tfun(w * t), 0.0, a,
        epsabs=0.25 * abs_tol, epsrel=1e-13, limit=400,
    )
    if t * upper <= 8.0:
        knots = [a] + [k for k in (1.0, upper / 10.0) if a < k < upper] + [upper]
        for lo, hi in zip(knots[:-1], knots[1:]):
            v, e = integrate.quad(
                lambda w: f(w) * tfun(w * t), lo, hi,
                epsabs=0.25 * abs_tol, epsrel=1e-13, limit=400,
            )
            value += v
            err += e
    else:
        v, e = integrate.quad(
            f, a, upper,
            weight=trig, wvar=t,
            epsabs=0.5 * abs_tol, epsrel=1e-13, limit=3000, maxp1=300,
        )
        value += v
        err += e
    return value, err


def correlation_quadrature(t, spec: BathSpec, tol: float = 1e-8) -> complex:
    """Bath correlation C(t) = integral of S_beta(w) * exp(-i*w*t) over all w.

    Adaptive quadrature split at w = 0 (the sub-Ohmic power-law point) with
    oscillatory-weight rules away from it; the algebraic tail beyond the
    cutoff is bounded analytically and folded into the error budget.  Raises
    QuadratureError when the achieved estimate exceeds ``tol`` (absolute).
    """
    t = float(t)
    if t < 0:
        raise ValueError("t must be >= 0 (use conj(C(t)) for t < 0)")
    if tol <= 0:
        raise ValueError("tol must be > 0")

    tail_budget = 0.125 * tol
    upper = _tail_cut(spec, tail_budget)
    piece_tol = 0.125 * tol

    def s_plus(w):
        return noise_power(w, spec)

    def s_minus(w):
        return noise_power(-w, spec)

    # C(t) = int_0^inf (S(w)+S(-w)) cos(wt) dw - i int_0^inf (S(w)-S(-w)) sin(wt) dw
    even = lambda w: s_plus(w) + s_minus(w)
    odd = lambda w: s_plus(w) - s_minus(w)

    re, ere = _fourier_piece(even, t, upper, piece_tol, "cos")
    if t == 0.0:
        im, eim = 0.0, 0.0
    else:
        im, eim = _fourier_piece(odd, t, upper, piece_tol, "sin")
    achieved = ere + eim + 2.0 * tail_budget
    value = complex(re, -im)
    if achieved > tol:
        raise QuadratureError(
            f"correlation quadrature reached abs error {achieved:.3e} > tol {tol:.3e}"
            f" at t = {t}",
            value=value,
            error_estimate=achieved,
        )
    return value
