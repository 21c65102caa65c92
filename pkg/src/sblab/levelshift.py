"""Second-order level shift of the excited state and the ground-state shift.

The self-energy integral over d^3k is reduced to the energy offset
``tau = omega(k) - e1``::

    Gamma_{+-eps} = int_{m-e1}^inf theta(tau) / (tau +- i eps) dtau

with the spectral density ``theta(tau) = 4 pi s sqrt(s^2 - m^2) f(sqrt(s^2 - m^2))^2``,
``s = e1 + tau``.  The eps -> 0 boundary values are
``Gamma_{+-0} = PV int theta(x)/x dx -+ i pi theta(0)``; the imaginary part is
always taken from the closed form.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import BelowThreshold, NumericalError
from .model import form_factor, omega
from .quadrature import (
    DEFAULT_CONFIG,
    PVIntegrand,
    epsilon_regularized,
    integrate_adaptive,
    principal_value,
)

__all__ = [
    "LevelShift",
    "Resonance",
    "theta",
    "gamma_eps",
    "gamma_boundary",
    "gamma0_groundshift",
    "level_shift",
    "resonance",
]


def _theta_unchecked(tau, params):
    s = params.e1 + np.asarray(tau, dtype=float)
    k = np.sqrt(np.clip(s * s - params.m ** 2, 0.0, None))
    f = np.exp(-(k / params.lambda_uv) ** 2) / np.sqrt(np.hypot(k, params.m))
    return 4.0 * np.pi * s * k * f * f


def theta(tau, params):
    """Spectral density at energy e1 + tau; vanishes like a square root at tau = m - e1."""
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < params.m - params.e1):
        raise BelowThreshold(f"tau must be >= m - e1 = {params.m - params.e1}")
    out = _theta_unchecked(tau_arr, params)
    return float(out) if out.ndim == 0 else out


def _sign(sign):
    if sign in (1, "+"):
        return 1
    if sign in (-1, "-"):
        return -1
    raise ValueError(f"sign must be +1/-1 or '+'/'-', got {sign!r}")


def gamma_eps(eps, sign, params, config=None):
    """Level-shift function Gamma_{sign*eps} at finite eps > 0."""
    s = _sign(sign)
    lo = params.m - params.e1
    th = lambda t: _theta_unchecked(t, params)
    return epsilon_regularized(th, 0.0, eps, s, (lo, math.inf), config or DEFAULT_CONFIG)


def _pv_part(params, config):
    lo = params.m - params.e1
    th = lambda t: _theta_unchecked(t, params)
    return principal_value(PVIntegrand(th, 0.0, (lo, math.inf)), config or DEFAULT_CONFIG)


def gamma_boundary(sign, params, config=None):
    """Boundary value Gamma_{+-0}: real part by principal value, Im = -+ pi theta(0) exactly."""
    s = _sign(sign)
    re = _pv_part(params, config)
    return complex(re, -s * math.pi * theta(0.0, params))


def gamma0_groundshift(params, config=None):
    """Ground-state shift coefficient 4 pi int r^2 f(r)^2 / (e1 - e0 + omega(r)) dr.

    First power of the denominator, as obtained from the second-order
    Feshbach computation of the ground state.
    """
    def integrand(r):
        f = form_factor(r, params)
        return 4.0 * np.pi * r * r * f * f / (params.e1 - params.e0 + omega(r, params))

    res = integrate_adaptive(integrand, (0.0, math.inf), config or DEFAULT_CONFIG)
    if not res.converged:
        raise NumericalError("ground-state shift integral did not converge")
    return float(res.value)


@dataclass(frozen=True)
class LevelShift:
    gamma_minus0: complex
    gamma_plus0: complex
    theta0: float
    gamma0_gs: float


@dataclass(frozen=True)
class Resonance:
    """Second-order resonance data for coupling g.

    ``lambda1_tilde = e1 - g^2 Gamma_{-0}``, ``lambda0_approx = e0 - g^2 Gamma_0``
    and ``decay_rate = 2 g^2 Im Gamma_{-0}`` (decay rate of |a(t)|^2).
    """

    g: float
    e1: float
    level_shift: LevelShift
    lambda1_tilde: complex
    lambda0_approx: float
    decay_rate: float

    def to_json(self):
        ls = self.level_shift
        return {
            "gamma_minus0": [ls.gamma_minus0.real, ls.gamma_minus0.imag],
            "theta0": ls.theta0,
            "gamma0": ls.gamma0_gs,
            "lambda1_tilde": [self.lambda1_tilde.real, self.lambda1_tilde.imag],
            "lambda0": self.lambda0_approx,
            "decay_rate": self.decay_rate,
        }


def level_shift(params, config=None):
    re = _pv_part(params, config)
    th0 = theta(0.0, params)
    gm = complex(re, math.pi * th0)
    return LevelShift(
        gamma_minus0=gm,
        gamma_plus0=gm.conjugate(),
        theta0=th0,
        gamma0_gs=gamma0_groundshift(params, config),
    )


def resonance(params, config=None, shift=None):
    """Assemble the resonance, ground-state approximation and decay rate.

    ``shift`` may carry a precomputed :class:`LevelShift` (it does not depend on g).
    """
    ls = shift or level_shift(params, config)
    g2 = params.g ** 2
    return Resonance(
        g=params.g,
        e1=params.e1,
        level_shift=ls,
        lambda1_tilde=complex(params.e1 - g2 * ls.gamma_minus0),
        lambda0_approx=params.e0 - g2 * ls.gamma0_gs,
        decay_rate=2.0 * g2 * ls.gamma_minus0.imag,
    )
