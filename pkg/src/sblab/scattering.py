"""One-boson wave packets, the pair kernel G and the Lorentzian transition matrix.

Only the angular average ``H(r) = int dSigma h(r, Sigma)`` of a packet ever
enters the one-boson formulas, because the double angular integral in
``G_{h,l}(r) = r^4 f(r)^2 int dSigma dSigma' conj(h(r,Sigma)) l(r,Sigma')``
factorises.  Radial integrals use the measure ``dr`` on ``(0, inf)``; the
three-dimensional measure is ``d^3k = r^2 dr dSigma``.
"""

from dataclasses import dataclass
import math
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import NumericalError, SupportAtOrigin, ValidationError
from .model import form_factor, omega
from .quadrature import DEFAULT_CONFIG, integrate_adaptive

__all__ = [
    "WavePacket",
    "PairKernel",
    "bump",
    "pair_kernel",
    "w_function",
    "zeta",
    "transition_lorentzian",
    "onshell_kernel",
    "kernel_profile",
    "REFERENCE_SUPPORTS",
]

REFERENCE_SUPPORTS = {
    "on_resonance": (2.0, 2.6),
    "off_resonance_low": (0.5, 0.9),
    "off_resonance_high": (3.5, 4.5),
}


def bump(r, a, b):
    """C-infinity bump exp(-1/(1-x^2)) rescaled to the support [a, b]."""
    r = np.asarray(r, dtype=float)
    x = (2.0 * r - a - b) / (b - a)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


@dataclass(frozen=True)
class WavePacket:
    """One-boson test function described by its radial support and angular average.

    ``radial_profile`` is the pointwise value h(r) for spherically symmetric
    packets; it is required only by :func:`w_function`.
    """

    support: Tuple[float, float]
    angular_average: Callable
    radial_profile: Optional[Callable] = None
    smoothness: str = "smooth-compact"

    def __post_init__(self):
        a, b = map(float, self.support)
        if not a < b:
            raise ValidationError(f"empty packet support {self.support}")
        if a <= 0:
            raise SupportAtOrigin(f"packet support {self.support} touches r = 0")
        if not math.isfinite(b):
            raise ValidationError("packet support must be bounded")
        object.__setattr__(self, "support", (a, b))

    @classmethod
    def bump(cls, a, b, amplitude=1.0):
        """Spherically symmetric bump h(r) = amplitude * bump(r; a, b)."""
        amp = complex(amplitude) if isinstance(amplitude, complex) else float(amplitude)
        profile = lambda r: amp * bump(r, a, b)
        return cls((a, b), lambda r: 4.0 * np.pi * profile(r), profile)

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"type", "support", "amplitude"}
        if unknown:
            raise ValidationError(f"unknown packet keys: {sorted(unknown)}")
        if data.get("type") != "bump":
            raise ValidationError(f"unsupported packet type {data.get('type')!r}")
        a, b = data["support"]
        return cls.bump(a, b, data.get("amplitude", 1.0))

    def __call__(self, r):
        """Angular average, forced to zero outside the support."""
        r = np.asarray(r, dtype=float)
        a, b = self.support
        vals = np.asarray(self.angular_average(r))
        return np.where((r > a) & (r < b), vals, 0.0)


@dataclass(frozen=True)
class PairKernel:
    G: Callable
    support: Tuple[float, float]

    def __call__(self, r):
        return self.G(r)

    @property
    def empty(self):
        return self.support[0] >= self.support[1]


def pair_kernel(h, l, params):
    """G_{h,l}(r) = r^4 f(r)^2 conj(H_h(r)) H_l(r); zero for r < 0 and off-support."""
    lo = max(h.support[0], l.support[0])
    hi = min(h.support[1], l.support[1])

    def G(r):
        r = np.asarray(r, dtype=float)
        rr = np.where(r > 0, r, 0.0)
        f = form_factor(rr, params)
        val = rr ** 4 * f * f * np.conj(h(rr)) * l(rr)
        return np.where(r > 0, val, 0.0)

    return PairKernel(G, (lo, hi))


def w_function(h, l, k, params):
    """W(k) = |k|^2 l(k) f(|k|) conj(H_h(|k|)) for a spherically symmetric l."""
    if l.radial_profile is None:
        raise ValidationError("w_function needs the pointwise radial profile of l")
    r = np.abs(np.asarray(k, dtype=float))
    a, b = l.support
    lval = np.where((r > a) & (r < b), l.radial_profile(r), 0.0)
    return r * r * lval * form_factor(r, params) * np.conj(h(r))


def _radial_integral(fn, kernel, config):
    if kernel.empty:
        return 0j
    res = integrate_adaptive(fn, kernel.support, config or DEFAULT_CONFIG)
    if not res.converged:
        raise NumericalError(f"radial integral did not converge (error {res.error:.2e})")
    return complex(res.value)


def zeta(t, G, lambda0, params, config=None):
    """zeta(t) = int_0^inf G(r) exp(i t (omega(r) + lambda0)) dr."""
    fn = lambda r: G(r) * np.exp(1j * t * (omega(r, params) + lambda0))
    return _radial_integral(fn, G, config)


def _lambda1(level_shift, g, e1):
    return e1 - g * g * level_shift.gamma_minus0


def transition_lorentzian(h, l, level_shift, lambda0, gs_norm_sq, params, config=None):
    """Leading-order transition matrix coefficient T_P(h, l).

    Parameters
    ----------
    h, l : WavePacket
        Outgoing and incoming packets.
    level_shift : LevelShift
        Provides Gamma_{-0}.
    lambda0 : float
        Ground-state energy (second-order value or an oracle eigenvalue).
    gs_norm_sq : float
        Squared norm of the ground state that normalises the S matrix.
    """
    if gs_norm_sq <= 0:
        raise ValidationError("gs_norm_sq must be positive")
    g2 = params.g ** 2
    if g2 == 0:
        return 0j
    lam1 = _lambda1(level_shift, params.g, params.e1)
    numer = lam1.real - lambda0
    G = pair_kernel(h, l, params)

    def fn(r):
        w = omega(r, params)
        return G(r) * numer / ((w + lambda0 - lam1) * (w - lambda0 + np.conj(lam1)))

    integral = _radial_integral(fn, G, config)
    return 4j * math.pi * g2 / gs_norm_sq * integral


def onshell_kernel(r, level_shift, lambda0, gs_norm_sq, params):
    """Smooth amplitude multiplying delta(omega(k) - omega(k')) in T(k, k').

    Returns ``4 pi i g^2 / gs_norm_sq * f(r)^2 (r/omega(r)) (Re l1 - l0) /
    ((omega + l0 - l1)(omega - l0 + conj(l1)))`` with ``l1 = e1 - g^2 Gamma_{-0}``.
    The radial measure is 4 pi r^2 dr.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValidationError("on-shell kernel needs r > 0")
    g2 = params.g ** 2
    lam1 = _lambda1(level_shift, params.g, params.e1)
    w = omega(r, params)
    f = form_factor(r, params)
    val = (
        4j * math.pi * g2 / gs_norm_sq
        * f * f * (r / w)
        * (lam1.real - lambda0)
        / ((w + lambda0 - lam1) * (w - lambda0 + np.conj(lam1)))
    )
    return complex(val) if val.ndim == 0 else val


def kernel_profile(r_grid, level_shift, lambda0, gs_norm_sq, params):
    """Rows (r, Re, Im, abs) of the on-shell kernel over ``r_grid``."""
    k = onshell_kernel(r_grid, level_shift, lambda0, gs_norm_sq, params)
    r_grid = np.asarray(r_grid, dtype=float)
    return np.column_stack([r_grid, k.real, k.imag, np.abs(k)])
