"""Survival amplitude of the bare excited state phi_1 (x) Omega.

At leading order the amplitude is the Fourier transform of a Poisson kernel::

    a(t) = pi^-1 int dz exp(-i t z) Im (e1 - z - g^2 Gamma_{-0})^-1

which closes by residues to ``exp(-i t lambda1_tilde)``.  Both the closed form
and a direct quadrature (window plus analytic asymptotic tails) are provided
so that either can check the other.
"""

from dataclasses import dataclass
import math
from typing import Tuple

import numpy as np
from scipy.special import sici

from .errors import NumericalError, ValidationError, WindowTooNarrow
from .model import delta_gap
from .quadrature import DEFAULT_CONFIG, integrate_adaptive

__all__ = [
    "SurvivalCurve",
    "survival_residue",
    "survival_quadrature",
    "survival_curve",
    "chi",
    "chi_cutoff",
    "default_scale",
    "DEFAULT_WINDOW_WIDTHS",
]

DEFAULT_WINDOW_WIDTHS = 200.0


@dataclass(frozen=True)
class SurvivalCurve:
    times: Tuple[float, ...]
    amplitudes: Tuple[complex, ...]
    method: str

    def rows(self):
        for t, a in zip(self.times, self.amplitudes):
            yield t, a.real, a.imag, abs(a) ** 2, self.method


def survival_residue(t, resonance):
    """exp(-i t lambda1_tilde): phase at e1 - g^2 Re Gamma, |a|^2 decays at ``decay_rate``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("survival amplitude is defined for t >= 0")
    out = np.exp(-1j * t * resonance.lambda1_tilde)
    return complex(out) if out.ndim == 0 else out


def _tail_moments(X, s, pmax):
    """E_p = int_X^inf exp(i s x) x^-p dx for p = 2..pmax (X > 0, s real)."""
    E = {}
    if s == 0.0:
        for p in range(2, pmax + 1):
            E[p] = X ** (1 - p) / (p - 1)
        return E
    si, ci = sici(abs(s) * X)
    prev = -ci + 1j * math.copysign(1.0, s) * (0.5 * math.pi - si)
    for p in range(2, pmax + 1):
        prev = (X ** (1 - p) * np.exp(1j * s * X) + 1j * s * prev) / (p - 1)
        E[p] = prev
    return E


def _tail(X, t, b, direction):
    """Tail of int exp(-i t x) (b/pi)/(x^2 + b^2) beyond |x| = X on one side.

    Uses the two-term expansion b/x^2 - b^3/x^4; returns (value, bound on the
    dropped b^5/x^6 term).
    """
    # right tail: exp(-i t x), x > X ; left tail: x -> -x gives exp(+i t x)
    s = -t if direction > 0 else t
    E = _tail_moments(X, s, 4)
    value = (b / math.pi) * (E[2] - b * b * E[4])
    bound = b ** 5 / (5.0 * math.pi * X ** 5)
    return complex(value), bound


def survival_quadrature(t, resonance, window=None, config=None):
    """Evaluate the Poisson-kernel Fourier integral numerically at one time t >= 0.

    ``window`` is an absolute z-interval; by default ``Re lambda1 +- 200 g^2 |Gamma_{-0}|``.
    Outside the window the integrand is replaced by its large-|z| expansion,
    integrated in closed form with sine/cosine integrals.
    """
    if t < 0:
        raise ValidationError("survival amplitude is defined for t >= 0")
    config = config or DEFAULT_CONFIG
    lam1 = resonance.lambda1_tilde
    c, b = lam1.real, -lam1.imag
    if b <= 0:
        raise ValidationError("survival_quadrature needs g > 0 (finite width)")
    if window is None:
        half = DEFAULT_WINDOW_WIDTHS * resonance.g ** 2 * abs(resonance.level_shift.gamma_minus0)
        window = (c - half, c + half)
    lo, hi = window[0] - c, window[1] - c
    if not (lo < 0 < hi):
        raise WindowTooNarrow("window must contain the resonance centre")

    def integrand(x):
        return np.exp(-1j * t * x) * (b / math.pi) / (x * x + b * b)

    marks = [k * b for k in (-10.0, -1.0, 0.0, 1.0, 10.0)]
    core = integrate_adaptive(integrand, (lo, hi), config, points=marks)
    if not core.converged:
        raise NumericalError(f"window quadrature did not converge (error {core.error:.2e})")
    right, eb_r = _tail(hi, t, b, +1)
    left, eb_l = _tail(-lo, t, b, -1)
    if eb_r + eb_l > 10.0 * config.abs_tol:
        raise WindowTooNarrow(
            f"tail remainder bound {eb_r + eb_l:.2e} exceeds 10 x abs_tol; widen the window"
        )
    total = complex(core.value) + right + left
    return complex(np.exp(-1j * t * c) * total)


def survival_curve(times, resonance, method="residue", **kwargs):
    times = tuple(float(t) for t in times)
    if method == "residue":
        amps = tuple(complex(a) for a in np.atleast_1d(survival_residue(np.array(times), resonance)))
    elif method == "quadrature":
        amps = tuple(survival_quadrature(t, resonance, **kwargs) for t in times)
    else:
        raise ValidationError(f"unknown survival method {method!r}")
    return SurvivalCurve(times, amps, method)


def _smooth_step(u):
    """0 for u <= 0, 1 for u >= 1, C-infinity in between (built from exp(-1/x))."""
    u = np.asarray(u, dtype=float)
    a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
    v = 1.0 - u
    bb = np.where(v > 0, np.exp(-1.0 / np.where(v > 0, v, 1.0)), 0.0)
    return a / (a + bb)


def chi(r, params):
    """Fixed cutoff: 1 on [e1 - delta/2, e1 + delta/2], support in (e1 - 3delta/4, e1 + 3delta/4)."""
    d = delta_gap(params)
    dist = np.abs(np.asarray(r, dtype=float) - params.e1)
    out = _smooth_step((0.75 * d - dist) / (0.25 * d))
    return float(out) if out.ndim == 0 else out


def chi_cutoff(r, s, params):
    """Rescaled cutoff chi_s(r) = chi(e1 + (r - e1)/s)."""
    if s <= 0:
        raise ValidationError("scale s must be positive")
    r = np.asarray(r, dtype=float)
    return chi(params.e1 + (r - params.e1) / s, params)


def default_scale(g):
    """s = g^(2/3), which balances the two remainder terms of the survival formula."""
    return g ** (2.0 / 3.0)
