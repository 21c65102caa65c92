"""Adaptive Gauss-Legendre integration, principal values and eps-regularised poles.

All routines accept vectorised callables ``f(x: ndarray) -> ndarray``
(real or complex).  Results are reduced with :func:`math.fsum` over
intervals sorted by position, so the returned value does not depend on the
order in which the refinement loop visited the intervals.
"""

from dataclasses import dataclass
import heapq
import math
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    NumericalError,
    NumeratorDiscontinuous,
    PoleOnBoundary,
    ToleranceNotMet,
    ValidationError,
)

__all__ = [
    "QuadratureConfig",
    "QuadResult",
    "PVIntegrand",
    "integrate_adaptive",
    "principal_value",
    "epsilon_regularized",
    "truncation_radius",
]

_LO_X, _LO_W = np.polynomial.legendre.leggauss(10)
_HI_X, _HI_W = np.polynomial.legendre.leggauss(21)
_NODES = np.concatenate([_LO_X, _HI_X])


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 2 ** 14
    truncation_threshold: float = 1e-16

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValidationError("quadrature tolerances must be positive")
        if self.truncation_threshold <= 0:
            raise ValidationError("truncation_threshold must be positive")
        if int(self.max_subdivisions) < 1:
            raise ValidationError("max_subdivisions must be >= 1")

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"abs_tol", "rel_tol", "max_subdivisions", "truncation_threshold"}
        if unknown:
            raise ValidationError(f"unknown quadrature keys: {sorted(unknown)}")
        return cls(**data)


DEFAULT_CONFIG = QuadratureConfig()


class QuadResult(NamedTuple):
    value: complex
    error: float
    converged: bool
    n_intervals: int


@dataclass(frozen=True)
class PVIntegrand:
    """Integrand theta(x)/(x - pole) over ``domain``; the upper end may be ``inf``."""

    numerator: Callable
    pole_location: float
    integration_domain: Sequence[float]

    def __post_init__(self):
        a, b = self.integration_domain
        if not a < b:
            raise ValidationError("empty integration domain")
        if not (a < self.pole_location < b):
            raise PoleOnBoundary(
                f"pole {self.pole_location} not strictly inside ({a}, {b})"
            )


def _fsum(values):
    values = list(values)
    if any(isinstance(v, complex) for v in values):
        return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))
    return math.fsum(values)


def _rule(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    y = np.asarray(f(mid + half * _NODES))
    if not np.all(np.isfinite(y)):
        raise NumericalError(f"integrand not finite on [{a}, {b}]")
    lo = half * np.dot(_LO_W, y[: _LO_X.size])
    hi = half * np.dot(_HI_W, y[_LO_X.size:])
    if np.iscomplexobj(hi):
        hi, lo = complex(hi), complex(lo)
    else:
        hi, lo = float(hi), float(lo)
    return hi, abs(hi - lo)


def truncation_radius(f, start, threshold, direction=1):
    """First ``R = start + direction*2^k`` with ``|f| < threshold`` sampled on [R, 2R]."""
    for k in range(0, 64):
        near = start + direction * 2.0 ** k
        far = start + direction * 2.0 ** (k + 1)
        x = np.linspace(near, far, 65)
        y = np.abs(np.asarray(f(x)))
        if np.all(y < threshold):
            return near
    raise NumericalError("integrand does not decay; cannot truncate the semi-infinite domain")


def _finite_interval(f, a, b, config):
    if math.isinf(a) and math.isinf(b):
        lo = truncation_radius(f, 0.0, config.truncation_threshold, -1)
        hi = truncation_radius(f, 0.0, config.truncation_threshold, +1)
        return lo, hi
    if math.isinf(b):
        return a, truncation_radius(f, a, config.truncation_threshold, +1)
    if math.isinf(a):
        return truncation_radius(f, b, config.truncation_threshold, -1), b
    return a, b


def integrate_adaptive(f, interval, config=None, points=None, strict=False):
    """Globally adaptive Gauss-Legendre quadrature (10 vs 21 nodes per panel).

    Parameters
    ----------
    f : callable
        Vectorised integrand, real or complex valued.
    interval : (float, float)
        Integration limits; either end may be infinite when ``f`` decays.
    config : QuadratureConfig, optional
    points : sequence of float, optional
        Extra breakpoints (near-singular features) inside the interval.
    strict : bool
        Raise :class:`ToleranceNotMet` instead of returning an unconverged result.

    Returns
    -------
    QuadResult
        ``(value, error, converged, n_intervals)``.
    """
    config = config or DEFAULT_CONFIG
    a, b = float(interval[0]), float(interval[1])
    sign = 1.0
    if a == b:
        return QuadResult(0.0, 0.0, True, 0)
    if a > b:
        a, b, sign = b, a, -1.0
    a, b = _finite_interval(f, a, b, config)
    edges = [a]
    for p in sorted(points or ()):
        if a < p < b and p > edges[-1]:
            edges.append(float(p))
    edges.append(b)

    heap = []
    panels = {}
    counter = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = _rule(f, lo, hi)
        panels[counter] = (lo, hi, val, err)
        heapq.heappush(heap, (-err, counter))
        counter += 1

    def totals():
        return _fsum(p[2] for p in panels.values()), math.fsum(p[3] for p in panels.values())

    total, total_err = totals()
    n_iter = 0
    while total_err > max(config.abs_tol, config.rel_tol * abs(total)):
        if len(panels) >= config.max_subdivisions:
            break
        _, key = heapq.heappop(heap)
        lo, hi, val, err = panels.pop(key)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            # panel below floating point resolution; keep it and stop refining
            panels[key] = (lo, hi, val, err)
            break
        for sub in ((lo, mid), (mid, hi)):
            sval, serr = _rule(f, *sub)
            panels[counter] = (sub[0], sub[1], sval, serr)
            heapq.heappush(heap, (-serr, counter))
            counter += 1
            total += sval
            total_err += serr
        total -= val
        total_err -= err
        n_iter += 1
        if n_iter % 64 == 0:
            total, total_err = totals()

    ordered = sorted(panels.values(), key=lambda p: p[0])
    value = _fsum(p[2] for p in ordered)
    error = math.fsum(p[3] for p in ordered)
    converged = error <= max(config.abs_tol, config.rel_tol * abs(value))
    result = QuadResult(sign * value, error, converged, len(ordered))
    if strict and not converged:
        raise ToleranceNotMet(
            f"tolerance not met after {len(ordered)} panels (error {error:.3e})",
            value=result.value,
            error=error,
        )
    return result


def _check_continuity(theta, pole, w):
    jumps = []
    for h in (1e-3 * w, 1e-5 * w):
        jumps.append(abs(complex(theta(np.array([pole + h]))[0] - theta(np.array([pole - h]))[0])))
    scale = max(1.0, abs(complex(theta(np.array([pole]))[0])))
    # a continuous numerator shrinks the symmetric difference with h
    if jumps[1] > 1e-8 * scale and jumps[1] > 0.1 * jumps[0]:
        raise NumeratorDiscontinuous(
            f"numerator jumps by {jumps[1]:.3e} across the pole at {pole}"
        )


def _window(pole, a, b):
    return 0.5 * min(pole - a, b - pole, 1.0)


def principal_value(pv, config=None, strict=True):
    """Cauchy principal value of numerator(x)/(x - pole) by symmetric subtraction.

    On the window ``[pole - w, pole + w]`` the odd part ``theta(pole)/(x - pole)``
    integrates to zero, so only the bounded difference quotient is integrated
    there (folded onto ``[0, w]``).  Outside the window the integrand is regular.
    """
    config = config or DEFAULT_CONFIG
    theta = pv.numerator
    p = float(pv.pole_location)
    a, b = map(float, pv.integration_domain)
    w = _window(p, a, b)
    _check_continuity(theta, p, w)

    def folded(u):
        return (theta(p + u) - theta(p - u)) / u

    pieces = [integrate_adaptive(folded, (0.0, w), config, strict=strict)]
    outer = lambda x: theta(x) / (x - p)
    pieces.append(integrate_adaptive(outer, (a, p - w), config, strict=strict))
    pieces.append(integrate_adaptive(outer, (p + w, b), config, strict=strict))
    return _fsum(r.value for r in pieces)


def epsilon_regularized(f, pole, eps, sign, interval, config=None, strict=True):
    """Integral of f(x) / ((x - pole) + sign*i*eps) over ``interval``.

    Near the pole ``f(pole)`` is subtracted and its contribution is added back
    in closed form (complex logarithm), which keeps the result accurate as
    eps -> 0, where it tends to PV -/+ i*pi*f(pole).
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    if sign not in (1, -1, "+", "-"):
        raise ValidationError("sign must be +1 or -1")
    s = 1 if sign in (1, "+") else -1
    config = config or DEFAULT_CONFIG
    a, b = map(float, interval)
    p = float(pole)
    shift = 1j * s * eps

    if not (a < p < b):
        res = integrate_adaptive(lambda x: f(x) / (x - p + shift), (a, b), config, strict=strict)
        return complex(res.value)

    w = _window(p, a, b)
    fp = complex(np.asarray(f(np.array([p])))[0])
    marks = [p + k * eps for k in (-10.0, -1.0, 0.0, 1.0, 10.0) if abs(k * eps) < w]
    inner = integrate_adaptive(
        lambda x: (f(x) - fp) / (x - p + shift), (p - w, p + w), config, points=marks, strict=strict
    )
    analytic = fp * (np.log(w + shift) - np.log(-w + shift))
    outer = lambda x: f(x) / (x - p + shift)
    left = integrate_adaptive(outer, (a, p - w), config, strict=strict)
    right = integrate_adaptive(outer, (p + w, b), config, strict=strict)
    return _fsum([complex(left.value), complex(inner.value), complex(analytic), complex(right.value)])
