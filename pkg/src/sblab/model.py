"""Physical parameters of the massive spin-boson model.

The two-level atom has levels ``e0 = 0 < e1`` and couples through sigma_1
to a scalar field with dispersion ``omega(k) = sqrt(k^2 + m^2)`` and the
Gaussian-cutoff form factor ``f(k) = exp(-k^2/Lambda^2) omega(k)^(-1/2)``.
The normalisation constant of the relativistic form factor is absorbed in
the coupling ``g`` and is not reinstated anywhere in the package.
"""

from dataclasses import dataclass, asdict
import math

import numpy as np

from .errors import GapViolation, MassOrderViolation, ValidationError

GAP_TOL = 1e-12

__all__ = [
    "ModelParams",
    "reference_params",
    "omega",
    "form_factor",
    "xi",
    "delta_gap",
    "onshell_momentum",
]


def _gap(e1, m):
    """Distance of e1 from the lattice {m, 2m, 3m, ...}."""
    n = max(1, math.floor(e1 / m))
    return min(abs(e1 - n * m), abs(e1 - (n + 1) * m))


@dataclass(frozen=True)
class ModelParams:
    """Immutable parameter set; construction validates every invariant.

    Attributes
    ----------
    e1 : float
        Excited atomic level (the ground level ``e0`` is pinned to 0).
    m : float
        Boson mass, ``0 < m < e1``.
    lambda_uv : float
        Ultraviolet cutoff of the form factor.
    g : float
        Coupling constant, ``g >= 0``.
    """

    e1: float
    m: float
    lambda_uv: float
    g: float = 0.0
    e0: float = 0.0

    def __post_init__(self):
        for name in ("e1", "m", "lambda_uv", "g", "e0"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.e0 != 0.0:
            raise ValidationError("e0 is fixed to 0")
        if self.m <= 0:
            raise ValidationError(f"boson mass must be positive, got m={self.m}")
        if self.e1 <= 0:
            raise ValidationError(f"e1 must be positive, got e1={self.e1}")
        if self.m >= self.e1:
            raise MassOrderViolation(
                f"m={self.m} >= e1={self.e1}: the one-boson scattering channel is closed"
            )
        if _gap(self.e1 - self.e0, self.m) <= GAP_TOL:
            raise GapViolation(f"e1 - e0 = {self.e1 - self.e0} is a multiple of m = {self.m}")
        if self.lambda_uv <= 0:
            raise ValidationError(f"lambda_uv must be positive, got {self.lambda_uv}")
        if self.g < 0:
            raise ValidationError(f"g must be non-negative, got {self.g}")

    @property
    def delta(self):
        return _gap(self.e1 - self.e0, self.m)

    def with_g(self, g):
        return ModelParams(e1=self.e1, m=self.m, lambda_uv=self.lambda_uv, g=g)

    def to_dict(self):
        d = asdict(self)
        d.pop("e0")
        return d

    @classmethod
    def from_dict(cls, data):
        """Build from the JSON config block ``{"e1", "m", "lambda_uv", "g"}`` (``e0`` optional, must be 0)."""
        allowed = {"e0", "e1", "m", "lambda_uv", "g"}
        unknown = set(data) - allowed
        if unknown:
            raise ValidationError(f"unknown parameter keys: {sorted(unknown)}")
        missing = {"e1", "m", "lambda_uv"} - set(data)
        if missing:
            raise ValidationError(f"missing parameter keys: {sorted(missing)}")
        return cls(**data)


def reference_params(g=0.05):
    """Desk-scale reference instance e1=2.5, m=1, Lambda=2 (gap 0.5)."""
    return ModelParams(e1=2.5, m=1.0, lambda_uv=2.0, g=g)


def _radial(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValidationError("radial momentum must be non-negative")
    return r


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def omega(r, params):
    """Dispersion relation sqrt(r^2 + m^2)."""
    r = _radial(r)
    return _out(np.hypot(r, params.m))


def form_factor(r, params):
    """Gaussian UV-cutoff coupling profile exp(-r^2/Lambda^2) / sqrt(omega(r))."""
    r = _radial(r)
    w = np.hypot(r, params.m)
    return _out(np.exp(-(r / params.lambda_uv) ** 2) / np.sqrt(w))


def xi(r, params):
    """Commutator symbol r^2 / omega(r) of the dilation generator with omega."""
    r = _radial(r)
    return _out(r * r / np.hypot(r, params.m))


def delta_gap(params):
    """Distance of e1 - e0 from m*N; always > 0 for a constructed ``ModelParams``."""
    d = params.delta
    if d <= GAP_TOL:
        raise GapViolation("e1 - e0 lies on the mass lattice")
    return d


def onshell_momentum(params):
    """Radius where omega(r) = e1."""
    return math.sqrt(params.e1 ** 2 - params.m ** 2)
