"""Conjugate-operator checks on the discretised one-boson line.

The dilation generator acts on radial s-wave functions ``phi(r)``.  In the
unitary variable ``u = sqrt(4 pi) r phi`` (measure ``dr``) it becomes::

    i D = -(r d/dr + 1/2) = -(1/2)(r d/dr + d/dr r)

so ``[omega, i D] u = r omega'(r) u = xi(r) u`` with ``xi = r^2/omega``.  On a
grid the function is stored as ``c_j = sqrt(w_j) u(k_j)`` so that the
discrete inner product is Euclidean; the generator ``K = -iD`` is then the
antisymmetric part of the finite-difference matrix of ``r d/dr + 1/2``.
"""

from dataclasses import dataclass, field
import math
from typing import Dict, Tuple

import numpy as np
import scipy.linalg as sla

from .dynamics import chi
from .errors import (
    EmptyCutoffRange,
    EpsBelowSpacingFloor,
    SupportTouchesBoundary,
    ValidationError,
)
from .fockoracle import DYNAMIC, assemble, build_grid, level_spacing
from .model import delta_gap, omega, xi

__all__ = [
    "DilationMatrix",
    "MourreReport",
    "ResolventProbe",
    "dilation_matrix",
    "commutator_check",
    "mourre_constant",
    "weighted_resolvent_probe",
    "compressed_hamiltonian",
]

CHI_RANK_CUT = 1e-8
EPS_FLOOR_SPACINGS = 2.0


def _derivative_matrix(r):
    """Second-order three-point d/dr on arbitrary increasing nodes (one-sided at the ends)."""
    n = r.size
    C = np.zeros((n, n))
    for i in range(1, n - 1):
        h1, h2 = r[i] - r[i - 1], r[i + 1] - r[i]
        C[i, i - 1] = -h2 / (h1 * (h1 + h2))
        C[i, i] = (h2 - h1) / (h1 * h2)
        C[i, i + 1] = h1 / (h2 * (h1 + h2))
    for i, (a, b, c) in ((0, (0, 1, 2)), (n - 1, (n - 1, n - 2, n - 3))):
        h1, h2 = r[b] - r[a], r[c] - r[a]
        C[i, a] = -(h1 + h2) / (h1 * h2)
        C[i, b] = h2 / (h1 * (h2 - h1))
        C[i, c] = -h1 / (h2 * (h2 - h1))
    return C


@dataclass(frozen=True, eq=False)
class DilationMatrix:
    """Discrete dilation generator on a radial grid.

    ``raw`` is the finite-difference matrix of ``r d/dr + 1/2`` in the
    weighted coordinates ``c_j``; ``generator`` is its antisymmetric part
    ``K``, and ``matrix`` is the Hermitian ``D = i K``.
    """

    grid: object
    raw: np.ndarray
    generator: np.ndarray

    @property
    def matrix(self):
        return 1j * self.generator

    def skew_defect(self, values, interior=2):
        """||(raw + raw^T) c|| over interior rows; O(h^2) for smooth c."""
        v = (self.raw + self.raw.T) @ values
        return float(np.linalg.norm(v[interior:-interior]))

    def weight(self):
        """rho = (D^2 + 1)^(-1/2) on the one-boson line."""
        s2, V = np.linalg.eigh(self.generator.T @ self.generator)
        return (V / np.sqrt(1.0 + s2)) @ V.T


def dilation_matrix(grid):
    r = np.asarray(grid.nodes, dtype=float)
    sq = np.sqrt(np.asarray(grid.weights, dtype=float))
    A = r[:, None] * _derivative_matrix(r) + 0.5 * np.eye(r.size)
    raw = sq[:, None] * A / sq[None, :]
    return DilationMatrix(grid, raw, 0.5 * (raw - raw.T))


def commutator_check(test_fn, grid, params, dilation=None, tol=1e-12):
    """Discrete L^2 norm of ``[omega, iD] phi - xi phi`` for a radial test function.

    ``test_fn`` gives ``u(r)`` in the unitary radial variable.  Raises
    :class:`SupportTouchesBoundary` if it is not negligible at the first or
    last two nodes, where the stencil is one-sided.
    """
    D = dilation or dilation_matrix(grid)
    r = np.asarray(grid.nodes, dtype=float)
    u = np.asarray(test_fn(r), dtype=float)
    scale = max(np.abs(u).max(), 1e-300)
    if max(np.abs(u[:2]).max(), np.abs(u[-2:]).max()) > tol * scale:
        raise SupportTouchesBoundary("test function is not negligible at the grid ends")
    c = np.sqrt(grid.weights) * u
    w = np.asarray(omega(r, params))
    K = D.generator
    # [omega, iD] = [omega, -K] = K omega - omega K
    comm = K @ (w * c) - w * (K @ c)
    return float(np.linalg.norm(comm - np.asarray(xi(r, params)) * c))


def compressed_hamiltonian(H):
    """(H restricted to Ran P_bar, kept indices) with P_bar removing phi_1 (x) Omega."""
    drop = H.basis.index(1)
    keep = np.array([i for i in range(H.dim) if i != drop])
    return H.toarray()[np.ix_(keep, keep)], keep


@dataclass(frozen=True)
class MourreReport:
    """Compressed commutator data.

    ``alpha_num`` is the largest alpha with ``B >= alpha chi^2`` on the range
    of chi(H_P_bar), i.e. the lowest eigenvalue of the commutator compressed
    to the eigenvectors kept by the cutoff.  ``b_min`` is the lowest nonzero
    eigenvalue of B itself, which also carries the chi^2 factor.
    ``C_slack`` is the norm of the P_bar-compressed coupling term
    ``sigma_1 (x) Phi(-iDf)``, the constant multiplying g in the reference
    bound ``delta/10 - C g``.
    """

    alpha_num: float
    b_min: float
    g: float
    C_slack: float
    compressed_coupling_norm: float
    reference_bound: float
    delta: float
    chi_window: Tuple[float, float]
    rank: int
    metadata: Dict = field(default_factory=dict)

    def to_json(self):
        return {
            "alpha_num": self.alpha_num,
            "b_min": self.b_min,
            "g": self.g,
            "C_slack": self.C_slack,
            "compressed_coupling_norm": self.compressed_coupling_norm,
            "reference_bound": self.reference_bound,
            "delta": self.delta,
            "chi_window": list(self.chi_window),
            "rank": self.rank,
            "metadata": self.metadata,
        }


def _require_one_boson(profile):
    if profile.N_max != 1:
        raise ValidationError("Mourre checks are implemented for the one-boson truncation only")


def mourre_constant(params, grid=None, profile=DYNAMIC):
    """Lowest eigenvalue of chi(H_P_bar)(dGamma(xi) + g sigma_1 Phi(-iDf))chi(H_P_bar) per chi^2."""
    _require_one_boson(profile)
    grid = grid or build_grid(profile.M, profile.k_max)
    H = assemble(params, grid, 1)
    Hb, keep = compressed_hamiltonian(H)
    E, U = sla.eigh(Hb)
    weights = np.asarray(chi(E, params))
    sel = weights > CHI_RANK_CUT
    if not np.any(sel):
        raise EmptyCutoffRange("chi(H_P_bar) vanishes on the truncated space")
    Us, ws = U[:, sel], weights[sel]
    xi_diag = H.basis.occupation_sum(np.asarray(xi(grid.nodes, params)))[keep]
    V = H.dilation_coupling_operator().toarray()[np.ix_(keep, keep)]
    X = np.diag(xi_diag) + params.g * V
    comp = Us.T @ X @ Us
    comp = 0.5 * (comp + comp.T)
    alpha = float(np.linalg.eigvalsh(comp)[0])
    B = ws[:, None] * comp * ws[None, :]
    b_min = float(np.linalg.eigvalsh(0.5 * (B + B.T))[0])
    VU = Us.T @ V @ Us
    c_slack = float(np.linalg.norm(V, 2))
    d = delta_gap(params)
    return MourreReport(
        alpha_num=alpha,
        b_min=b_min,
        g=params.g,
        C_slack=c_slack,
        compressed_coupling_norm=float(np.linalg.norm(VU, 2)) if VU.size else 0.0,
        reference_bound=d / 10.0 - c_slack * params.g,
        delta=d,
        chi_window=(params.e1 - 0.75 * d, params.e1 + 0.75 * d),
        rank=int(sel.sum()),
        metadata={
            "profile": profile.name,
            "M": grid.M,
            "k_max": grid.k_max,
            "scheme": grid.scheme,
            "N_max": 1,
            "dim": H.dim - 1,
        },
    )


@dataclass(frozen=True)
class ResolventProbe:
    z: float
    eps: Tuple[float, ...]
    weighted: Tuple[float, ...]
    unweighted: Tuple[float, ...]
    spacing: float

    def growth(self, which="weighted"):
        """Ratios norm(eps_{i+1}) / norm(eps_i) along the sweep."""
        vals = getattr(self, which)
        return tuple(b / a for a, b in zip(vals, vals[1:]))

    def rows(self):
        for e, w, u in zip(self.eps, self.weighted, self.unweighted):
            yield e, w, u

    def to_json(self):
        return {
            "z": self.z,
            "spacing": self.spacing,
            "eps": list(self.eps),
            "weighted": list(self.weighted),
            "unweighted": list(self.unweighted),
        }


def _fock_weight(H, keep, rho):
    """Block-diagonal weight on Ran P_bar: rho on each one-boson block, 1 on the vacua."""
    nf = H.basis.n_fock
    M = H.basis.M
    W = np.eye(H.dim)
    for level in (0, 1):
        idx = level * nf + np.array([H.basis.index(0, (j,)) for j in range(M)])
        W[np.ix_(idx, idx)] = rho
    return W[np.ix_(keep, keep)]


def weighted_resolvent_probe(params, grid=None, profile=DYNAMIC, z=None, eps_list=(0.2, 0.1, 0.05)):
    """Weighted and plain resolvent norms of H_P_bar at z + i eps.

    Each eps must be at least twice the one-boson level spacing near e1; below
    that the discrete spectrum is resolved and the probe says nothing about
    the continuum.
    """
    _require_one_boson(profile)
    grid = grid or build_grid(profile.M, profile.k_max)
    d = delta_gap(params)
    z = params.e1 if z is None else float(z)
    if abs(z - params.e1) > d / 4 + 1e-15:
        raise ValidationError(f"z must lie in [e1 - delta/4, e1 + delta/4], got {z}")
    spacing = level_spacing(grid, params)
    eps_list = tuple(float(e) for e in eps_list)
    low = [e for e in eps_list if e < EPS_FLOOR_SPACINGS * spacing]
    if low:
        raise EpsBelowSpacingFloor(
            f"eps {low} below {EPS_FLOOR_SPACINGS:g} x level spacing ({spacing:.3g}); refine the grid"
        )
    H = assemble(params, grid, 1)
    Hb, keep = compressed_hamiltonian(H)
    E, U = sla.eigh(Hb)
    Wt = _fock_weight(H, keep, dilation_matrix(grid).weight())
    WU = Wt @ U
    weighted, plain = [], []
    for eps in eps_list:
        res = 1.0 / (E - z - 1j * eps)
        R = (WU * res[None, :]) @ WU.T
        weighted.append(float(np.linalg.norm(R, 2)))
        plain.append(float(np.abs(res).max()))
    return ResolventProbe(z, eps_list, tuple(weighted), tuple(plain), spacing)
