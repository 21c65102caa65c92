"""Brute-force truncated Fock-space oracle.

The field is reduced to its s-wave sector: because the form factor is
spherically symmetric and enters only through rank-one couplings, every
observable computed here depends on the field through the radial measure
``4 pi k^2 dk``.  The half-line ``(0, k_max)`` is discretised by a
quadrature rule with nodes ``k_j`` and weights ``w_j``; mode ``j`` has
energy ``omega(k_j)`` and coupling ``sqrt(4 pi w_j) k_j f(k_j)``, so that
``sum_j coupling_j^2`` converges to ``||f||^2 = 4 pi int k^2 f^2 dk``.

Basis states are ``phi_level (x) |n_1, ..., n_M>`` with total boson number
at most ``N_max``.  Index layout: ``level * n_fock + fock_index`` where
level 0 is the atomic ground state phi_0 and level 1 the excited phi_1.
"""

from dataclasses import dataclass, field
from functools import cached_property
import itertools
import math
from math import comb
from typing import Dict, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ContourCrossesSpectrum,
    DimensionOverflow,
    EigensolverFailure,
    EtaTooSmall,
    InvalidGrid,
    NumericalError,
    ValidationError,
)
from .model import delta_gap, form_factor, omega
from .quadrature import DEFAULT_CONFIG, integrate_adaptive
from .scattering import pair_kernel

__all__ = [
    "RadialGrid",
    "DiscretizedField",
    "FockBasis",
    "AssembledHamiltonian",
    "EigenDecomposition",
    "Profile",
    "STATIC",
    "DYNAMIC",
    "build_grid",
    "discretize_field",
    "assemble",
    "eigendecompose",
    "ground_state",
    "ground_projector_contour",
    "survival_oracle",
    "correlator",
    "tmatrix_oracle",
    "level_spacing",
    "default_eta",
    "revival_horizon",
    "sigma1",
]

DENSE_LIMIT = 4000
DEFAULT_DIM_CAP = 200_000


@dataclass(frozen=True)
class Profile:
    name: str
    M: int
    N_max: int
    k_max: float


STATIC = Profile("static", M=40, N_max=2, k_max=6.0)
DYNAMIC = Profile("dynamic", M=200, N_max=1, k_max=6.0)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    weights: np.ndarray
    k_max: float
    scheme: str

    @property
    def M(self):
        return self.nodes.size

    def integrate(self, values):
        return float(np.dot(self.weights, values))


def build_grid(M, k_max, scheme="gauss-legendre"):
    """Quadrature nodes/weights on (0, k_max).

    ``scheme`` is ``"gauss-legendre"`` (default) or ``"uniform"`` (midpoint
    rule with spacing k_max/M, used for finite-difference work).
    """
    if int(M) != M or M < 2:
        raise InvalidGrid(f"need at least two nodes, got M={M}")
    if not (k_max > 0 and math.isfinite(k_max)):
        raise InvalidGrid(f"k_max must be positive and finite, got {k_max}")
    M = int(M)
    if scheme == "gauss-legendre":
        x, w = np.polynomial.legendre.leggauss(M)
        nodes = 0.5 * k_max * (x + 1.0)
        weights = 0.5 * k_max * w
    elif scheme == "uniform":
        h = k_max / M
        nodes = (np.arange(M) + 0.5) * h
        weights = np.full(M, h)
    else:
        raise InvalidGrid(f"unknown grid scheme {scheme!r}")
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return RadialGrid(nodes, weights, float(k_max), scheme)


def _form_factor_dilated(r, params):
    """(r d/dr + 3/2) f(r): the real function -i D f for the radial form factor."""
    w = np.hypot(r, params.m)
    f = form_factor(r, params)
    df = f * (-2.0 * r / params.lambda_uv ** 2 - r / (2.0 * w * w))
    return r * df + 1.5 * f


@dataclass(frozen=True, eq=False)
class DiscretizedField:
    grid: RadialGrid
    omegas: np.ndarray
    couplings: np.ndarray
    dilation_couplings: np.ndarray

    @property
    def norm_sq(self):
        return float(np.sum(self.couplings ** 2))


def discretize_field(params, grid):
    k, w = grid.nodes, grid.weights
    amp = np.sqrt(4.0 * np.pi * w) * k
    return DiscretizedField(
        grid=grid,
        omegas=np.asarray(omega(k, params)),
        couplings=amp * np.asarray(form_factor(k, params)),
        dilation_couplings=amp * _form_factor_dilated(k, params),
    )


def _fock_dimension(M, N_max):
    return sum(comb(M + n - 1, n) for n in range(N_max + 1))


class FockBasis:
    """Occupation-number basis with at most ``N_max`` bosons in ``M`` modes, times two atomic levels.

    A Fock state is stored as the sorted tuple of occupied mode indices
    (with repetition), e.g. ``(3, 3, 7)`` means n_3 = 2, n_7 = 1.
    """

    def __init__(self, M, N_max, dim_cap=DEFAULT_DIM_CAP):
        if N_max < 0:
            raise ValidationError("N_max must be >= 0")
        self.M = int(M)
        self.N_max = int(N_max)
        dim = 2 * _fock_dimension(self.M, self.N_max)
        if dim > dim_cap:
            raise DimensionOverflow(f"basis dimension {dim} exceeds cap {dim_cap}")
        states = []
        for n in range(self.N_max + 1):
            states.extend(itertools.combinations_with_replacement(range(self.M), n))
        self.fock_states = tuple(states)
        self.fock_index: Dict[Tuple[int, ...], int] = {s: i for i, s in enumerate(states)}
        self.n_fock = len(states)
        self.dim = 2 * self.n_fock

    def index(self, level, occ=()):
        return level * self.n_fock + self.fock_index[tuple(sorted(occ))]

    def state(self, idx):
        level, f = divmod(idx, self.n_fock)
        return level, self.fock_states[f]

    @cached_property
    def boson_number(self):
        n = np.array([len(s) for s in self.fock_states])
        return np.concatenate([n, n])

    @cached_property
    def level(self):
        return np.repeat([0, 1], self.n_fock)

    def occupation_sum(self, mode_values):
        """Diagonal of dGamma(v) = sum_j v_j n_j over the full basis."""
        vals = np.array([sum(mode_values[j] for j in s) for s in self.fock_states], dtype=float)
        return np.concatenate([vals, vals])

    def vacuum(self, level):
        v = np.zeros(self.dim)
        v[self.index(level)] = 1.0
        return v


def sigma1(vec, basis):
    """Apply sigma_1 (x) 1: swap the two atomic levels."""
    v = np.asarray(vec)
    return v.reshape(2, basis.n_fock)[::-1].reshape(-1).copy()


def _field_operator(basis, couplings):
    """Sparse sigma_1 (x) Phi(c) with Phi(c) = sum_j c_j (a_j + a_j^dagger)."""
    rows, cols, vals = [], [], []
    nf = basis.n_fock
    for src, occ in enumerate(basis.fock_states):
        if len(occ) >= basis.N_max:
            continue
        for j in range(basis.M):
            if couplings[j] == 0.0:
                continue
            n_j = occ.count(j)
            dst = basis.fock_index[tuple(sorted(occ + (j,)))]
            amp = couplings[j] * math.sqrt(n_j + 1)
            for level in (0, 1):
                a = level * nf + src
                b = (1 - level) * nf + dst
                rows += [a, b]
                cols += [b, a]
                vals += [amp, amp]
    return sp.coo_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim)).tocsr()


@dataclass(frozen=True, eq=False)
class AssembledHamiltonian:
    matrix: sp.csr_matrix
    params: object
    field: DiscretizedField
    basis: FockBasis
    N_max: int
    coupling_operator: sp.csr_matrix

    @property
    def dim(self):
        return self.basis.dim

    @property
    def grid(self):
        return self.field.grid

    def toarray(self):
        return self.matrix.toarray()

    def dilation_coupling_operator(self):
        """sigma_1 (x) Phi(-i D f) on the same basis (no factor g)."""
        return _field_operator(self.basis, self.field.dilation_couplings)

    def free_diagonal(self):
        e = np.where(self.basis.level == 1, self.params.e1, self.params.e0)
        return e + self.basis.occupation_sum(self.field.omegas)

    def manifest(self):
        return {
            "params": self.params.to_dict(),
            "grid": {"M": self.grid.M, "k_max": self.grid.k_max, "scheme": self.grid.scheme},
            "N_max": self.N_max,
            "dim": self.dim,
            "nnz": int(self.matrix.nnz),
        }


def assemble(params, grid, N_max, dim_cap=DEFAULT_DIM_CAP):
    """Sparse H = K + sum_j omega_j n_j + g sigma_1 (x) sum_j c_j (a_j + a_j^dagger)."""
    if N_max < 1:
        raise ValidationError("N_max must be >= 1")
    basis = FockBasis(grid.M, N_max, dim_cap)
    fld = discretize_field(params, grid)
    V = _field_operator(basis, fld.couplings)
    e = np.where(basis.level == 1, params.e1, params.e0)
    diag = e + basis.occupation_sum(fld.omegas)
    H = (sp.diags(diag) + params.g * V).tocsr()
    H.sum_duplicates()
    H.sort_indices()
    return AssembledHamiltonian(H, params, fld, basis, N_max, V)


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float
    orthonormality: float

    @property
    def ground(self):
        return self.eigenvalues[0], self.eigenvectors[:, 0]

    def weights(self, vec):
        """|<n|vec>|^2 for every eigenvector n."""
        return np.abs(self.eigenvectors.T @ vec) ** 2


def eigendecompose(H, check=True):
    """Dense symmetric eigendecomposition (dimension up to DENSE_LIMIT)."""
    if H.dim > DENSE_LIMIT:
        raise DimensionOverflow(
            f"dense eigendecomposition limited to dim <= {DENSE_LIMIT}; got {H.dim}"
        )
    A = H.toarray()
    try:
        E, U = sla.eigh(A)
    except sla.LinAlgError as exc:
        raise EigensolverFailure(str(exc)) from exc
    norm = max(np.abs(E).max(), 1e-300)
    res = float(np.abs(A @ U - U * E).max() / norm)
    orth = float(np.abs(U.T @ U - np.eye(U.shape[1])).max())
    if check and (res > 1e-10 or orth > 1e-10):
        raise EigensolverFailure(f"eigenpair residual {res:.2e}, orthonormality {orth:.2e}")
    return EigenDecomposition(E, U, res, orth)


def _fix_sign(vec, basis):
    ref = vec[basis.index(0)]
    return -vec if ref < 0 else vec


def ground_state(H, decomposition=None):
    """Lowest eigenpair (lambda0_num, Psi0) with <phi_0 (x) Omega, Psi0> >= 0."""
    if decomposition is None and H.dim > DENSE_LIMIT:
        try:
            vals, vecs = spla.eigsh(H.matrix, k=1, which="SA", tol=1e-12)
        except spla.ArpackError as exc:
            raise EigensolverFailure(str(exc)) from exc
        lam, vec = float(vals[0]), vecs[:, 0]
    else:
        dec = decomposition or eigendecompose(H)
        lam, vec = dec.ground
        lam = float(lam)
    vec = _fix_sign(np.array(vec, dtype=float), H.basis)
    if lam > H.params.e0 + 1e-12 * max(1.0, abs(H.params.e1)):
        raise EigensolverFailure(f"ground energy {lam} above e0 violates the variational bound")
    return lam, vec


def ground_projector_contour(H, n_nodes=64, radius=None, cond_limit=1e12):
    """P_0 (phi_0 (x) Omega) with P_0 = (-2 pi i)^-1 oint (H - z)^-1 dz.

    The circle is centred at e0 with radius m/4 (default) and discretised by
    the trapezoidal rule, one sparse LU solve per node.  Returns the
    unnormalised projected vector.
    """
    params = H.params
    R = params.m / 4.0 if radius is None else float(radius)
    if n_nodes < 2:
        raise ValidationError("need at least two contour nodes")
    v = H.basis.vacuum(0).astype(complex)
    A = H.matrix.tocsc().astype(complex)
    eye = sp.identity(H.dim, dtype=complex, format="csc")
    acc = np.zeros(H.dim, dtype=complex)
    normA = spla.norm(A, 1) + R
    # nodes come in conjugate pairs for real H; solve the upper half only
    ks = range(n_nodes // 2 + 1) if n_nodes % 2 == 0 else range(n_nodes)
    for k in ks:
        phase = np.exp(2j * np.pi * k / n_nodes)
        z = params.e0 + R * phase
        lu = spla.splu(A - z * eye)
        x = lu.solve(v)
        inv_norm = spla.onenormest(
            spla.LinearOperator(A.shape, matvec=lu.solve, rmatvec=lambda y: lu.solve(y, trans="H"), dtype=complex)
        )
        if normA * inv_norm > cond_limit:
            raise ContourCrossesSpectrum(
                f"shifted solve at z={z:.4g} has condition estimate {normA * inv_norm:.2e}"
            )
        term = phase * x
        if n_nodes % 2 == 0 and 0 < k < n_nodes // 2:
            acc += term + np.conj(term)
        else:
            acc += term
    psi = -(R / n_nodes) * acc
    return psi.real


def level_spacing(grid_or_field, params):
    """Mean one-boson level spacing of omega_j inside [e1 - delta/2, e1 + delta/2]."""
    fld = grid_or_field
    if isinstance(fld, RadialGrid):
        fld = discretize_field(params, fld)
    d = delta_gap(params)
    w = np.sort(fld.omegas)
    sel = w[(w >= params.e1 - d / 2) & (w <= params.e1 + d / 2)]
    if sel.size < 2:
        raise ValidationError("grid too coarse: fewer than two modes near e1")
    return float(np.mean(np.diff(sel)))


DEFAULT_ETA = 1e-4
ETA_FLOOR = 1e-8


def default_eta(grid_or_field=None, params=None):
    """Regulator for the time integrals of the T-matrix oracle.

    The radial integral against a smooth packet already averages over the
    discrete spectrum, so eta only has to be small against the resonance
    width; it is not tied to the level spacing.
    """
    return DEFAULT_ETA


def revival_horizon(grid_or_field, params):
    """Half the revival time 2 pi / spacing of the discretised continuum."""
    return math.pi / level_spacing(grid_or_field, params)


def _check_horizon(H, times, enforce):
    if not enforce:
        return
    horizon = revival_horizon(H.field, H.params)
    if np.max(np.abs(times), initial=0.0) > horizon:
        raise ValidationError(
            f"times beyond half the revival time ({horizon:.3g}) of the discretised continuum"
        )


def _spectral_evolution(dec, vec, times, sign):
    p = dec.weights(vec)
    phases = np.exp(-1j * sign * np.outer(times, dec.eigenvalues))
    return phases @ p


def _krylov_evolution(H, vec, times, sign):
    out = []
    A = (-1j * sign) * H.matrix.astype(complex)
    v0 = vec.astype(complex)
    for t in times:
        out.append(np.vdot(v0, spla.expm_multiply(A * t, v0)))
    return np.array(out)


def survival_oracle(H, times, decomposition=None, enforce_horizon=True):
    """a(t) = <phi_1 (x) Omega, exp(-itH) phi_1 (x) Omega> on a time grid.

    Returns a :class:`sblab.dynamics.SurvivalCurve` tagged ``"oracle"``.
    """
    from .dynamics import SurvivalCurve

    times = np.asarray(times, dtype=float)
    _check_horizon(H, times, enforce_horizon)
    phi1 = H.basis.vacuum(1)
    if decomposition is None and H.dim > DENSE_LIMIT:
        amps = _krylov_evolution(H, phi1, times, 1)
    else:
        dec = decomposition or eigendecompose(H)
        amps = _spectral_evolution(dec, phi1, times, 1)
    return SurvivalCurve(tuple(times.tolist()), tuple(complex(a) for a in amps), "oracle")


def correlator(H, psi0, t, sign=1, decomposition=None):
    """<sigma_1 Psi0, exp(-+ i t H) sigma_1 Psi0> for normalised Psi0 (sign=+1 gives exp(-itH))."""
    psi0 = np.asarray(psi0, dtype=float)
    v = sigma1(psi0, H.basis)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    s = 1 if sign in (1, "+", "-itH") else -1
    if decomposition is None and H.dim > DENSE_LIMIT:
        out = _krylov_evolution(H, v, times, s)
    else:
        out = _spectral_evolution(decomposition or eigendecompose(H), v, times, s)
    return complex(out[0]) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class TMatrixOracleResult:
    value: complex
    T1: complex
    T2: complex
    eta: float
    spacing: float


def tmatrix_oracle(H, psi0, h, l, eta=None, lambda0_num=None, decomposition=None,
                   config=None, weight_floor=1e-14):
    """Spectral evaluation of T(h, l) = 2 pi ||Psi0||^-2 (T1 - T2).

    With ``p_n = |<n|sigma_1 Psi0>|^2 / ||Psi0||^2`` the time integrals are done
    per eigenvalue with an exp(-eta t) regulator::

        T1 = i g^2 sum_n p_n int G(r) / (omega(r) + lambda0 - E_n + i eta) dr
        T2 = i g^2 sum_n p_n int G(r) / (omega(r) - lambda0 + E_n + i eta) dr

    The norm of Psi0 cancels, so normalised or contour-projected ground
    states give the same value.  Breakpoints at the near-pole radius keep the
    cost flat as eta shrinks; the result is stable to ~1e-3 relative between
    eta = 1e-4 and 1e-6.
    """
    params = H.params
    spacing = level_spacing(H.field, params)
    if eta is None:
        eta = DEFAULT_ETA
    if not eta >= ETA_FLOOR:
        raise EtaTooSmall(f"eta={eta:.3g} below the quadrature floor {ETA_FLOOR:g}")
    dec = decomposition or eigendecompose(H)
    psi0 = np.asarray(psi0, dtype=float)
    if lambda0_num is None:
        lambda0_num = float(psi0 @ (H.matrix @ psi0) / (psi0 @ psi0))
    g2 = params.g ** 2
    if g2 == 0:
        return TMatrixOracleResult(0j, 0j, 0j, eta, spacing)
    v = sigma1(psi0, H.basis)
    p = dec.weights(v) / float(v @ v)
    G = pair_kernel(h, l, params)
    if G.empty:
        return TMatrixOracleResult(0j, 0j, 0j, eta, spacing)
    config = config or DEFAULT_CONFIG
    t1, t2 = [], []
    for E, pn in zip(dec.eigenvalues, p):
        if pn < weight_floor:
            continue
        f1 = lambda r, E=E: G(r) / (omega(r, params) + lambda0_num - E + 1j * eta)
        f2 = lambda r, E=E: G(r) / (omega(r, params) - lambda0_num + E + 1j * eta)
        marks = []
        w_pole = E - lambda0_num
        if w_pole > params.m:
            r_pole = math.sqrt(w_pole ** 2 - params.m ** 2)
            marks = [r_pole + k * eta for k in (-10.0, -1.0, 0.0, 1.0, 10.0)]
        r1 = integrate_adaptive(f1, G.support, config, points=marks)
        r2 = integrate_adaptive(f2, G.support, config)
        if not (r1.converged and r2.converged):
            raise NumericalError("T-matrix oracle radial integral did not converge")
        t1.append(pn * complex(r1.value))
        t2.append(pn * complex(r2.value))
    T1 = 1j * g2 * complex(math.fsum(z.real for z in t1), math.fsum(z.imag for z in t1))
    T2 = 1j * g2 * complex(math.fsum(z.real for z in t2), math.fsum(z.imag for z in t2))
    return TMatrixOracleResult(2.0 * math.pi * (T1 - T2), T1, T2, eta, spacing)
