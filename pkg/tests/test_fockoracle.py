import itertools
import math

import numpy as np
import pytest
from scipy.special import comb

from conftest import oracle
from sblab import reference_params
from sblab.errors import (
    ContourCrossesSpectrum,
    DimensionOverflow,
    EtaTooSmall,
    InvalidGrid,
    ValidationError,
)
from sblab.fockoracle import (
    FockBasis,
    _krylov_evolution,
    _spectral_evolution,
    assemble,
    build_grid,
    correlator,
    discretize_field,
    eigendecompose,
    ground_projector_contour,
    ground_state,
    level_spacing,
    revival_horizon,
    sigma1,
    survival_oracle,
    tmatrix_oracle,
)
from sblab.model import form_factor, omega
from sblab.quadrature import integrate_adaptive
from sblab.scattering import WavePacket


def test_two_point_rule():
    grid = build_grid(2, 1.0)
    np.testing.assert_allclose(grid.nodes, [0.5 - 1 / (2 * math.sqrt(3)), 0.5 + 1 / (2 * math.sqrt(3))], rtol=1e-15)
    assert grid.integrate(grid.nodes ** 2) == pytest.approx(1 / 3, abs=1e-15)
    assert grid.integrate(grid.nodes ** 3) == pytest.approx(1 / 4, abs=1e-15)


@pytest.mark.parametrize("scheme", ["gauss-legendre", "uniform"])
def test_grid_nodes_positive_and_increasing(scheme):
    grid = build_grid(37, 6.0, scheme)
    assert np.all(grid.nodes > 0) and np.all(np.diff(grid.nodes) > 0) and np.all(grid.weights > 0)
    assert grid.weights.sum() == pytest.approx(6.0, rel=1e-14)


@pytest.mark.parametrize("args", [(1, 6.0), (2.5, 6.0), (10, 0.0), (10, math.inf), (10, 6.0, "chebyshev")])
def test_invalid_grids(args):
    with pytest.raises(InvalidGrid):
        build_grid(*args)


def test_discrete_field_norm_converges(ref):
    exact = integrate_adaptive(lambda r: 4 * np.pi * r * r * form_factor(r, ref) ** 2, (0.0, 6.0)).value
    for scheme in ("gauss-legendre", "uniform"):
        errs = [abs(discretize_field(ref, build_grid(M, 6.0, scheme)).norm_sq - exact) for M in (20, 40, 80)]
        assert errs[0] > errs[1] > errs[2]
    tail = integrate_adaptive(lambda r: 4 * np.pi * r * r * form_factor(r, ref) ** 2, (6.0, math.inf)).value
    assert tail < 2e-7


def test_basis_dimension_and_index_maps():
    for M, N in [(1, 1), (3, 2), (5, 2), (4, 3)]:
        b = FockBasis(M, N)
        assert b.dim == 2 * sum(comb(M + n - 1, n, exact=True) for n in range(N + 1))
        for idx in range(b.dim):
            level, occ = b.state(idx)
            assert b.index(level, occ) == idx
        assert len(set(b.fock_states)) == b.n_fock


def test_dimension_cap():
    with pytest.raises(DimensionOverflow):
        FockBasis(200, 2, dim_cap=1000)


def test_single_mode_hand_assembly(ref):
    grid = build_grid(2, 1.0)
    grid1 = type(grid)(grid.nodes[:1], grid.weights[:1], 1.0, "gauss-legendre")
    p = reference_params(0.3)
    H = assemble(p, grid1, 1).toarray()
    k, w = grid1.nodes[0], grid1.weights[0]
    c = math.sqrt(4 * math.pi * w) * k * form_factor(k, p)
    om = omega(k, p)
    # basis order: (phi0, vac), (phi0, 1 boson), (phi1, vac), (phi1, 1 boson)
    expected = np.array(
        [
            [0.0, 0.0, 0.0, p.g * c],
            [0.0, om, p.g * c, 0.0],
            [0.0, p.g * c, p.e1, 0.0],
            [p.g * c, 0.0, 0.0, p.e1 + om],
        ]
    )
    np.testing.assert_allclose(H, expected, rtol=1e-15, atol=0)


def test_matrix_elements_carry_occupation_factor(ref):
    p = reference_params(0.2)
    H = assemble(p, build_grid(3, 6.0), 2)
    fld, b = H.field, H.basis
    A = H.toarray()
    i = b.index(0, (1,))
    j = b.index(1, (1, 1))
    assert A[i, j] == pytest.approx(p.g * fld.couplings[1] * math.sqrt(2), rel=1e-15)
    assert A[b.index(1, (0,)), b.index(0, (0, 2))] == pytest.approx(p.g * fld.couplings[2], rel=1e-15)


def test_structure_symmetry_and_parity(ref):
    H = assemble(ref, build_grid(12, 6.0), 2)
    A = H.toarray()
    assert np.array_equal(A, A.T)
    np.testing.assert_array_equal(np.diag(A), H.free_diagonal())
    b = H.basis
    rows, cols = np.nonzero(A - np.diag(np.diag(A)))
    assert np.all(b.level[rows] != b.level[cols])
    assert np.all(np.abs(b.boson_number[rows] - b.boson_number[cols]) == 1)
    parity = (b.level + b.boson_number) % 2
    assert np.all(parity[rows] == parity[cols])


def test_free_spectrum_at_zero_coupling():
    p = reference_params(0.0)
    H = assemble(p, build_grid(6, 6.0), 2)
    A = H.toarray()
    assert not np.any(A - np.diag(np.diag(A)))
    w = H.field.omegas
    expected = []
    for e in (p.e0, p.e1):
        for n in range(3):
            for occ in itertools.combinations_with_replacement(range(6), n):
                expected.append(e + sum(w[j] for j in occ))
    np.testing.assert_allclose(eigendecompose(H).eigenvalues, np.sort(expected), atol=1e-12)


def test_eigendecomposition_quality():
    H, dec, _, _ = oracle("static", 0.04)
    assert dec.residual <= 1e-10 and dec.orthonormality <= 1e-10
    assert np.all(np.diff(dec.eigenvalues) >= 0)


def test_ground_state_without_coupling():
    H = assemble(reference_params(0.0), build_grid(10, 6.0), 2)
    lam, psi = ground_state(H)
    assert lam == 0.0
    np.testing.assert_array_equal(psi, H.basis.vacuum(0))


def test_variational_bound_and_monotonicity():
    grid = build_grid(20, 6.0)
    lams = [ground_state(assemble(reference_params(g), grid, 2))[0] for g in (0.0, 0.02, 0.05, 0.1)]
    assert lams[0] == 0.0
    assert all(b < a for a, b in zip(lams, lams[1:]))


def test_grid_refinement_is_within_remainder_budget():
    _, _, lam40, _ = oracle("static", 0.04)
    lam80, _ = ground_state(assemble(reference_params(0.04), build_grid(80, 6.0), 2))
    from sblab import gamma0_groundshift

    budget = abs(lam40 + 0.04 ** 2 * gamma0_groundshift(reference_params()))
    assert abs(lam80 - lam40) < budget


def test_contour_projector_without_coupling():
    H = assemble(reference_params(0.0), build_grid(10, 6.0), 2)
    psi = ground_projector_contour(H, n_nodes=32)
    np.testing.assert_allclose(psi, H.basis.vacuum(0), atol=1e-14)


def test_contour_projector_converges_geometrically():
    H, _, _, psi = oracle("static", 0.05)
    errs = []
    for n in (4, 8, 16):
        v = ground_projector_contour(H, n_nodes=n)
        errs.append(np.linalg.norm(v / np.linalg.norm(v) - psi))
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[0] < 0.05 and errs[2] / errs[1] < 0.05


def test_contour_norm_is_close_to_one():
    H, _, _, _ = oracle("static", 0.05)
    assert np.linalg.norm(ground_projector_contour(H)) ** 2 == pytest.approx(1.0, abs=5e-3)


def test_contour_through_an_eigenvalue_is_refused():
    H = assemble(reference_params(0.05), build_grid(20, 6.0), 1)
    E = eigendecompose(H).eigenvalues
    with pytest.raises(ContourCrossesSpectrum):
        ground_projector_contour(H, radius=E[1], n_nodes=64)


def test_survival_without_coupling():
    H = assemble(reference_params(0.0), build_grid(30, 6.0), 1)
    t = np.linspace(0, 20, 41)
    # phi_1 (x) Omega is an eigenvector, so no revival limit applies
    a = np.array(survival_oracle(H, t, enforce_horizon=False).amplitudes)
    np.testing.assert_allclose(a, np.exp(-2.5j * t), atol=1e-12)


def test_survival_unitarity():
    H, dec, _, _ = oracle("dynamic", 0.1)
    phi1 = H.basis.vacuum(1)
    assert dec.weights(phi1).sum() == pytest.approx(1.0, abs=1e-10)
    a = np.array(survival_oracle(H, np.linspace(0, 60, 121), decomposition=dec).amplitudes)
    assert a[0] == pytest.approx(1.0, abs=1e-10)
    assert np.all(np.abs(a) <= 1 + 1e-10)


def test_survival_horizon_is_enforced():
    H, dec, _, _ = oracle("dynamic", 0.1)
    T = revival_horizon(H.field, H.params)
    assert T == pytest.approx(math.pi / level_spacing(H.field, H.params))
    with pytest.raises(ValidationError):
        survival_oracle(H, [0.0, 1.01 * T], decomposition=dec)


def test_krylov_and_spectral_propagation_agree():
    H = assemble(reference_params(0.1), build_grid(40, 6.0), 1)
    dec = eigendecompose(H)
    t = np.linspace(0, 10, 6)
    v = H.basis.vacuum(1)
    np.testing.assert_allclose(_krylov_evolution(H, v, t, 1), _spectral_evolution(dec, v, t, 1), atol=1e-10)


def test_correlator_basics():
    H, dec, lam, psi = oracle("dynamic", 0.05)
    assert correlator(H, psi, 0.0, decomposition=dec) == pytest.approx(1.0, abs=1e-12)
    t = np.linspace(0, 5, 11)
    fwd = correlator(H, psi, t, +1, decomposition=dec)
    back = correlator(H, psi, t, -1, decomposition=dec)
    np.testing.assert_allclose(back, np.conj(fwd), atol=1e-13)
    np.testing.assert_allclose(sigma1(sigma1(psi, H.basis), H.basis), psi)


def test_correlator_reduces_to_free_phase():
    H = assemble(reference_params(0.0), build_grid(30, 6.0), 1)
    lam, psi = ground_state(H)
    t = np.linspace(0, 10, 11)
    np.testing.assert_allclose(correlator(H, psi, t, +1), np.exp(-2.5j * t), atol=1e-12)
    np.testing.assert_allclose(correlator(H, psi, t, -1), np.exp(2.5j * t), atol=1e-12)


def test_correlator_tracks_survival_to_order_g():
    t = np.linspace(0, 30, 61)
    ratios = []
    for g in (0.025, 0.05, 0.1):
        H, dec, lam, psi = oracle("dynamic", g)
        c = correlator(H, psi, t, decomposition=dec)
        s = np.array(survival_oracle(H, t, decomposition=dec).amplitudes)
        ratios.append(np.abs(c - s).max() / g)
    assert max(ratios) < 1.0
    assert ratios[0] < ratios[1] < ratios[2]


ON = WavePacket.bump(2.0, 2.6)
LOW = WavePacket.bump(0.5, 0.9)


def test_tmatrix_without_coupling():
    H = assemble(reference_params(0.0), build_grid(50, 6.0), 1)
    lam, psi = ground_state(H)
    assert tmatrix_oracle(H, psi, ON, ON).value == 0


def test_tmatrix_independent_of_state_normalisation():
    H, dec, lam, psi = oracle("dynamic", 0.05)
    a = tmatrix_oracle(H, psi, ON, ON, lambda0_num=lam, decomposition=dec)
    b = tmatrix_oracle(H, 3.7 * psi, ON, ON, lambda0_num=lam, decomposition=dec)
    assert b.value == pytest.approx(a.value, rel=1e-13)
    assert a.value == pytest.approx(2 * math.pi * (a.T1 - a.T2), rel=1e-15)


def test_tmatrix_off_resonance_suppressed():
    H, dec, lam, psi = oracle("dynamic", 0.1)
    on = tmatrix_oracle(H, psi, ON, ON, lambda0_num=lam, decomposition=dec).value
    low = tmatrix_oracle(H, psi, LOW, LOW, lambda0_num=lam, decomposition=dec).value
    assert abs(on) >= 10 * abs(low)


def test_tmatrix_stable_in_regulator():
    H, dec, lam, psi = oracle("dynamic", 0.05)
    a = tmatrix_oracle(H, psi, ON, ON, eta=1e-4, lambda0_num=lam, decomposition=dec).value
    b = tmatrix_oracle(H, psi, ON, ON, eta=1e-6, lambda0_num=lam, decomposition=dec).value
    assert abs(a - b) <= 2e-3 * abs(b)


def test_tmatrix_regulator_floor():
    H, dec, lam, psi = oracle("dynamic", 0.05)
    with pytest.raises(EtaTooSmall):
        tmatrix_oracle(H, psi, ON, ON, eta=1e-10, decomposition=dec)


def test_manifest_fields():
    H, _, _, _ = oracle("static", 0.02)
    m = H.manifest()
    assert m["N_max"] == 2 and m["grid"]["M"] == 40 and m["dim"] == 1722
    assert m["params"]["g"] == 0.02
