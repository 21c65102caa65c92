import numpy as np
import pytest

from sblab import reference_params, xi
from sblab.errors import EmptyCutoffRange, EpsBelowSpacingFloor, SupportTouchesBoundary, ValidationError
from sblab.fockoracle import DYNAMIC, STATIC, Profile, assemble, build_grid
from sblab.model import ModelParams, omega
from sblab.mourre import (
    commutator_check,
    compressed_hamiltonian,
    dilation_matrix,
    mourre_constant,
    weighted_resolvent_probe,
)


def gaussian(r):
    return np.exp(-((r - 3.0) / 0.4) ** 2)


@pytest.fixture(scope="module")
def report0():
    return mourre_constant(reference_params(0.0))


@pytest.fixture(scope="module")
def report05():
    return mourre_constant(reference_params(0.05))


@pytest.mark.parametrize("scheme", ["uniform", "gauss-legendre"])
def test_generator_is_skew(scheme):
    D = dilation_matrix(build_grid(60, 6.0, scheme))
    assert np.array_equal(D.generator, -D.generator.T)
    assert np.allclose(D.matrix, D.matrix.conj().T, atol=0)


def test_raw_skew_defect_is_second_order():
    defects = []
    for M in (100, 200, 400):
        grid = build_grid(M, 6.0, "uniform")
        D = dilation_matrix(grid)
        defects.append(D.skew_defect(np.sqrt(grid.weights) * gaussian(grid.nodes)))
    ratios = [a / b for a, b in zip(defects, defects[1:])]
    assert all(3.5 < q < 4.5 for q in ratios)


def test_commutator_second_order(ref):
    errs = [commutator_check(gaussian, build_grid(M, 6.0, "uniform"), ref) for M in (200, 400, 800)]
    for a, b in zip(errs, errs[1:]):
        assert 3.3 <= a / b <= 4.7


def test_commutator_pointwise_symbol(ref):
    grid = build_grid(800, 6.0, "uniform")
    K = dilation_matrix(grid).generator
    r = grid.nodes
    c = np.sqrt(grid.weights) * gaussian(r)
    w = omega(r, ref)
    comm = K @ (w * c) - w * (K @ c)
    j = np.argmin(np.abs(r - 3.0))
    assert comm[j] / c[j] == pytest.approx(xi(r[j], ref), rel=1e-3)


def test_commutator_vanishes_for_heavy_field():
    grid = build_grid(400, 6.0, "uniform")
    norms = []
    for m in (10.0, 100.0, 1000.0):
        p = ModelParams(e1=m + 0.5, m=m, lambda_uv=2.0)
        K = dilation_matrix(grid).generator
        c = np.sqrt(grid.weights) * gaussian(grid.nodes)
        w = omega(grid.nodes, p)
        norms.append(np.linalg.norm(K @ (w * c) - w * (K @ c)))
        assert commutator_check(gaussian, grid, p) < 1e-3
    assert norms[0] > 5 * norms[1] > 25 * norms[2]


def test_commutator_needs_interior_support(ref):
    with pytest.raises(SupportTouchesBoundary):
        commutator_check(lambda r: np.exp(-r), build_grid(100, 6.0, "uniform"), ref)


def test_constant_at_zero_coupling(report0):
    p = reference_params(0.0)
    grid = build_grid(DYNAMIC.M, DYNAMIC.k_max)
    H = assemble(p, grid, 1)
    Hb, keep = compressed_hamiltonian(H)
    from sblab.dynamics import chi

    diag = np.diag(Hb)
    in_range = chi(diag, p) > 1e-8
    per_state = H.basis.occupation_sum(xi(grid.nodes, p))[keep][in_range]
    assert report0.alpha_num == pytest.approx(per_state.min(), rel=1e-12)
    assert report0.alpha_num > 0


def test_positivity_and_degradation(report0, report05):
    report10 = mourre_constant(reference_params(0.1))
    assert report05.alpha_num > 0 and report10.alpha_num > 0
    assert report10.alpha_num <= report05.alpha_num + 1e-9
    assert report0.alpha_num >= report05.alpha_num - 0.05 * report05.C_slack


def test_report_contents(report05):
    data = report05.to_json()
    assert data["reference_bound"] == pytest.approx(0.05 - report05.C_slack * 0.05)
    assert data["chi_window"] == [2.125, 2.875]
    assert data["metadata"]["M"] == 200 and data["metadata"]["N_max"] == 1
    assert 0 < report05.b_min <= report05.alpha_num
    assert report05.rank > 0


def test_free_commutator_bounds(ref):
    H = assemble(reference_params(0.0), build_grid(12, 6.0), 2)
    dxi = H.basis.occupation_sum(xi(H.grid.nodes, ref))
    hf = H.basis.occupation_sum(H.field.omegas)
    n = H.basis.boson_number
    assert np.all(dxi >= 0) and np.all(dxi <= hf + 1e-15)
    assert np.all(dxi >= hf - ref.m * n - 1e-12)


def test_empty_cutoff_range(ref):
    small = Profile("tiny", 20, 1, 1.0)
    with pytest.raises(EmptyCutoffRange):
        mourre_constant(ref, build_grid(small.M, small.k_max), small)


def test_one_boson_profile_required(ref):
    with pytest.raises(ValidationError):
        mourre_constant(ref, build_grid(10, 6.0), STATIC)


def test_probe_spacing_floor(ref):
    with pytest.raises(EpsBelowSpacingFloor):
        weighted_resolvent_probe(ref, build_grid(200, 6.0), DYNAMIC, eps_list=(0.2, 0.1, 0.05))


def test_probe_energy_window(ref):
    with pytest.raises(ValidationError):
        weighted_resolvent_probe(ref, build_grid(100, 6.0), DYNAMIC, z=ref.e1 + 0.2, eps_list=(0.5,))


def test_probe_large_eps_is_trivially_bounded(ref):
    pr = weighted_resolvent_probe(ref, build_grid(100, 6.0), DYNAMIC, eps_list=(1.0, 0.5))
    assert pr.weighted[0] <= 1.0
    for e, w, u in pr.rows():
        assert w <= u + 1e-12
        assert 0.99 / e <= u <= 1 / e


def test_weight_is_a_contraction():
    rho = dilation_matrix(build_grid(80, 6.0)).weight()
    assert np.linalg.norm(rho, 2) <= 1 + 1e-12
    assert np.allclose(rho, rho.T)
