import functools

import pytest

from sblab import reference_params
from sblab.fockoracle import DYNAMIC, STATIC, assemble, build_grid, eigendecompose, ground_state


@functools.lru_cache(maxsize=None)
def oracle(profile_name, g):
    """Assembled Hamiltonian, eigendecomposition and ground pair, cached per (profile, g)."""
    profile = {"static": STATIC, "dynamic": DYNAMIC}[profile_name]
    H = assemble(reference_params(g), build_grid(profile.M, profile.k_max), profile.N_max)
    dec = eigendecompose(H)
    lam, psi = ground_state(H, dec)
    return H, dec, lam, psi


@pytest.fixture
def ref():
    return reference_params(0.05)


@pytest.fixture(scope="session")
def shift():
    from sblab import level_shift

    return level_shift(reference_params())


ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Store and print one acceptance verdict."""
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
