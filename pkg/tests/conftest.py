import pytest

from lanshock import collision, kinetic, ns_shock
from lanshock.basis import build_basis


@pytest.fixture(scope="session")
def basis4():
    return build_basis(4, 12)


@pytest.fixture(scope="session")
def ops4(basis4):
    return collision.assemble_operators(basis4, kappa=0.0)


@pytest.fixture(scope="session")
def law4(ops4):
    return ns_shock.TransportLaw.from_operators(ops4, 0.0)


@pytest.fixture(scope="session")
def profile_001(law4):
    return ns_shock.solve_profile(0.01, law4, N_x=2001)


@pytest.fixture(scope="session")
def profile_002(law4):
    return ns_shock.solve_profile(0.02, law4, N_x=801)


@pytest.fixture(scope="session")
def profiles_sweep(law4):
    return {eps: ns_shock.solve_profile(eps, law4, N_x=1001) for eps in (0.01, 0.02, 0.04)}


@pytest.fixture(scope="session")
def apx_002(profile_002, ops4):
    return kinetic.build_approximate_solution(profile_002, ops4)


@pytest.fixture(scope="session")
def kinetic_002(apx_002, ops4):
    """Shared linear+nonlinear solve at eps = 0.02."""
    norms = kinetic.NormSuite(ops4, apx_002.grid, 0.02)
    rep = kinetic.residual_E_NS(apx_002, norms)
    opA = kinetic.assemble_steady_operator(apx_002)
    fp = kinetic.nonlinear_solve(apx_002, opA, rep.z, norms)
    return {"norms": norms, "rep": rep, "opA": opA, "fp": fp}
