import math

import numpy as np
import pytest

from lanshock import collision as cl
from lanshock.basis import WeightSpec, build_basis
from lanshock.cachefile import CacheMismatch, read_array, write_array


def test_kernel_family_invariants(basis4):
    fam = cl.assemble_kernel_fields(basis4, kappa=0.5)
    nodes = basis4.quadrature.nodes
    # phi z = 0 transfers to the convolved fields being PSD with the right tails
    for field in (fam.sigma, fam.sigma_R, fam.sigma_kappa):
        sym = np.max(np.abs(field - np.swapaxes(field, 0, 1)))
        assert sym < 1e-14
    evals = np.linalg.eigvalsh(np.moveaxis(fam.sigma, -1, 0))
    assert evals.min() > 0
    # kappa = 0 degeneracy
    fam0 = cl.assemble_kernel_fields(basis4, kappa=0.0)
    assert np.array_equal(fam0.sigma_kappa, fam0.sigma)
    # log-log slope of sigma^{ij} v_i v_j at large |v|
    r = np.linalg.norm(nodes, axis=1)
    svv = np.einsum("ijn,ni,nj->n", fam.sigma, nodes, nodes)
    from lanshock import radial

    rs = np.array([4.0, 6.0, 8.0])
    L = radial.psi1_ladders(rs, 2)
    vals = rs**2 * (L[1] + rs**2 * L[2])
    slope = np.polyfit(np.log(rs), np.log(vals), 1)[0]
    assert abs(slope + 1.0) <= 0.15
    # isotropy at the origin (evaluate the radial forms at r = 0)
    L0 = radial.psi1_ladders(np.array([0.0]), 2)
    assert L0[1][0] > 0


def test_phi_kernel_annihilates_z():
    z = np.array([[0.3, -1.2, 0.8], [2.0, 0.1, -0.4]])
    for hard in (False, True):
        phi = cl.phi_kernel(z, hard=hard)
        contracted = np.einsum("nij,nj->ni", phi, z)
        assert np.max(np.abs(contracted)) < 1e-14


def test_conservation_enforced(ops4):
    kv = ops4.kernel_vectors
    for G in (ops4.Gamma, ops4.Gamma_R):
        viol = np.einsum("kc,cab->kab", kv, G)
        num = np.sqrt(np.sum(viol**2, axis=0))
        den = np.sqrt(np.sum(G**2, axis=0))
        assert np.max(num - (1e-8 * den + 1e-12)) <= 0
    assert ops4.raw_conservation_violation < 1e-8


def test_L_structure(ops4):
    L = ops4.L
    assert np.max(np.abs(L - L.T)) <= 1e-10
    w, V = np.linalg.eigh(L)
    assert w[0] >= -1e-8
    gap = cl.spectral_gap(ops4)
    assert gap > 0
    small = np.abs(w) < gap * 1e-6
    assert int(np.sum(small)) == 5
    # subspace angle between the numerical kernel and the invariant span
    kv = ops4.kernel_vectors
    Vk = V[:, small]
    s = np.linalg.svd(kv @ Vk, compute_uv=False)
    angle = math.acos(min(s.min(), 1.0))
    assert angle <= 1e-6


def test_L_annihilates_sqrt_mu(ops4, basis4):
    e0 = np.zeros(basis4.size)
    e0[basis4.index_of((0, 0, 0))] = 1.0
    assert np.max(np.abs(ops4.L @ e0)) < 1e-8


def test_definitional_identity_L_from_gamma(ops4, basis4):
    rng = np.random.default_rng(0)
    g = rng.standard_normal(basis4.size)
    e0 = np.zeros(basis4.size)
    e0[basis4.index_of((0, 0, 0))] = 1.0
    rhs = -2.0 * np.einsum("cab,a,b->c", ops4.Gamma, e0, g)
    kv = ops4.kernel_vectors
    rhs = rhs - kv.T @ (kv @ rhs)  # L was kernel-pinned
    got = ops4.L @ g
    scale = np.max(np.abs(got))
    assert np.max(np.abs(got - rhs)) < 1e-8 * max(scale, 1.0)


def test_gamma_of_equilibrium_vanishes(ops4, basis4):
    e0 = np.zeros(basis4.size)
    e0[basis4.index_of((0, 0, 0))] = 1.0
    out = np.einsum("cab,a,b->c", ops4.Gamma, e0, e0)
    assert np.max(np.abs(out)) < 1e-9


def test_gamma_tensor_symmetrized(ops4):
    assert np.max(np.abs(ops4.Gamma - np.swapaxes(ops4.Gamma, 1, 2))) < 1e-14


def test_L_direct_assembly_agrees(ops4, basis4):
    Ld = cl.assemble_L_direct(basis4)
    kv = ops4.kernel_vectors
    Ld = Ld - kv.T @ (kv @ Ld)
    Ld = Ld - (Ld @ kv.T) @ kv
    Ld = 0.5 * (Ld + Ld.T)
    assert np.max(np.abs(Ld - ops4.L)) < 1e-10


def test_regularization_monotonicity(ops4):
    gaps = [cl.spectral_gap(ops4, "kappa", kappa=k) for k in (0.0, 0.1, 0.3, 0.6, 1.0)]
    assert all(g2 >= g1 - 1e-12 for g1, g2 in zip(gaps, gaps[1:]))


def test_L_at_shifted_center_finite_difference(ops4, basis4):
    """assemble at (1, 0, theta') equals L + O(|theta' - 1|), by FD oracle."""
    h = 0.05
    m_plus = cl.maxwellian_coefficients(basis4, 1.0, np.zeros(3), 1.0 + h)
    m_minus = cl.maxwellian_coefficients(basis4, 1.0, np.zeros(3), 1.0 - h)
    L_plus = ops4.linearized_at(m_plus)
    L_minus = ops4.linearized_at(m_minus)
    base = ops4.linearized_at(cl.maxwellian_coefficients(basis4, 1.0, np.zeros(3), 1.0))
    # perturbation size is O(h)
    assert np.linalg.norm(L_plus - base) < 5 * h * np.linalg.norm(base)
    # derivative by central differences is consistent at second order
    dL = (L_plus - L_minus) / (2 * h)
    L_pp = ops4.linearized_at(cl.maxwellian_coefficients(basis4, 1.0, np.zeros(3), 1.0 + h / 2))
    L_mm = ops4.linearized_at(cl.maxwellian_coefficients(basis4, 1.0, np.zeros(3), 1.0 - h / 2))
    dL2 = (L_pp - L_mm) / h
    assert np.linalg.norm(dL - dL2) < 0.05 * np.linalg.norm(dL)


def test_maxwellian_coefficients_exact(basis4):
    # theta = 1, u = 0 gives rho * e0 exactly
    c = cl.maxwellian_coefficients(basis4, 2.0, np.zeros(3), 1.0)
    assert c[basis4.index_of((0, 0, 0))] == pytest.approx(2.0)
    assert np.max(np.abs(np.delete(c, basis4.index_of((0, 0, 0))))) == 0.0
    # moments of the expansion match (rho, m, E) of the Maxwellian
    from lanshock.hydro import moment_rows

    rho, u1, th = 1.05, 0.08, 1.1
    c = cl.maxwellian_coefficients(basis4, rho, np.array([u1, 0, 0]), th, tail_tol=None)
    I5 = moment_rows(basis4)
    mom = I5 @ c
    assert mom[0] == pytest.approx(rho, rel=1e-12)
    assert mom[1] == pytest.approx(rho * u1, rel=1e-12)
    assert mom[4] == pytest.approx(rho * (1.5 * th + 0.5 * u1 * u1), rel=1e-12)
    # tail monitor trips far from the center
    with pytest.raises(ValueError):
        cl.maxwellian_coefficients(basis4, 1.0, np.zeros(3), 1.9)


def test_projections(ops4, basis4):
    rng = np.random.default_rng(1)
    f = rng.standard_normal(basis4.size)
    Pf = ops4.project(f, "P")
    assert np.allclose(ops4.project(Pf, "P"), Pf, atol=1e-12)
    assert np.max(np.abs(ops4.project(ops4.project(f, "P_perp"), "P"))) < 1e-12
    # kernel element unchanged
    e0 = np.zeros(basis4.size)
    e0[basis4.index_of((0, 0, 0))] = 1.0
    assert np.allclose(ops4.project(e0, "P"), e0, atol=1e-14)
    # P_leq9 is a rank-9 orthogonal projector containing range(P)
    P9 = ops4.P_leq9
    assert np.allclose(P9 @ P9, P9, atol=1e-12)
    assert int(round(np.trace(P9))) == 9
    assert np.max(np.abs(P9 @ ops4.kernel_vectors.T - ops4.kernel_vectors.T)) < 1e-12
    # Galerkin cut
    fN = ops4.project(f, "P_leqN", N=2)
    for i, a in enumerate(basis4.indices):
        if sum(a) > 2:
            assert fN[i] == 0.0


def test_coercivity_report(ops4):
    rep = cl.coercivity_report(ops4, WeightSpec(ell=0.0, q=0.0))
    assert rep["delta"] > 0
    assert rep["l2_gap"] == pytest.approx(cl.spectral_gap(ops4), rel=1e-12)
    rep_q = cl.coercivity_report(ops4, WeightSpec(ell=0.0, q=0.5, theta=2.0))
    assert rep_q["delta"] > 0
    # L^kappa dominates L on the microscopic subspace
    gap = cl.spectral_gap(ops4)
    gap_k = cl.spectral_gap(ops4, "kappa", kappa=0.5)
    assert gap_k >= gap - 1e-12


def test_nonlinear_estimate_spot_check(ops4, basis4):
    """|<w^2 Gamma[g1,g2], g3>| <= C with unit sigma-norms; C finite and stable."""
    rng = np.random.default_rng(3)
    S = ops4.sigma_gram(WeightSpec(ell=0.0, q=0.0))
    W = np.eye(basis4.size)  # w = 1 at ell = q = 0
    consts = []
    for _ in range(20):
        g = [rng.standard_normal(basis4.size) for _ in range(3)]
        g = [x / math.sqrt(x @ S @ x) for x in g]
        val = abs(np.einsum("cab,a,b,c->", ops4.Gamma, g[0], g[1], g[2]))
        consts.append(val)
    C = max(consts)
    assert np.isfinite(C)
    # stability under refinement: same measurement at N_v = 3
    basis3 = build_basis(3, 10)
    ops3 = cl.assemble_operators(basis3)
    S3 = ops3.sigma_gram(WeightSpec(ell=0.0, q=0.0))
    consts3 = []
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = [rng.standard_normal(basis3.size) for _ in range(3)]
        g = [x / math.sqrt(x @ S3 @ x) for x in g]
        consts3.append(abs(np.einsum("cab,a,b,c->", ops3.Gamma, g[0], g[1], g[2])))
    assert max(consts3) < 4 * C + 1.0 and C < 4 * max(consts3) + 1.0


def test_sigma_norm_positive_definite(ops4, basis4):
    rng = np.random.default_rng(2)
    S = ops4.sigma_gram(WeightSpec(ell=1.0, q=0.3, theta=2.0))
    w = np.linalg.eigvalsh(0.5 * (S + S.T))
    assert w.min() > 0
    f = rng.standard_normal(basis4.size)
    assert ops4.sigma_norm(f, WeightSpec(ell=0.0, q=0.0)) > 0
    # sigma_kappa combination identity
    Sk = ops4.sigma_kappa_gram(1.0, kappa=0.25)
    S0 = ops4.sigma_gram(WeightSpec(ell=1.0, q=0.0, theta=0.0))
    SR = ops4.sigma_gram(WeightSpec(ell=-1.0, q=0.0, theta=0.0, variant="regularized"), kernel="hard")
    assert np.allclose(Sk, S0 + 0.25 * SR, atol=1e-12)


def test_cache_roundtrip(tmp_path, basis4):
    arr = np.arange(24.0).reshape(2, 3, 4)
    p = tmp_path / "t.lshk"
    write_array(p, arr, 4, 12, 0.5)
    back = read_array(p, 4, 12, 0.5)
    assert np.array_equal(arr, back)
    with pytest.raises(CacheMismatch):
        read_array(p, 5, 12, 0.5)
    with pytest.raises(CacheMismatch):
        read_array(p, 4, 12, 0.25)


def test_cached_assembly_identical(tmp_path, basis4, ops4):
    ops_cached = cl.assemble_operators(basis4, cache_dir=tmp_path)
    ops_again = cl.assemble_operators(basis4, cache_dir=tmp_path)
    assert np.array_equal(ops_cached.Gamma, ops_again.Gamma)
    assert np.max(np.abs(ops_cached.Gamma - ops4.Gamma)) < 1e-15
