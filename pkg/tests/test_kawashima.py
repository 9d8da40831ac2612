import numpy as np
import pytest

from lanshock import kawashima as kw
from lanshock import kinetic


def test_oscillator_condition_and_compensator():
    inp = kw.oscillator_example()
    info = kw.check_condition(inp)
    assert info["holds"]
    assert info["chain_dims"] == [1, 0]
    comp = kw.build_compensator(inp)
    # K equals the worked example [[0, -i], [-i, 0]] up to positive scaling
    K = comp.K
    ratio = K[0, 1] / (-1j)
    assert abs(K[1, 0] / (-1j) - ratio) < 1e-12
    assert abs(K[0, 0]) < 1e-14 and abs(K[1, 1]) < 1e-14
    assert ratio.real > 0 and abs(ratio.imag) < 1e-14
    assert comp.delta_coer > 0
    # hypocoercivity functional Phi = |x|^2/2 + |y|^2/2 - delta x y contracts
    A, L = inp.A, inp.L
    tau = 1.0
    delta = 0.25
    G = 1j * tau * A - L

    def phi(u):
        quad = 0.5 * np.linalg.norm(u) ** 2
        twist = 0.5 * np.sign(tau) * np.real(np.vdot(u, 1j * comp.K @ u))
        return quad + delta / max(abs(ratio), 1.0) * twist

    rng = np.random.default_rng(0)
    import scipy.linalg as sla

    step = sla.expm(G * 0.05)
    for _ in range(10):
        u = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        u /= np.linalg.norm(u)
        assert phi(step @ u) < phi(u)
    # on real vectors the twist reduces to -delta * x * y
    u = np.array([0.6, -0.8], dtype=complex)
    twist = 0.5 * np.real(np.vdot(u, 1j * (comp.K / ratio) @ u))
    assert twist == pytest.approx(float(u[0].real * u[1].real), rel=1e-12)


def test_identity_matrix_fails():
    A = np.eye(3, dtype=complex)
    L = np.diag([0.0, 1.0, 1.0]).astype(complex)
    inp = kw.CompensatorInput.from_damping(A, L)
    assert not kw.check_condition(inp)["holds"]
    with pytest.raises(ValueError):
        kw.build_compensator(inp)


def test_equivalence_on_random_pairs():
    """(eq:A) <=> (eq:B) <=> Kalman on 200 random Hermitian pairs of size <= 12."""
    rng = np.random.default_rng(42)
    agreements = 0
    for _ in range(200):
        m = rng.integers(2, 13)
        n = rng.integers(1, m)
        H = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        A = 0.5 * (H + H.conj().T)
        if rng.random() < 0.3:
            # force a violation: plant an eigenvector inside X
            w, V = np.linalg.eigh(A)
            X = np.concatenate([V[:, :1], rng.standard_normal((m, n - 1))], axis=1) if n > 1 else V[:, :1]
            X, _ = np.linalg.qr(X)
        else:
            X, _ = np.linalg.qr(rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n)))
        L = np.eye(m) - X @ X.conj().T
        inp = kw.CompensatorInput(A=A, L=L, X=X)
        info = kw.check_condition(inp)  # raises if the three characterizations disagree
        agreements += 1
        if info["holds"]:
            comp = kw.build_compensator(inp, sample_check=50)
            assert comp.delta_coer > 0
            scale = max(1.0, np.max(np.abs(comp.K)))
            assert np.max(np.abs(comp.K + comp.K.conj().T)) < 1e-12 * scale
    assert agreements == 200


def test_chain_properties():
    n = 5
    A = np.zeros((n, n))
    for k in range(n - 1):
        A[k, k + 1] = A[k + 1, k] = 1.0
    L = np.zeros((n, n))
    L[-1, -1] = 1.0
    inp = kw.CompensatorInput.from_damping(A.astype(complex), L.astype(complex))
    chains = kw.chain_subspaces(inp)
    dims = [F.shape[1] for F in chains]
    assert dims[0] == n - 1
    assert dims[-1] == 0
    assert all(d2 < d1 for d1, d2 in zip(dims, dims[1:]))
    # F_k is contained in F_{k-1} and E_k closes the gap orthogonally
    for k in range(1, len(chains)):
        Fk, Fkm1 = chains[k], chains[k - 1]
        if Fk.shape[1]:
            # containment: projecting F_k onto F_{k-1} preserves norms
            s = np.linalg.svd(Fkm1.conj().T @ Fk, compute_uv=False)
            assert np.min(s) > 1 - 1e-10
    comp = kw.build_compensator(inp)
    assert comp.delta_coer > 0


def test_alternate_construction_pairing():
    n = 4
    A = np.zeros((n, n))
    for k in range(n - 1):
        A[k, k + 1] = A[k + 1, k] = 1.0
    L = np.zeros((n, n))
    L[-1, -1] = 1.0
    inp = kw.CompensatorInput.from_damping(A.astype(complex), L.astype(complex))
    for k, (Kt, Ksum) in enumerate(kw.alternate_level_compensators(inp), start=1):
        lhs = np.trace(Kt.conj().T @ np.linalg.matrix_power(inp.A, k))
        rhs = np.trace(Ksum.conj().T @ inp.A)
        assert abs(lhs - rhs) < 1e-12


def test_steady_resolvent(ops4):
    inp = kw.oscillator_example()
    taus = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
    tab = kw.steady_resolvent_bound(inp, taus)
    ln = np.log
    slope = np.polyfit(ln([t["tau"] for t in tab]), ln([t["resolvent_norm"] for t in tab]), 1)[0]
    assert -2.0 <= slope <= 0.0
    slope_mic = np.polyfit(
        ln([t["tau"] for t in tab]), ln([t["resolvent_norm_micforce"] for t in tab]), 1
    )[0]
    assert slope_mic >= -1.0 - 1e-6
    assert all(np.isfinite(t["resolvent_norm"]) for t in tab)


def test_time_decay():
    inp = kw.oscillator_example()
    r1 = kw.time_decay_demo(inp, 0.1)
    r2 = kw.time_decay_demo(inp, 0.2)
    assert r1["rate"] > 0 and r2["rate"] > 0
    assert abs(r1["rate"] / r2["rate"] - 0.25) <= 0.3 * 0.25
    # u0 in the damped subspace at tau = 0 decays at least at the gap of L
    r0 = kw.time_decay_demo(inp, 0.0, u0=np.array([0.0, 1.0], dtype=complex))
    assert r0["rate"] >= 1.0 - 1e-6
    rt = kw.time_decay_demo(inp, 1.0)
    assert rt["rate"] > 0


def test_m9_block(ops4):
    B9, comp = kinetic.m9_compensator(ops4)
    assert comp.delta_coer > 0
    assert comp.chain_dims == [5, 1, 0]  # the mass direction needs two steps
    # orthonormal lifted basis, first five columns span ker L
    assert np.allclose(B9.T @ B9, np.eye(9), atol=1e-12)
    kv = ops4.kernel_vectors
    s = np.linalg.svd(kv @ B9[:, :5], compute_uv=False)
    assert np.min(s) > 1 - 1e-10


def test_galerkin_block_plus_minus_symmetry(ops4, apx_002):
    """Eigenvalues of the eta -> infinity block [[0, I], [L22, 0]] come in
    +- pairs (the spectral symmetry used by the continuity argument)."""
    basis = ops4.basis
    kv = ops4.kernel_vectors
    nb = basis.size
    Qfull, _ = np.linalg.qr(np.concatenate([kv.T, np.eye(nb)], axis=1))
    Qm = Qfull[:, 5:nb]
    L22 = Qm.T @ ops4.L @ Qm
    r = L22.shape[0]
    T0 = np.zeros((2 * r, 2 * r))
    T0[:r, r:] = np.eye(r)
    T0[r:, :r] = L22
    lam = np.sort_complex(np.linalg.eigvals(T0))
    neg = np.sort_complex(-lam)
    assert np.max(np.abs(lam - neg)) < 1e-8
