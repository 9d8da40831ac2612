"""Landau collision operators in the truncated Hermite basis.

Assembles the symmetrized bilinear form Gamma (and its harder-kernel variant
Gamma_R), the linearized operators L, L_R, L^kappa = L + kappa L_R, the
orthogonal projections P (5 collision invariants), P_{<=9} (the 9-moment
space M9) and the Galerkin cuts, plus the sigma-norm Gram matrices and
coercivity diagnostics.

Conventions.  Gamma[f, g] = mu0^{-1/2} Q(mu0^{1/2} f, mu0^{1/2} g), stored as
the (a, b)-symmetrized tensor G[c, a, b] = <H_c, (Gamma[H_a,H_b]+Gamma[H_b,H_a])/2>.
Only symmetrized instances enter the theory (L g = -2 Gamma~[sqrt(mu0), g],
nonlinear term Gamma~[h, h], cross terms 2 Gamma~[g_NS, h]), and only the
symmetrized bilinear form conserves momentum and energy; the strict bilinear
Landau form conserves mass alone.

All convolution fields are exact derivatives of the radial sigma fields (see
``radial``); the outer integrals are Gauss-Hermite quadratures of smooth
integrands. Conservation (P Gamma = 0) is verified on the raw assembly and
then enforced exactly by projecting the output index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import radial
from .basis import (
    HermiteBasis,
    WeightSpec,
    eval_weight,
    graded_indices,
    kernel_coefficient_vectors,
)
from .cachefile import CacheMismatch, read_array, write_array


@dataclass(frozen=True)
class KernelFamily:
    """Tabulated sigma fields at the quadrature nodes.

    sigma, sigma_R have shape (3, 3, n_nodes); sigma_kappa = sigma + kappa*sigma_R.
    """

    kappa: float
    sigma: np.ndarray
    sigma_R: np.ndarray

    @property
    def sigma_kappa(self) -> np.ndarray:
        return self.sigma + self.kappa * self.sigma_R


def phi_kernel(z: np.ndarray, hard: bool = False) -> np.ndarray:
    """phi^{ij}(z) = (I - zz/|z|^2) |z|^{-1}  (or |z| for the harder kernel)."""
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    r = np.sqrt(r2)
    proj = np.eye(3) - z[..., :, None] * z[..., None, :] / r2[..., None, None]
    fac = r if hard else 1.0 / r
    return proj * fac[..., None, None]


def _sigma_tables(basis: HermiteBasis, order: int) -> tuple[np.ndarray, np.ndarray, radial.RadialLadders]:
    """sigma and sigma_R (3,3,n) at the nodes plus the ladder tables."""
    nodes = basis.quadrature.nodes
    r = np.linalg.norm(nodes, axis=1)
    ladders = radial.RadialLadders(r, kmax=order + 4)
    p1 = ladders.psi1
    p3 = ladders.psi3
    vv = nodes[:, :, None] * nodes[:, None, :]  # (n,3,3)
    eye = np.eye(3)[None, :, :]
    sigma = eye * p1[1][:, None, None] + vv * p1[2][:, None, None]
    sigma_R = (
        eye * (2.0 * p1[0] - p3[1] / 3.0)[:, None, None]
        - vv * (p3[2] / 3.0)[:, None, None]
    )
    return np.moveaxis(sigma, 0, -1), np.moveaxis(sigma_R, 0, -1), ladders


def assemble_kernel_fields(
    basis: HermiteBasis, kappa: float, tol_conv: float = 1e-8
) -> KernelFamily:
    """Tabulate sigma, sigma_R, sigma_kappa at the quadrature nodes.

    The closed radial forms are spot-checked against an independent adaptive
    quadrature of the bipolar reduction; a mismatch beyond ``tol_conv``
    signals a broken evaluation (the analogue of inner-quadrature
    non-convergence for a numerically convolved field).
    """
    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must lie in [0, 1]")
    sigma, sigma_R, _ = _sigma_tables(basis, basis.N_v)
    from scipy.integrate import quad

    def psi_quad(rv: float, p: int) -> float:
        def integrand(rho):
            a, b = abs(rv - rho), rv + rho
            return rho * math.exp(-0.5 * rho * rho) * (b ** (p + 2) - a ** (p + 2)) / (p + 2)

        val, _ = quad(integrand, 0.0, rv + 45.0, limit=200)
        return (2.0 * math.pi) ** (-0.5) / rv * val

    for rv in (0.6, 1.9, 4.2):
        if abs(psi_quad(rv, 1) - radial.psi1(np.array([rv]))[0]) > tol_conv:
            raise RuntimeError("radial psi1 evaluation failed its quadrature check")
        if abs(psi_quad(rv, 3) - radial.psi3(np.array([rv]))[0]) > tol_conv * 100:
            raise RuntimeError("radial psi3 evaluation failed its quadrature check")
    return KernelFamily(kappa=float(kappa), sigma=sigma, sigma_R=sigma_R)


# --- convolution fields ------------------------------------------------------


def assembly_rule(basis: HermiteBasis) -> HermiteBasis:
    """Refined internal quadrature used only for operator assembly.

    The assembled entries involve smooth non-polynomial sigma-derivative
    fields; Gauss-Hermite converges superalgebraically in n_q for them, and
    n_q + 12 points push the raw conservation defect to ~1e-11 at desk scale.
    The user-facing rule (norms, Gram matrices) is untouched.
    """
    n_asm = max(basis.quadrature.n_q + 12, 2 * basis.N_v + 14)
    from .basis import QuadratureRule

    return HermiteBasis(N_v=basis.N_v, quadrature=QuadratureRule.build(n_asm))


def _field_tables(basis: HermiteBasis, kernel: str) -> tuple[np.ndarray, np.ndarray]:
    """Y[b, i, j, n] and Z[a, i, n] tables at the nodes of ``basis``'s rule.

    Y^{ij}_beta = phi^{ij} * (mu0 p_beta) = ((-1)^{|beta|}/sqrt(beta!)) d^beta sigma^{ij}
    for |beta| <= N_v + 1;  Z^i_a = sum_j phi^{ij} * d_j(mu0 p_a)
    = -sum_j sqrt(a_j + 1) Y^{ij}_{a+e_j} for |a| <= N_v.
    """
    order = basis.N_v + 1
    idx1 = graded_indices(order)
    look1 = {a: i for i, a in enumerate(idx1)}
    nodes = basis.quadrature.nodes
    r = np.linalg.norm(nodes, axis=1)
    ladders = radial.RadialLadders(r, kmax=order + 4)
    nn = nodes.shape[0]
    Y = np.zeros((len(idx1), 3, 3, nn))
    for bi, beta in enumerate(idx1):
        pref = (-1.0) ** sum(beta) / math.sqrt(
            math.factorial(beta[0]) * math.factorial(beta[1]) * math.factorial(beta[2])
        )
        for i in range(3):
            for j in range(i, 3):
                terms = radial.derivative_terms(kernel, i, j, beta)
                vals = pref * radial.evaluate_terms(terms, nodes, ladders)
                Y[bi, i, j] = vals
                if i != j:
                    Y[bi, j, i] = vals
    nb = basis.size
    Z = np.zeros((nb, 3, nn))
    for ai, a in enumerate(basis.indices):
        for j in range(3):
            up = list(a)
            up[j] += 1
            Z[ai] -= math.sqrt(a[j] + 1) * Y[look1[tuple(up)], :, j, :]
    return Y, Z


def _assemble_gamma_raw(user_basis: HermiteBasis, kernel: str) -> np.ndarray:
    """Unsymmetrized tensor G[c, a, b] = <H_c, Gamma[H_a, H_b]> by quadrature."""
    basis = assembly_rule(user_basis)
    order = basis.N_v + 1
    idx1 = graded_indices(order)
    look1 = {a: i for i, a in enumerate(idx1)}
    nb = basis.size
    P1 = basis.poly_table(order)  # p_alpha at nodes, |alpha| <= N_v + 1
    wmu = basis.gaussian_node_weights()
    Y, Z = _field_tables(basis, kernel)
    Y = Y[:nb]  # a-slot only needs |a| <= N_v

    # DP[c, i, n] = d_i p_c at nodes (exact ladder: sqrt(c_i) p_{c-e_i})
    nn = P1.shape[1]
    DP = np.zeros((nb, 3, nn))
    for ci, c in enumerate(basis.indices):
        for i in range(3):
            if c[i] > 0:
                lo = list(c)
                lo[i] -= 1
                DP[ci, i] = math.sqrt(c[i]) * P1[look1[tuple(lo)]]

    # PB[j, b, n] = sqrt(b_j + 1) p_{b+e_j} at nodes
    PB = np.zeros((3, nb, nn))
    for bi, b in enumerate(basis.indices):
        for j in range(3):
            up = list(b)
            up[j] += 1
            PB[j, bi] = math.sqrt(b[j] + 1) * P1[look1[tuple(up)]]

    # term1[c,a,b] = sum_nodes wmu * DP[c,i] Y[a,i,j] PB[j,b]
    X1 = np.einsum("cin,aijn->ajnc", DP, Y, optimize=True)
    term1 = np.einsum("ajnc,jbn,n->cab", X1, PB, wmu, optimize=True)
    # term2[c,a,b] = sum_nodes wmu * DP[c,i] Z[a,i] p_b
    X2 = np.einsum("cin,ain->anc", DP, Z, optimize=True)
    term2 = np.einsum("anc,bn,n->cab", X2, P1[:nb], wmu, optimize=True)
    return term1 + term2


@dataclass
class OperatorSet:
    """Assembled collision operators and projections on the truncated basis."""

    basis: HermiteBasis
    kappa: float
    Gamma: np.ndarray  # symmetrized, conservation-enforced, (nb, nb, nb)
    Gamma_R: np.ndarray
    L: np.ndarray
    L_R: np.ndarray
    kernel_vectors: np.ndarray  # (5, nb) orthonormal rows spanning ker L
    P: np.ndarray  # rank-5 orthogonal projector
    P_leq9: np.ndarray  # rank-9 projector onto M9
    raw_conservation_violation: float = 0.0
    _gram_cache: dict = field(default_factory=dict, repr=False)

    @property
    def L_kappa(self) -> np.ndarray:
        return self.L + self.kappa * self.L_R

    # -- projections --------------------------------------------------------

    def project(self, f: np.ndarray, which: str, N: int | None = None) -> np.ndarray:
        """Apply one of the projections P, P_perp, P_leq9, P_leqN to coefficients."""
        f = np.asarray(f, dtype=float)
        if which == "P":
            return (f @ self.kernel_vectors.T) @ self.kernel_vectors
        if which == "P_perp":
            return f - self.project(f, "P")
        if which == "P_leq9":
            return f @ self.P_leq9.T
        if which == "P_leqN":
            if N is None:
                raise ValueError("P_leqN requires N")
            mask = np.array([sum(a) <= N for a in self.basis.indices], dtype=float)
            return f * mask
        raise ValueError(f"unknown projection {which!r}")

    # -- operators at shifted centers ---------------------------------------

    def gamma_apply(self, a_coeffs: np.ndarray, b_coeffs: np.ndarray, kappa: float | None = None) -> np.ndarray:
        """Gamma~_kappa[a, b] as a coefficient vector."""
        kap = self.kappa if kappa is None else kappa
        out = np.einsum("cab,a,b->c", self.Gamma, a_coeffs, b_coeffs, optimize=True)
        if kap:
            out = out + kap * np.einsum(
                "cab,a,b->c", self.Gamma_R, a_coeffs, b_coeffs, optimize=True
            )
        return out

    def linearized_at(self, m_coeffs: np.ndarray, kappa: float | None = None) -> np.ndarray:
        """Matrix of f -> -Gamma_k[m, f] - Gamma_k[f, m] for a center m (coefficients).

        With m the expansion of mu0^{-1/2} mu_center this is the conjugated
        linearized operator at that Maxwellian; the assembly reuses the Gamma
        tensor, so no re-quadrature is needed per center.
        """
        kap = self.kappa if kappa is None else kappa
        M = np.einsum("cab,a->cb", self.Gamma, m_coeffs, optimize=True)
        if kap:
            M = M + kap * np.einsum("cab,a->cb", self.Gamma_R, m_coeffs, optimize=True)
        M = -2.0 * M
        return 0.5 * (M + M.T)

    # -- sigma norms ---------------------------------------------------------

    def sigma_gram(self, w: WeightSpec, kernel: str = "coulomb") -> np.ndarray:
        """Gram matrix of the sigma norm |f|^2_{sigma, l, q} on the basis.

        |f|^2 = int sigma^{ij} w^2 (d_i f d_j f + v_i v_j f^2) dv evaluated by
        quadrature; ``kernel`` selects sigma or sigma_R.
        """
        key = (w, kernel)
        if key in self._gram_cache:
            return self._gram_cache[key]
        basis = self.basis
        nodes = basis.quadrature.nodes
        r = np.linalg.norm(nodes, axis=1)
        ladders = radial.RadialLadders(r, kmax=2)
        if kernel == "coulomb":
            btr, clong = ladders.psi1[1], ladders.psi1[2]
        elif kernel == "hard":
            btr = 2.0 * ladders.psi1[0] - ladders.psi3[1] / 3.0
            clong = -ladders.psi3[2] / 3.0
        else:
            raise ValueError(kernel)
        wsq = eval_weight(w, nodes) ** 2
        P1 = basis.poly_table(basis.N_v + 1)
        idx1 = graded_indices(basis.N_v + 1)
        look1 = {a: i for i, a in enumerate(idx1)}
        nb = basis.size
        nn = nodes.shape[0]
        # gradient of H_a = sqrt(mu0)(d_i p_a - v_i p_a / 2); the sqrt(mu0)^2
        # is folded into the Gaussian node weights.
        G = np.zeros((nb, 3, nn))
        vals = P1[:nb]
        for ai, a in enumerate(basis.indices):
            for i in range(3):
                g = -0.5 * nodes[:, i] * vals[ai]
                if a[i] > 0:
                    lo = list(a)
                    lo[i] -= 1
                    g = g + math.sqrt(a[i]) * P1[look1[tuple(lo)]]
                G[ai, i] = g
        wq = basis.gaussian_node_weights() * wsq
        # sigma^{ij} x_i y_j = btr * (x . y) + clong * (v . x)(v . y)
        dot = np.einsum("ain,bin,n->ab", G, G, wq * btr, optimize=True)
        vG = np.einsum("ain,ni->an", G, nodes, optimize=True)
        dot += np.einsum("an,bn,n->ab", vG, vG, wq * clong, optimize=True)
        svv = btr * r * r + clong * r**4
        dot += np.einsum("an,bn,n->ab", vals, vals, wq * svv, optimize=True)
        out = 0.5 * (dot + dot.T)
        self._gram_cache[key] = out
        return out

    def sigma_kappa_gram(self, ell: float, kappa: float | None = None) -> np.ndarray:
        """|f|^2_{sigma_kappa, l} = |f|^2_{sigma, l} + kappa |f|^2_{sigma_R, -l}."""
        kap = self.kappa if kappa is None else kappa
        S = self.sigma_gram(WeightSpec(ell=ell, q=0.0, theta=0.0))
        if kap:
            S = S + kap * self.sigma_gram(
                WeightSpec(ell=-ell, q=0.0, theta=0.0, variant="regularized"),
                kernel="hard",
            )
        return S

    def sigma_norm(self, f: np.ndarray, w: WeightSpec, kernel: str = "coulomb") -> float:
        S = self.sigma_gram(w, kernel)
        return float(np.sqrt(max(f @ S @ f, 0.0)))

    def dual_norm_sq(self, z: np.ndarray, S: np.ndarray) -> float:
        """Squared H^{-1}-type dual norm z^T S^{-1} z on the truncated space."""
        return float(z @ np.linalg.solve(S, z))


def _m9_projector(basis: HermiteBasis) -> np.ndarray:
    """Orthogonal projector onto M9 = sqrt(mu0) span{1, v, |v|^2, v1^2, v1 v2, v1 v3, |v|^2 v1}."""
    nb = basis.size
    ix = basis.index_of
    gens = []

    def vec(entries):
        v = np.zeros(nb)
        for a, c in entries:
            v[ix(a)] = c
        return v

    s2, s6 = math.sqrt(2.0), math.sqrt(6.0)
    gens.append(vec([((0, 0, 0), 1.0)]))
    gens.append(vec([((1, 0, 0), 1.0)]))
    gens.append(vec([((0, 1, 0), 1.0)]))
    gens.append(vec([((0, 0, 1), 1.0)]))
    gens.append(vec([((0, 0, 0), 3.0), ((2, 0, 0), s2), ((0, 2, 0), s2), ((0, 0, 2), s2)]))
    gens.append(vec([((0, 0, 0), 1.0), ((2, 0, 0), s2)]))  # v1^2 sqrt(mu0)
    gens.append(vec([((1, 1, 0), 1.0)]))
    gens.append(vec([((1, 0, 1), 1.0)]))
    # |v|^2 v1 sqrt(mu0) = sqrt6 H_300 + sqrt2 H_120 + sqrt2 H_102 + 5 H_100
    gens.append(vec([((3, 0, 0), s6), ((1, 2, 0), s2), ((1, 0, 2), s2), ((1, 0, 0), 5.0)]))
    Q, _ = np.linalg.qr(np.stack(gens, axis=1))
    return Q @ Q.T


def assemble_operators(
    basis: HermiteBasis,
    kappa: float = 0.0,
    cache_dir: str | Path | None = None,
    tol_cons: float = 1e-8,
) -> OperatorSet:
    """Assemble Gamma, Gamma_R, L, L_R and the projections.

    The raw conservation violation max_ab |P Gamma[H_a,H_b]| / (|Gamma[H_a,H_b]| + eps)
    is measured and must stay below ``tol_cons``; conservation is then made
    exact by projecting the output index onto the orthogonal complement of the
    collision invariants. L is symmetrized and its kernel pinned to the
    invariant span (both are quadrature-error-sized corrections).
    """
    tensors = {}
    for kernel, name in (("coulomb", "gamma"), ("hard", "gamma_R")):
        arr = None
        if cache_dir is not None:
            p = Path(cache_dir) / f"{name}_nv{basis.N_v}_nq{basis.quadrature.n_q}.lshk"
            if p.exists():
                try:
                    arr = read_array(p, basis.N_v, basis.quadrature.n_q, 0.0)
                except CacheMismatch:
                    arr = None
        if arr is None:
            raw = _assemble_gamma_raw(basis, kernel)
            arr = 0.5 * (raw + np.swapaxes(raw, 1, 2))
            if cache_dir is not None:
                p = Path(cache_dir) / f"{name}_nv{basis.N_v}_nq{basis.quadrature.n_q}.lshk"
                write_array(p, arr, basis.N_v, basis.quadrature.n_q, 0.0)
        tensors[kernel] = arr

    kv = kernel_coefficient_vectors(basis)
    # raw conservation check (absolute, quadrature-quality gate), then exact
    # enforcement by projecting the output index off the invariant span
    worst = 0.0
    for kernel in tensors:
        G = tensors[kernel]
        viol = np.einsum("kc,cab->kab", kv, G, optimize=True)
        worst = max(worst, float(np.max(np.abs(viol))))
        if worst > tol_cons:
            raise RuntimeError(
                f"raw conservation violation {worst:.3e} exceeds tol_cons {tol_cons:.1e}"
            )
        tensors[kernel] = G - np.einsum("kc,kab->cab", kv, viol, optimize=True)

    e0 = np.zeros(basis.size)
    e0[basis.index_of((0, 0, 0))] = 1.0

    def make_L(G):
        L = -2.0 * np.einsum("cab,a->cb", G, e0, optimize=True)
        L = 0.5 * (L + L.T)
        # pin the kernel exactly: P L = L P = 0
        L = L - kv.T @ (kv @ L)
        L = L - (L @ kv.T) @ kv
        return 0.5 * (L + L.T)

    L = make_L(tensors["coulomb"])
    L_R = make_L(tensors["hard"])
    P = kv.T @ kv
    return OperatorSet(
        basis=basis,
        kappa=float(kappa),
        Gamma=tensors["coulomb"],
        Gamma_R=tensors["hard"],
        L=L,
        L_R=L_R,
        kernel_vectors=kv,
        P=0.5 * (P + P.T),
        P_leq9=_m9_projector(basis),
        raw_conservation_violation=worst,
    )


def assemble_L_direct(user_basis: HermiteBasis, kernel: str = "coulomb") -> np.ndarray:
    """Assemble L at mu0 without the triple tensor (A-part + K-part).

    L(c,b) = int sigma^{ij} mu0 d_i p_c d_j p_b dv
             - int mu0 d_i p_c [Z^i_b + v_j Y^{ij}_b] dv,
    used for the transport-coefficient Cauchy gate at larger N_v where the
    full Gamma tensor is not needed. Symmetrized; kernel not pinned.
    """
    basis = assembly_rule(user_basis)
    order = basis.N_v + 1
    idx1 = graded_indices(order)
    look1 = {a: i for i, a in enumerate(idx1)}
    nodes = basis.quadrature.nodes
    nn = nodes.shape[0]
    nb = basis.size
    P1 = basis.poly_table(order)
    wmu = basis.gaussian_node_weights()
    r = np.linalg.norm(nodes, axis=1)
    ladders = radial.RadialLadders(r, kmax=2)
    if kernel == "coulomb":
        btr, clong = ladders.psi1[1], ladders.psi1[2]
    else:
        btr = 2.0 * ladders.psi1[0] - ladders.psi3[1] / 3.0
        clong = -ladders.psi3[2] / 3.0

    DP = np.zeros((nb, 3, nn))
    for ci, c in enumerate(basis.indices):
        for i in range(3):
            if c[i] > 0:
                lo = list(c)
                lo[i] -= 1
                DP[ci, i] = math.sqrt(c[i]) * P1[look1[tuple(lo)]]

    A = np.einsum("ain,bin,n->ab", DP, DP, wmu * btr, optimize=True)
    vDP = np.einsum("ain,ni->an", DP, nodes, optimize=True)
    A += np.einsum("an,bn,n->ab", vDP, vDP, wmu * clong, optimize=True)

    Y, Z = _field_tables(basis, kernel)
    Y = Y[:nb]
    vY = np.einsum("bijn,nj->bin", Y, nodes, optimize=True)
    K = -np.einsum("cin,bin,n->cb", DP, Z + vY, wmu, optimize=True)
    M = A + K
    return 0.5 * (M + M.T)


def maxwellian_coefficients(
    basis: HermiteBasis,
    rho: float,
    u: np.ndarray,
    theta: float,
    tail_tol: float | None = 0.01,
) -> np.ndarray:
    """Hermite coefficients of mu0^{-1/2} mu_(rho,u,theta), exactly.

    c_alpha = rho * prod_i B_{alpha_i}(u_i, theta - 1) / sqrt(alpha_i!), where
    B_{n+1} = m B_n + n s B_{n-1} generates E[He_n(X)] for X ~ N(m, 1+s).
    A tail fraction above ``tail_tol`` (mass of |alpha| = N_v coefficients)
    signals that the expansion has left its validity region.
    """
    u = np.asarray(u, dtype=float)
    if rho <= 0 or theta <= 0:
        raise ValueError("Maxwellian requires rho > 0 and theta > 0")
    s = theta - 1.0
    n_max = basis.N_v
    B = np.zeros((3, n_max + 1))
    for ax in range(3):
        B[ax, 0] = 1.0
        if n_max >= 1:
            B[ax, 1] = u[ax]
        for n in range(1, n_max):
            B[ax, n + 1] = u[ax] * B[ax, n] + n * s * B[ax, n - 1]
    out = np.empty(basis.size)
    for i, a in enumerate(basis.indices):
        out[i] = (
            rho
            * B[0, a[0]]
            * B[1, a[1]]
            * B[2, a[2]]
            / math.sqrt(
                math.factorial(a[0]) * math.factorial(a[1]) * math.factorial(a[2])
            )
        )
    if tail_tol is not None:
        tail = np.array([sum(a) == basis.N_v for a in basis.indices])
        frac = np.linalg.norm(out[tail]) / np.linalg.norm(out)
        if frac > tail_tol:
            raise ValueError(
                f"Maxwellian expansion tail fraction {frac:.3e} exceeds {tail_tol}; "
                f"center (rho={rho}, u={u}, theta={theta}) is outside the validity region"
            )
    return out


def microscopic_solve(
    L: np.ndarray, kernel_vectors: np.ndarray, rhs: np.ndarray, rtol: float = 1e-9
) -> np.ndarray:
    """Solve L x = P^perp rhs with x purely microscopic.

    Uses an eigendecomposition-based pseudo-inverse restricted to the
    orthogonal complement of the collision invariants (exact null-space
    control; the operators are small and dense).
    """
    kv = kernel_vectors
    rhs = rhs - kv.T @ (kv @ rhs)
    w, V = np.linalg.eigh(L)
    thresh = rtol * np.max(np.abs(w))
    inv = np.where(np.abs(w) > thresh, 1.0 / np.where(np.abs(w) > thresh, w, 1.0), 0.0)
    x = V @ (inv * (V.T @ rhs))
    x = x - kv.T @ (kv @ x)
    return x


def spectral_gap(ops: OperatorSet, which: str = "coulomb", kappa: float | None = None) -> float:
    """Smallest eigenvalue of L (or L^kappa) restricted to range(P^perp), L^2 metric."""
    L = {"coulomb": ops.L, "hard": ops.L_R, "kappa": ops.L_kappa}[which]
    if which == "kappa" and kappa is not None:
        L = ops.L + kappa * ops.L_R
    kv = ops.kernel_vectors
    nb = ops.basis.size
    # orthonormal basis of the microscopic subspace
    Qfull, _ = np.linalg.qr(np.concatenate([kv.T, np.eye(nb)], axis=1))
    Qmic = Qfull[:, 5:nb]
    w = np.linalg.eigvalsh(Qmic.T @ L @ Qmic)
    return float(w[0])


def coercivity_report(
    ops: OperatorSet,
    w: WeightSpec,
    which: str = "coulomb",
    C_grid: tuple[float, ...] = tuple(2.0**k for k in range(0, 24, 2)),
) -> dict:
    """Largest delta (and smallest C from a geometric grid) with

        <w^2 L g, g>  >=  delta |g|^2_{sigma,l,q} - C |w(l,0) g|_2^2

    on the truncated microscopic subspace, as generalized eigenvalue facts.
    Also reports the plain L^2 spectral gap on range(P^perp).
    """
    L = {"coulomb": ops.L, "hard": ops.L_R, "kappa": ops.L_kappa}[which]
    basis = ops.basis
    nodes = basis.quadrature.nodes
    wsq = eval_weight(w, nodes) ** 2
    P0 = basis.poly_table(basis.N_v)
    wmu = basis.gaussian_node_weights()
    W = np.einsum("an,bn,n->ab", P0, P0, wmu * wsq, optimize=True)
    WL = 0.5 * (W @ L + L.T @ W.T)
    S = ops.sigma_gram(w, kernel="coulomb" if which != "hard" else "hard")
    w0 = WeightSpec(ell=w.ell, q=0.0, theta=0.0, variant=w.variant)
    T = np.einsum(
        "an,bn,n->ab", P0, P0, wmu * eval_weight(w0, nodes) ** 2, optimize=True
    )
    kv = ops.kernel_vectors
    nb = basis.size
    Qfull, _ = np.linalg.qr(np.concatenate([kv.T, np.eye(nb)], axis=1))
    Qm = Qfull[:, 5:nb]

    def gen_min(C):
        from scipy.linalg import eigh

        Am = Qm.T @ (WL + C * T) @ Qm
        Sm = Qm.T @ S @ Qm
        vals = eigh(0.5 * (Am + Am.T), 0.5 * (Sm + Sm.T), eigvals_only=True)
        return float(vals[0])

    delta0 = gen_min(0.0)
    report = {"delta": delta0, "C": 0.0, "l2_gap": spectral_gap(ops, which)}
    if delta0 <= 0.0:
        for C in C_grid:
            d = gen_min(C)
            if d > 0.0:
                report.update(delta=d, C=float(C))
                break
        else:
            raise RuntimeError(
                "coercivity failed on the C grid: q too close to 1 or truncation too small"
            )
    return report
