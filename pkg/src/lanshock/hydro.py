"""Euler/Navier-Stokes structural data and Chapman-Enskog transport coefficients.

Conservative state U = (rho, m1, m2, m3, E) with p = (gamma-1)(E - |m|^2/2rho)
= rho * theta. The flux eigensystem, Hugoniot curve, genuine nonlinearity,
dissipation matrix, symmetrizer and the linearized Chapman-Enskog viscosity
matrix B_kappa are all centered at U_L = (1, 0, 0, 0, 1/(gamma-1)), the state
of the standard Maxwellian.

Transport conventions. ``mu`` is the shear viscosity, ``lambda_v`` the
companion coefficient defined so that mu + lambda_v is the longitudinal
viscosity (the combination multiplying d_x u_1 in the one-dimensional
momentum balance); both are positive, and for the pure Coulomb operator
lambda_v = mu/3 by the tracelessness of the Burnett tensor. ``kappa_th`` is
the heat conductivity. All three scale as theta^{5/2} * Phi(kappa * theta):
rescaling v -> sqrt(theta) v maps the operator linearized at temperature
theta onto theta^{-3/2} (L + kappa*theta L_R), so one microscopic solve at
theta = 1 per effective regularization suffices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import HermiteBasis
from .collision import OperatorSet, maxwellian_coefficients, microscopic_solve


@dataclass(frozen=True)
class PrimState:
    rho: float
    u: tuple[float, float, float]
    theta: float
    gamma: float = 5.0 / 3.0

    def __post_init__(self):
        if self.rho <= 0 or self.theta <= 0:
            raise ValueError("PrimState requires rho > 0 and theta > 0")

    @property
    def pressure(self) -> float:
        return self.rho * self.theta

    @property
    def internal_energy(self) -> float:
        return self.theta / (self.gamma - 1.0)

    @property
    def sound_speed(self) -> float:
        return math.sqrt(self.gamma * self.theta)

    def to_macro(self) -> "MacroState":
        u = np.asarray(self.u)
        E = self.rho * (self.internal_energy + 0.5 * float(u @ u))
        return MacroState(
            rho=self.rho, m=tuple(self.rho * u), E=float(E), gamma=self.gamma
        )


@dataclass(frozen=True)
class MacroState:
    rho: float
    m: tuple[float, float, float]
    E: float
    gamma: float = 5.0 / 3.0

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("MacroState requires rho > 0")
        u = np.asarray(self.m) / self.rho
        if self.E / self.rho - 0.5 * float(u @ u) <= 0:
            raise ValueError("MacroState has non-positive internal energy")

    def to_prim(self) -> PrimState:
        u = np.asarray(self.m) / self.rho
        e = self.E / self.rho - 0.5 * float(u @ u)
        return PrimState(
            rho=self.rho,
            u=(float(u[0]), float(u[1]), float(u[2])),
            theta=(self.gamma - 1.0) * e,
            gamma=self.gamma,
        )

    def vector(self) -> np.ndarray:
        return np.array([self.rho, *self.m, self.E])

    @staticmethod
    def from_vector(U: np.ndarray, gamma: float = 5.0 / 3.0) -> "MacroState":
        return MacroState(
            rho=float(U[0]),
            m=(float(U[1]), float(U[2]), float(U[3])),
            E=float(U[4]),
            gamma=gamma,
        )


def reference_state(gamma: float = 5.0 / 3.0) -> MacroState:
    """U_L = (1, 0, 0, 0, (gamma-1)^{-1}), the moments of the standard Maxwellian."""
    return MacroState(rho=1.0, m=(0.0, 0.0, 0.0), E=1.0 / (gamma - 1.0), gamma=gamma)


def euler_flux(U: np.ndarray, gamma: float = 5.0 / 3.0) -> np.ndarray:
    """F(U) = (m1, m m1/rho + p e1, m1/rho (E + p))."""
    rho, m1, m2, m3, E = U
    if rho <= 0:
        raise ValueError("invalid state: rho <= 0")
    msq = m1 * m1 + m2 * m2 + m3 * m3
    p = (gamma - 1.0) * (E - 0.5 * msq / rho)
    if p <= 0:
        raise ValueError("invalid state: p <= 0")
    u1 = m1 / rho
    return np.array([m1, m1 * u1 + p, m2 * u1, m3 * u1, u1 * (E + p)])


def flux_jacobian(U: np.ndarray, gamma: float = 5.0 / 3.0) -> np.ndarray:
    """The 5x5 gradient of the flux in conservative variables (closed form)."""
    rho, m1, m2, m3, E = U
    m = np.array([m1, m2, m3])
    u = m / rho
    usq = float(u @ u)
    p = (gamma - 1.0) * (E - 0.5 * rho * usq)
    dp_drho = 0.5 * (gamma - 1.0) * usq
    dp_dm = -(gamma - 1.0) * u
    dp_dE = gamma - 1.0
    J = np.zeros((5, 5))
    J[0, 1] = 1.0
    J[1, 0] = -u[0] ** 2 + dp_drho
    J[1, 1] = 2.0 * u[0] + dp_dm[0]
    J[1, 2] = dp_dm[1]
    J[1, 3] = dp_dm[2]
    J[1, 4] = dp_dE
    J[2, 0] = -u[0] * u[1]
    J[2, 1] = u[1]
    J[2, 2] = u[0]
    J[3, 0] = -u[0] * u[2]
    J[3, 1] = u[2]
    J[3, 3] = u[0]
    J[4, 0] = -u[0] * (E + p) / rho + u[0] * dp_drho
    J[4, 1] = (E + p) / rho + u[0] * dp_dm[0]
    J[4, 2] = u[0] * dp_dm[1]
    J[4, 3] = u[0] * dp_dm[2]
    J[4, 4] = u[0] * (1.0 + dp_dE)
    return J


@dataclass(frozen=True)
class EigenStructure:
    lambdas: np.ndarray  # sorted: u1 - c, u1, u1, u1, u1 + c
    R: np.ndarray  # right eigenvectors as columns
    Lft: np.ndarray  # left eigenvectors as rows, Lft @ R = I


def eigensystem(U: np.ndarray, gamma: float = 5.0 / 3.0) -> EigenStructure:
    """Analytic eigensystem of the flux Jacobian.

    The acoustic eigenvector r_5 is oriented so that the genuine-nonlinearity
    coefficient Lambda = grad(lambda_5) . r_5 is negative (at U_L this makes
    r_5 parallel to -(1, c, 0, 0, gamma/(gamma-1))).
    """
    rho, m1, m2, m3, E = U
    u = np.array([m1, m2, m3]) / rho
    usq = float(u @ u)
    p = (gamma - 1.0) * (E - 0.5 * rho * usq)
    if p <= 0:
        raise ValueError("eigensystem at invalid state")
    c = math.sqrt(gamma * p / rho)
    H = (E + p) / rho
    lam = np.array([u[0] - c, u[0], u[0], u[0], u[0] + c])
    r1 = np.array([1.0, u[0] - c, u[1], u[2], H - u[0] * c])
    r2 = np.array([1.0, u[0], u[1], u[2], 0.5 * usq])
    r3 = np.array([0.0, 0.0, 1.0, 0.0, u[1]])
    r4 = np.array([0.0, 0.0, 0.0, 1.0, u[2]])
    r5 = np.array([1.0, u[0] + c, u[1], u[2], H + u[0] * c])
    # orientation: Lambda = (gamma+1) c / (2 rho) > 0 for the unflipped r5
    r5 = -r5
    r1 = -r1  # keep the symmetric convention for the (u1 - c) field
    R = np.stack([r1, r2, r3, r4, r5], axis=1)
    Lft = np.linalg.inv(R)
    return EigenStructure(lambdas=lam, R=R, Lft=Lft)


def genuine_nonlinearity(U: np.ndarray, gamma: float = 5.0 / 3.0, h: float = 1e-5) -> float:
    """Lambda = grad_(rho,m,E) lambda_5 . r_5, by Richardson finite differences."""
    es = eigensystem(U, gamma)
    r5 = es.R[:, 4]
    r5 = r5 / abs(r5[0])  # paper normalization: first component +-1

    def lam5(V):
        return eigensystem(V, gamma).lambdas[4]

    d1 = (lam5(U + h * r5) - lam5(U - h * r5)) / (2 * h)
    d2 = (lam5(U + 2 * h * r5) - lam5(U - 2 * h * r5)) / (4 * h)
    return float((4.0 * d1 - d2) / 3.0)


@dataclass(frozen=True)
class HugoniotPoint:
    U_R: np.ndarray
    s: float
    eps: float
    residual: float
    newton_iters: int


def hugoniot_solve(
    U_L: np.ndarray,
    eps: float,
    gamma: float = 5.0 / 3.0,
    eps_max: float = 0.1,
    tol: float = 1e-13,
) -> HugoniotPoint:
    """Newton-refined point on the p = 5 Hugoniot branch with s = lambda_5(U_L) - eps.

    Initialized from the center-manifold parameterization
    U_R ~ U_L + mu r_5 with mu = -2 eps / Lambda.
    """
    if eps < 0 or eps > eps_max:
        raise ValueError(f"eps = {eps} outside (0, eps_max = {eps_max}]")
    es = eigensystem(U_L, gamma)
    s = float(es.lambdas[4] - eps)
    if eps == 0.0:
        return HugoniotPoint(U_R=np.array(U_L, dtype=float), s=s, eps=0.0, residual=0.0, newton_iters=0)
    Lam = genuine_nonlinearity(U_L, gamma)
    r5 = es.R[:, 4]
    r5 = r5 / abs(r5[0])
    FL = euler_flux(U_L, gamma)
    U = np.array(U_L, dtype=float) + (-2.0 * eps / Lam) * r5

    def G(V):
        return euler_flux(V, gamma) - FL - s * (V - U_L)

    it = 0
    for it in range(1, 60):
        g = G(U)
        if np.max(np.abs(g)) < tol:
            break
        J = flux_jacobian(U, gamma) - s * np.eye(5)
        step = np.linalg.solve(J, g)
        # damped update to stay inside the physical region
        lam = 1.0
        while lam > 1e-4:
            try:
                Un = U - lam * step
                euler_flux(Un, gamma)
                break
            except ValueError:
                lam *= 0.5
        U = U - lam * step
    res = float(np.max(np.abs(G(U))))
    if res > 1e-12:
        raise RuntimeError(f"Hugoniot Newton did not converge: residual {res:.3e}")
    if np.max(np.abs(U - U_L)) < 10 * eps / abs(Lam) * 1e-3:
        raise RuntimeError("Hugoniot Newton collapsed to the trivial branch")
    return HugoniotPoint(U_R=U, s=s, eps=float(eps), residual=res, newton_iters=it)


# --- transport coefficients --------------------------------------------------


@dataclass(frozen=True)
class TransportCoefficients:
    mu: float
    lambda_v: float
    kappa_th: float
    theta: float
    kappa_reg: float
    burnett_residuals: tuple[float, ...] = ()

    @property
    def longitudinal(self) -> float:
        """Coefficient of d_x u_1 in the momentum balance (2 mu + lambda in
        the stress-tensor convention of the dissipation matrix)."""
        return self.mu + self.lambda_v


def burnett_vectors(basis: HermiteBasis) -> dict[str, np.ndarray]:
    """Coefficient vectors of the Burnett functions times sqrt(mu0).

    A_hat_j = ((|v|^2 - 5)/2) v_j and B_hat_ij = v_i v_j - delta_ij |v|^2 / 3;
    both are exact finite Hermite combinations and purely microscopic.
    """
    if basis.N_v < 3:
        raise ValueError("Burnett functions require N_v >= 3")
    nb = basis.size
    ix = basis.index_of
    s2, s6 = math.sqrt(2.0), math.sqrt(6.0)
    out = {}
    b = np.zeros(nb)
    b[ix((1, 1, 0))] = 1.0
    out["B21"] = b
    for name, main in (("B11", 0), ("B22", 1)):
        b = np.zeros(nb)
        for ax, e2 in enumerate([(2, 0, 0), (0, 2, 0), (0, 0, 2)]):
            b[ix(e2)] = s2 * (2.0 / 3.0 if ax == main else -1.0 / 3.0)
        out[name] = b
    a = np.zeros(nb)
    a[ix((3, 0, 0))] = s6 / 2.0
    a[ix((1, 2, 0))] = s2 / 2.0
    a[ix((1, 0, 2))] = s2 / 2.0
    out["A1"] = a
    return out


def _phi_forms(ops: OperatorSet, kappa_eff: float) -> tuple[dict[str, float], tuple[float, ...]]:
    """Quadratic forms <b, (L^k)^{-1} P_perp b'> at theta = 1."""
    bset = burnett_vectors(ops.basis)
    L = ops.L + kappa_eff * ops.L_R
    sols = {}
    residuals = []
    for name, vec in bset.items():
        x = microscopic_solve(L, ops.kernel_vectors, vec)
        residuals.append(float(np.linalg.norm(L @ x - vec)))
        sols[name] = x
    forms = {
        "B21": float(bset["B21"] @ sols["B21"]),
        "B11B22": float(bset["B11"] @ sols["B22"]),
        "B11": float(bset["B11"] @ sols["B11"]),
        "A1": float(bset["A1"] @ sols["A1"]),
        "A1B11": float(bset["A1"] @ sols["B11"]),
        "A1B21": float(bset["A1"] @ sols["B21"]),
    }
    return forms, tuple(residuals)


def transport_coefficients(
    theta: float, kappa: float, ops: OperatorSet, rtol_solve: float = 1e-9
) -> TransportCoefficients:
    """Viscosities and heat conductivity at temperature theta, regularization kappa.

    mu(theta)      = theta^{5/2} <B_hat_21, (L^{k theta})^{-1} B_hat_21 sqrt(mu0)>,
    lambda(theta)  = mu(theta) + theta^{5/2} <B_hat_11, (L^{k theta})^{-1} B_hat_22 ...>,
    kappa_th(theta)= theta^{5/2} <A_hat_1, (L^{k theta})^{-1} A_hat_1 ...>,

    with the velocity rescaling v -> sqrt(theta) v reducing every solve to the
    reference center and effective regularization kappa * theta.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    kappa_eff = kappa * theta
    if not 0.0 <= kappa_eff <= 1.0 + 1e-12:
        raise ValueError(f"effective regularization kappa*theta = {kappa_eff} outside [0, 1]")
    forms, residuals = _phi_forms(ops, kappa_eff)
    if max(residuals) > rtol_solve * 10:
        raise RuntimeError(f"microscopic solve residual too large: {max(residuals):.3e}")
    scale = theta**2.5
    mu = scale * forms["B21"]
    lam = mu + scale * forms["B11B22"]
    kth = scale * forms["A1"]
    if min(mu, lam, kth) <= 0:
        raise RuntimeError("transport coefficients must be positive")
    return TransportCoefficients(
        mu=mu,
        lambda_v=lam,
        kappa_th=kth,
        theta=float(theta),
        kappa_reg=float(kappa),
        burnett_residuals=residuals,
    )


def burnett_orthogonality(ops: OperatorSet, kappa: float = 0.0) -> float:
    """max over index combinations of |<A_hat_i, B_jk>| (zero by parity)."""
    forms, _ = _phi_forms(ops, kappa)
    return max(abs(forms["A1B11"]), abs(forms["A1B21"]))


def burnett_identity_defect(ops: OperatorSet, kappa: float = 0.0) -> float:
    """Relative defect of <B11,B11> = 2 <B12,B12> + <B11,B22> (isotropy)."""
    forms, _ = _phi_forms(ops, kappa)
    lhs = forms["B11"]
    rhs = 2.0 * forms["B21"] + forms["B11B22"]
    return abs(lhs - rhs) / abs(lhs)


# --- dissipation matrix and symmetrizer --------------------------------------


def dissipation_matrix(state: PrimState, tc: TransportCoefficients) -> np.ndarray:
    """B(U) with viscous fluxes (0, nu u1_x, mu u2_x, mu u3_x,
    kappa theta_x + nu u1 u1_x + mu u2 u2_x + mu u3 u3_x), nu = mu + lambda_v.

    Matches the evaluated block form at U_L: zero first row, (2,2) entry nu,
    (3,3) = (4,4) = mu, (5,1) = -kappa_th, (5,5) = (gamma-1) kappa_th.
    """
    rho = state.rho
    u = np.asarray(state.u)
    gamma = state.gamma
    E = state.to_macro().E
    nu = tc.longitudinal
    mu = tc.mu
    kth = tc.kappa_th
    B = np.zeros((5, 5))
    B[1] = nu / rho * np.array([-u[0], 1.0, 0.0, 0.0, 0.0])
    B[2] = mu / rho * np.array([-u[1], 0.0, 1.0, 0.0, 0.0])
    B[3] = mu / rho * np.array([-u[2], 0.0, 0.0, 1.0, 0.0])
    usq = float(u @ u)
    B[4] = kth * (gamma - 1.0) / rho * np.array(
        [-E / rho + usq, -u[0], -u[1], -u[2], 1.0]
    )
    B[4] += u[0] * B[1] + u[1] * B[2] + u[2] * B[3]
    return B


def symmetrizer(gamma: float = 5.0 / 3.0) -> np.ndarray:
    """The A^0 of the compressible Navier-Stokes entropy symmetrizer at U_L."""
    g1 = gamma - 1.0
    A0 = np.eye(5)
    A0[0, 4] = A0[4, 0] = 1.0 / g1
    A0[4, 4] = gamma / g1**2
    return A0


def symmetrizer_checks(tc: TransportCoefficients, gamma: float = 5.0 / 3.0) -> dict:
    """Verify symmetrizability and the Kawashima condition at (U_L, s_L).

    A hard error on failure: the downstream compensator construction (and the
    hyperbolicity of the Galerkin endpoint matrices) depends on these facts.
    """
    U_L = reference_state(gamma).vector()
    s_L = math.sqrt(gamma)
    A0 = symmetrizer(gamma)
    evals = np.linalg.eigvalsh(A0)
    if evals.min() <= 0:
        raise RuntimeError("A0 is not positive definite")
    A = flux_jacobian(U_L, gamma) - s_L * np.eye(5)
    AA0 = A @ A0
    if np.max(np.abs(AA0 - AA0.T)) > 1e-10:
        raise RuntimeError("A A0 is not symmetric")
    B = dissipation_matrix(PrimState(1.0, (0.0, 0.0, 0.0), 1.0, gamma), tc)
    BA0 = B @ A0
    target = np.diag([0.0, tc.longitudinal, tc.mu, tc.mu, tc.kappa_th])
    if np.max(np.abs(BA0 - target)) > 1e-10:
        raise RuntimeError("B(U_L) A0 is not the expected diagonal")
    # Kawashima: e1 spans ker(B A0) and must not be an eigenvector of A A0
    col = AA0 @ np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    off = np.linalg.norm(col[1:])
    if off < 1e-12:
        raise RuntimeError("Kawashima condition fails: e1 is an eigenvector of A A0")
    return {
        "A0_min_eig": float(evals.min()),
        "AA0_asym": float(np.max(np.abs(AA0 - AA0.T))),
        "BA0_diag_err": float(np.max(np.abs(BA0 - target))),
        "AA0_e1": col,
        "kawashima_off_component": float(off),
    }


def alpha_constant(tc: TransportCoefficients, gamma: float = 5.0 / 3.0) -> float:
    """alpha = (l_p . B r_p)(U_L) > 0, computed numerically (never from the
    display formula, whose printed form carries a typo)."""
    U_L = reference_state(gamma).vector()
    es = eigensystem(U_L, gamma)
    r5 = es.R[:, 4]
    l5 = es.Lft[4]
    B = dissipation_matrix(PrimState(1.0, (0.0, 0.0, 0.0), 1.0, gamma), tc)
    return float(l5 @ B @ r5)


# --- linearized Chapman-Enskog viscosity matrix ------------------------------


def moment_rows(basis: HermiteBasis) -> np.ndarray:
    """Rows of the moment functional I[sqrt(mu0) f] = (rho, m, E) on coefficients."""
    nb = basis.size
    ix = basis.index_of
    R = np.zeros((5, nb))
    R[0, ix((0, 0, 0))] = 1.0
    R[1, ix((1, 0, 0))] = 1.0
    R[2, ix((0, 1, 0))] = 1.0
    R[3, ix((0, 0, 1))] = 1.0
    R[4, ix((0, 0, 0))] = 1.5
    s2 = math.sqrt(2.0)
    for e2 in ((2, 0, 0), (0, 2, 0), (0, 0, 2)):
        R[4, ix(e2)] = s2 / 2.0
    return R


def tangent_basis(ops: OperatorSet, center: PrimState) -> np.ndarray:
    """Coefficient columns spanning the conjugated tangent space at mu_center."""
    basis = ops.basis
    m = maxwellian_coefficients(basis, center.rho, np.asarray(center.u), center.theta)
    V = [basis.multiplication_matrix(ax) for ax in range(3)]
    cols = [m] + [V[ax] @ m for ax in range(3)]
    cols.append(V[0] @ (V[0] @ m) + V[1] @ (V[1] @ m) + V[2] @ (V[2] @ m))
    return np.stack(cols, axis=1)


def oblique_projector(ops: OperatorSet, center: PrimState) -> np.ndarray:
    """The moment-matching projector P_NS onto the tangent space at mu_center."""
    T = tangent_basis(ops, center)
    I5 = moment_rows(ops.basis)
    M = I5 @ T
    return T @ np.linalg.solve(M, I5)


def kernel_moment_map(ops: OperatorSet) -> np.ndarray:
    """J mapping kernel coordinates (rows of kernel_vectors) to (rho, m, E)."""
    return moment_rows(ops.basis) @ ops.kernel_vectors.T


def B_kappa_matrix(ops: OperatorSet, center: PrimState, kappa: float) -> np.ndarray:
    """The matrix P_mu0 [ v1 (L_NS^k)^{-1} (P_NS^perp [v1 P_NS]) ] on ker L,
    returned in conservative (rho, m, E) coordinates.

    At the reference Maxwellian with kappa = 0 this reproduces the
    dissipation matrix of the Navier-Stokes system (the coordinate change is
    the moment map J)."""
    basis = ops.basis
    m = maxwellian_coefficients(basis, center.rho, np.asarray(center.u), center.theta)
    L_NS = ops.linearized_at(m, kappa=kappa)
    P_NS = oblique_projector(ops, center)
    V1 = basis.multiplication_matrix(0)
    kv = ops.kernel_vectors
    cols = np.zeros((5, 5))
    for k in range(5):
        f = kv[k]
        g = V1 @ (P_NS @ f)
        g = g - P_NS @ g  # P_NS^perp
        y = microscopic_solve(L_NS, kv, g)
        cols[:, k] = kv @ (V1 @ y)
    J = kernel_moment_map(ops)
    return J @ cols @ np.linalg.inv(J)
