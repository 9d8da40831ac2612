"""Compressible Navier-Stokes traveling waves and their linearized solver.

Profile: with left state U_L = (1, 0, 0, 0, 1/(gamma-1)) (the standard
Maxwellian) and shock speed s = sqrt(gamma * theta_L) - eps, the integrated
traveling-wave system reduces, through the algebraic mass relation
rho (u1 - s) = -s, to a planar ODE for w = (u1, theta):

    nu(theta) u1'                    = -s u1 + rho theta - 1
    kappa(theta) theta' + nu u1 u1'  = -s(theta/(g-1) + u1^2/2) + rho theta u1 + s/(g-1)

with rho = s/(s - u1) and nu = mu + lambda_v the longitudinal viscosity.
The boundary-value problem is discretized by midpoint collocation with
projected boundary conditions (the solution enters the unstable manifold of
w_L and the stable manifold of w_R) and the translation fixed by the phase
convention eta(0) = eta_bar / 2, where eta(x) = l_5 . (U(x) - U_L) is the
center-manifold coordinate and eta_bar = l_5 . (U_R - U_L).

Linearized macroscopic equation: B(u_bar) U_x = (grad F(u_bar) - s) U + g is
solved by the first-component elimination (the mass row is algebraic),
reduction to a 4-dimensional w-ODE, pointwise spectral splitting into
strongly stable / strongly unstable / central subspaces, and propagator
sweeps from -inf / +inf with the central scalar integrated from x = 0 with
z^c(0) = d. The O(eps^2) conjugation coupling is folded in by a short
fixed-point iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import hydro
from .hydro import PrimState, TransportCoefficients


@dataclass
class TransportLaw:
    """theta-dependence of the transport coefficients.

    For kappa_reg = 0 the Coulomb scaling is the exact power law theta^{5/2};
    otherwise a quartic fit of theta^{5/2} Phi(kappa_reg * theta) over a
    bracket around theta = 1 is used (the profile only visits an O(eps)
    neighborhood).
    """

    nu1: float  # longitudinal viscosity at theta = 1
    kth1: float  # heat conductivity at theta = 1
    mu1: float  # shear viscosity at theta = 1
    kappa_reg: float = 0.0
    _nu_poly: np.ndarray | None = None
    _kth_poly: np.ndarray | None = None

    @staticmethod
    def from_operators(ops, kappa_reg: float = 0.0, bracket=(0.75, 1.4)) -> "TransportLaw":
        tc1 = hydro.transport_coefficients(1.0, kappa_reg, ops)
        law = TransportLaw(
            nu1=tc1.longitudinal, kth1=tc1.kappa_th, mu1=tc1.mu, kappa_reg=kappa_reg
        )
        if kappa_reg != 0.0:
            ths = np.linspace(bracket[0], bracket[1], 13)
            nus, kths = [], []
            for th in ths:
                tc = hydro.transport_coefficients(th, kappa_reg, ops)
                nus.append(tc.longitudinal)
                kths.append(tc.kappa_th)
            law._nu_poly = np.polyfit(ths, nus, 4)
            law._kth_poly = np.polyfit(ths, kths, 4)
        return law

    @staticmethod
    def from_coefficients(tc: TransportCoefficients) -> "TransportLaw":
        return TransportLaw(nu1=tc.longitudinal, kth1=tc.kappa_th, mu1=tc.mu,
                            kappa_reg=tc.kappa_reg)

    def nu(self, theta):
        if self._nu_poly is not None:
            return np.polyval(self._nu_poly, theta)
        return self.nu1 * theta**2.5

    def kth(self, theta):
        if self._kth_poly is not None:
            return np.polyval(self._kth_poly, theta)
        return self.kth1 * theta**2.5

    def dnu(self, theta):
        if self._nu_poly is not None:
            return np.polyval(np.polyder(self._nu_poly), theta)
        return 2.5 * self.nu1 * theta**1.5

    def dkth(self, theta):
        if self._kth_poly is not None:
            return np.polyval(np.polyder(self._kth_poly), theta)
        return 2.5 * self.kth1 * theta**1.5

    def coefficients(self, theta: float) -> TransportCoefficients:
        mu = self.mu1 * theta**2.5
        return TransportCoefficients(
            mu=mu,
            lambda_v=self.nu(theta) - mu,
            kappa_th=self.kth(theta),
            theta=theta,
            kappa_reg=self.kappa_reg,
        )


@dataclass
class ShockProfile:
    eps: float
    s: float
    gamma: float
    grid: np.ndarray  # x_j, uniform, x = 0 included
    w: np.ndarray  # (N, 2): u1, theta
    U: np.ndarray  # (N, 5) conservative states on the mass-constraint manifold
    U_L: np.ndarray
    U_R: np.ndarray
    eta: np.ndarray  # center coordinate l5 . (U - U_L)
    eta_bar: float
    alpha: float
    Lambda: float
    law: TransportLaw
    collocation_residual: float
    endpoint_gap: tuple[float, float]
    decay_fit: dict = field(default_factory=dict)
    translate_norm: str = "eta(0) = eta_bar/2"

    def theta_of_x(self, x):
        return np.interp(x, self.grid, self.w[:, 1])

    def prim_at(self, j: int) -> PrimState:
        u1, th = self.w[j]
        rho = self.s / (self.s - u1)
        return PrimState(rho=float(rho), u=(float(u1), 0.0, 0.0), theta=float(th), gamma=self.gamma)


def _reduced_rhs(w, s, gamma, law):
    """R(w) and D(w) with D(w) w' = R(w); w = (u1, theta)."""
    u, th = w
    rho = s / (s - u)
    R1 = -s * u + rho * th - 1.0
    R2 = -s * (th / (gamma - 1.0) + 0.5 * u * u) + rho * th * u + s / (gamma - 1.0)
    nu = law.nu(th)
    kth = law.kth(th)
    D = np.array([[nu, 0.0], [nu * u, kth]])
    return np.array([R1, R2]), D


def _reduced_jacobians(w, s, gamma, law):
    """dR/dw and dD/dw (the latter as a (2,2,2) array, last index = w-component)."""
    u, th = w
    rho = s / (s - u)
    drho = rho / (s - u)
    dR = np.array(
        [
            [-s + th * drho, rho],
            [-s * u + th * (rho + u * drho), -s / (gamma - 1.0) + rho * u],
        ]
    )
    nu, dnu = law.nu(th), law.dnu(th)
    dkth = law.dkth(th)
    dD = np.zeros((2, 2, 2))
    dD[0, 0, 1] = dnu
    dD[1, 0, 0] = nu
    dD[1, 0, 1] = dnu * u
    dD[1, 1, 1] = dkth
    return dR, dD


def _flow_jacobian(w, s, gamma, law):
    """Jacobian of w' = D(w)^{-1} R(w) at an equilibrium (R = 0 there)."""
    R, D = _reduced_rhs(w, s, gamma, law)
    dR, _ = _reduced_jacobians(w, s, gamma, law)
    return np.linalg.solve(D, dR)


def conservative_state(w, s, gamma):
    """Lift (u1, theta) to U = (rho, m, E) on the mass-constraint manifold."""
    u, th = np.asarray(w).T if np.ndim(w) > 1 else (w[0], w[1])
    rho = s / (s - u)
    m1 = rho * u
    E = rho * (th / (gamma - 1.0) + 0.5 * u * u)
    if np.ndim(w) > 1:
        z = np.zeros_like(np.atleast_1d(rho))
        return np.stack([rho, m1, z, z, E], axis=-1)
    return np.array([rho, m1, 0.0, 0.0, E])


def solve_profile(
    eps: float,
    law: TransportLaw,
    X_mult: float | None = None,
    N_x: int = 1501,
    gamma: float = 5.0 / 3.0,
    newton_tol: float = 1e-11,
    max_newton: int = 40,
) -> ShockProfile:
    """Solve the viscous shock two-point BVP by midpoint collocation + Newton.

    The initial guess is the exact logistic solution of the center-manifold
    Burgers equation alpha eta' = eps eta + (Lambda/2) eta^2, which the
    quadratic expansion of the reduced flow proves to be the leading behavior.
    The half-width defaults to X = max(25, 20 alpha)/eps so the endpoint gap
    e^{-eps X / alpha} sits near machine level.
    """
    if eps <= 0 or eps > 0.1:
        raise ValueError("eps outside validated range (0, 0.1]")
    U_L = hydro.reference_state(gamma).vector()
    es = hydro.eigensystem(U_L, gamma)
    s = float(es.lambdas[4] - eps)
    hp = hydro.hugoniot_solve(U_L, eps, gamma)
    U_R = hp.U_R
    l5 = es.Lft[4]
    Lambda = hydro.genuine_nonlinearity(U_L, gamma)
    tc1 = law.coefficients(1.0)
    alpha = hydro.alpha_constant(tc1, gamma)
    eta_bar = float(l5 @ (U_R - U_L))
    if X_mult is None:
        X_mult = max(25.0, 20.0 * alpha)
    X = X_mult / eps
    if N_x % 2 == 0:
        N_x += 1
    x = np.linspace(-X, X, N_x)
    h = x[1] - x[0]

    w_L = np.array([0.0, 1.0])
    u_R = U_R[1] / U_R[0]
    th_R = (gamma - 1.0) * (U_R[4] / U_R[0] - 0.5 * u_R * u_R)
    w_R = np.array([u_R, th_R])

    # logistic initializer mapped through U_L + eta r5
    r5 = es.R[:, 4] / abs(es.R[0, 4])
    eta0 = eta_bar / (1.0 + np.exp(np.clip(-(eps / alpha) * x, -500, 500)))
    Uin = U_L[None, :] + eta0[:, None] * r5[None, :]
    u_in = Uin[:, 1] / Uin[:, 0]
    th_in = (gamma - 1.0) * (Uin[:, 4] / Uin[:, 0] - 0.5 * u_in**2)
    W = np.stack([u_in, th_in], axis=1)
    # blend exact endpoints to be safe near the boundaries
    W[0], W[-1] = w_L, w_R

    # projected boundary conditions
    J_L = _flow_jacobian(w_L, s, gamma, law)
    J_R = _flow_jacobian(w_R, s, gamma, law)

    def eig_rows(J, select):
        lam, V = np.linalg.eig(J)
        if np.max(np.abs(lam.imag)) > 1e-10 * np.max(np.abs(lam)):
            raise RuntimeError("endpoint linearization has complex eigenvalues")
        lam = lam.real
        Vl = np.linalg.inv(V.real)
        rows = [Vl[i] for i in range(len(lam)) if select(lam[i])]
        return rows

    rows_L = eig_rows(J_L, lambda t: t < 0)  # kill stable components at -X
    rows_R = eig_rows(J_R, lambda t: t > 0)  # kill unstable components at +X
    if len(rows_L) + len(rows_R) != 1:
        raise RuntimeError(
            f"unexpected endpoint splitting: {len(rows_L)} stable at L, "
            f"{len(rows_R)} unstable at R (expected total 1)"
        )
    j0 = N_x // 2  # x = 0 node

    def eta_of_w(wj):
        return float(l5 @ (conservative_state(wj, s, gamma) - U_L))

    def residual(W):
        r = np.zeros(2 * N_x)
        wm = 0.5 * (W[1:] + W[:-1])
        dw = (W[1:] - W[:-1]) / h
        for j in range(N_x - 1):
            R, D = _reduced_rhs(wm[j], s, gamma, law)
            r[2 * j : 2 * j + 2] = D @ dw[j] - R
        k = 2 * (N_x - 1)
        for row in rows_L:
            r[k] = row @ (W[0] - w_L)
            k += 1
        for row in rows_R:
            r[k] = row @ (W[-1] - w_R)
            k += 1
        r[k] = eta_of_w(W[j0]) - 0.5 * eta_bar
        return r

    def jacobian(W):
        rows, cols, vals = [], [], []
        wm = 0.5 * (W[1:] + W[:-1])
        dw = (W[1:] - W[:-1]) / h
        for j in range(N_x - 1):
            dR, dD = _reduced_jacobians(wm[j], s, gamma, law)
            _, D = _reduced_rhs(wm[j], s, gamma, law)
            Dd = np.einsum("ilk,l->ik", dD, dw[j])
            base = 0.5 * (Dd - dR)
            Jl = -D / h + base
            Jr = D / h + base
            for a in range(2):
                for b in range(2):
                    rows += [2 * j + a, 2 * j + a]
                    cols += [2 * j + b, 2 * (j + 1) + b]
                    vals += [Jl[a, b], Jr[a, b]]
        k = 2 * (N_x - 1)
        for row in rows_L:
            for b in range(2):
                rows.append(k)
                cols.append(b)
                vals.append(row[b])
            k += 1
        for row in rows_R:
            for b in range(2):
                rows.append(k)
                cols.append(2 * (N_x - 1) + b)
                vals.append(row[b])
            k += 1
        # phase row by finite differences (2 entries)
        wj = W[j0]
        hfd = 1e-7
        for b in range(2):
            e = np.zeros(2)
            e[b] = hfd
            dval = (eta_of_w(wj + e) - eta_of_w(wj - e)) / (2 * hfd)
            rows.append(k)
            cols.append(2 * j0 + b)
            vals.append(dval)
        return sp.csr_matrix((vals, (rows, cols)), shape=(2 * N_x, 2 * N_x))

    res = residual(W)
    for _ in range(max_newton):
        nrm = np.max(np.abs(res))
        if nrm < newton_tol:
            break
        J = jacobian(W)
        step = spla.spsolve(J, res).reshape(N_x, 2)
        lam = 1.0
        while lam > 1e-6:
            Wn = W - lam * step
            try:
                rn = residual(Wn)
            except (ValueError, FloatingPointError):
                lam *= 0.5
                continue
            if np.max(np.abs(rn)) < nrm:
                W, res = Wn, rn
                break
            lam *= 0.5
        else:
            raise RuntimeError("profile Newton line search failed")
    else:
        raise RuntimeError(f"profile Newton did not converge: residual {np.max(np.abs(res)):.3e}")

    U = conservative_state(W, s, gamma)
    eta = (U - U_L) @ l5
    prof = ShockProfile(
        eps=float(eps),
        s=s,
        gamma=gamma,
        grid=x,
        w=W,
        U=U,
        U_L=U_L,
        U_R=U_R,
        eta=eta,
        eta_bar=eta_bar,
        alpha=alpha,
        Lambda=Lambda,
        law=law,
        collocation_residual=float(np.max(np.abs(res[: 2 * (N_x - 1)]))),
        endpoint_gap=(
            float(np.linalg.norm(U[0] - U_L)),
            float(np.linalg.norm(U[-1] - U_R)),
        ),
    )
    prof.decay_fit = _decay_fits(prof)
    return prof


def _decay_fits(prof: ShockProfile) -> dict:
    """Least-squares exponential fits of |U - U_end| on the outer windows.

    The fit window is |x| in [X/2, 0.85 X]: past 0.85 X the deviation sits at
    the boundary-truncation floor of the BVP, which would flatten the fit.
    """
    x = prof.grid
    X = x[-1]
    out = {}
    for side, Uend in (("left", prof.U_L), ("right", prof.U_R)):
        a = np.linalg.norm(prof.U - Uend[None, :], axis=1)
        if side == "left":
            mask = (x < -X / 2.0) & (x > -0.85 * X)
            sgn = 1.0
        else:
            mask = (x > X / 2.0) & (x < 0.85 * X)
            sgn = -1.0
        xs, ys = x[mask], a[mask]
        good = ys > 1e-280
        xs, ys = xs[good], np.log(ys[good])
        slope, logpref = np.polyfit(xs, ys, 1)
        rate = sgn * slope  # decay rate > 0
        out[side] = {
            "rate": float(rate),
            "prefactor": float(math.exp(min(logpref, 300.0))),
            "M": float(prof.eps / rate) if rate > 0 else float("inf"),
        }
    return out


def center_ode_rhs(eta_val: float, s: float, prof_or_law, gamma: float = 5.0 / 3.0) -> float:
    """The reduced scalar field F(eta, s) on the (numerically fitted) center manifold.

    The invariant curve is modeled by the quadratic graph through both
    equilibria w_L, w_R(s) with tangent along the central eigenvector at w_L;
    F is the eta-speed of the reduced planar flow along that curve, so
    F(0, s) = F(eta_bar, s) = 0 exactly and dF/deta(0, s) = alpha^{-1} eps + O(eps^2).
    """
    law = prof_or_law.law if isinstance(prof_or_law, ShockProfile) else prof_or_law
    U_L = hydro.reference_state(gamma).vector()
    es = hydro.eigensystem(U_L, gamma)
    s_L = float(es.lambdas[4])
    eps = s_L - s
    l5 = es.Lft[4]
    w_L = np.array([0.0, 1.0])
    if eps <= 0:
        # at s = s_L the only equilibrium is w_L; fall back to the tangent flow
        hp_UR = U_L
    else:
        hp_UR = hydro.hugoniot_solve(U_L, eps, gamma).U_R
    eta_bar = float(l5 @ (hp_UR - U_L))
    J_L = _flow_jacobian(w_L, s, gamma, law)
    lam, V = np.linalg.eig(J_L)
    lam = lam.real
    c_idx = int(np.argmin(np.abs(lam)))
    vc = V.real[:, c_idx]
    # scale the tangent so that d(eta)/d(parameter) = 1 at w_L
    detadw = _eta_gradient(w_L, s, gamma, l5, U_L)
    vc = vc / float(detadw @ vc)
    u_R = hp_UR[1] / hp_UR[0]
    th_R = (gamma - 1.0) * (hp_UR[4] / hp_UR[0] - 0.5 * u_R**2)
    w_R = np.array([u_R, th_R])
    if abs(eta_bar) < 1e-14:
        q = np.zeros(2)
    else:
        q = (w_R - w_L - eta_bar * vc) / eta_bar**2

    w = w_L + eta_val * vc + eta_val**2 * q
    R, D = _reduced_rhs(w, s, gamma, law)
    wdot = np.linalg.solve(D, R)
    detadw_here = _eta_gradient(w, s, gamma, l5, U_L)
    # eta-speed of the planar flow along the fitted curve
    return float(detadw_here @ wdot)


def _eta_gradient(w, s, gamma, l5, U_L):
    hfd = 1e-7
    out = np.zeros(2)
    for b in range(2):
        e = np.zeros(2)
        e[b] = hfd
        fp = float(l5 @ (conservative_state(w + e, s, gamma) - U_L))
        fm = float(l5 @ (conservative_state(w - e, s, gamma) - U_L))
        out[b] = (fp - fm) / (2 * hfd)
    return out


# --- linearized macroscopic solver -------------------------------------------


@dataclass
class SpectralSplit:
    Ps: np.ndarray
    Pc: np.ndarray
    Pu: np.ndarray
    mu_c: float
    Q: np.ndarray  # columns: [stable..., center, unstable...]
    n_s: int
    n_u: int


@dataclass
class LinearMacroSolution:
    x: np.ndarray
    U: np.ndarray  # (N, 5)
    d: float
    g: np.ndarray
    residual: float
    constraint_value: float
    iterations: int
    split_norms: dict


def _q2_columns(s: float) -> np.ndarray:
    """Constant basis of ker(grad f^I - s Id~) = {n : n_m1 = s n_rho}."""
    Q2 = np.zeros((5, 4))
    Q2[0, 0] = 1.0
    Q2[1, 0] = s
    Q2[2, 1] = 1.0
    Q2[3, 2] = 1.0
    Q2[4, 3] = 1.0
    return Q2


def _kerB_direction(B: np.ndarray) -> np.ndarray:
    """Unit kernel vector of B(u) (the non-dissipated direction)."""
    _, _, Vt = np.linalg.svd(B)
    k = Vt[-1]
    if k[0] < 0:
        k = -k
    return k


def _reduced_linear_data(prof: ShockProfile):
    """m(x), (B q2)^{-1}(x), q1(x) and helpers for the w-ODE."""
    N = prof.grid.shape[0]
    s, gamma = prof.s, prof.gamma
    Q2 = _q2_columns(s)
    m = np.zeros((N, 4, 4))
    BQ2inv = np.zeros((N, 4, 4))
    q1 = np.zeros((N, 5))
    aI = np.zeros(N)  # (grad f^I - s Id~) q1, the scalar of the algebraic solve
    for j in range(N):
        st = prof.prim_at(j)
        tc = prof.law.coefficients(st.theta)
        B = hydro.dissipation_matrix(st, tc)
        A = hydro.flux_jacobian(prof.U[j], gamma) - s * np.eye(5)
        k = _kerB_direction(B)
        q1[j] = k
        aI[j] = k[1] - s * k[0]  # row 1 of A applied to k
        BQ2 = (B @ Q2)[1:, :]
        BQ2inv[j] = np.linalg.inv(BQ2)
        m[j] = BQ2inv[j] @ (A @ Q2)[1:, :]
    return m, BQ2inv, q1, aI, Q2


def _split_matrix(mj: np.ndarray, gap_factor: float = 0.2) -> tuple:
    lam, V = np.linalg.eig(mj)
    if np.max(np.abs(lam.imag)) > 1e-8 * (1.0 + np.max(np.abs(lam.real))):
        raise RuntimeError("dichotomy failure: complex eigenvalues in the reduced ODE")
    lam = lam.real
    V = V.real
    order = np.argsort(lam)
    lam, V = lam[order], V[:, order]
    fast = np.abs(lam) > gap_factor * np.max(np.abs(lam))
    n_center = int(np.sum(~fast))
    if n_center != 1:
        raise RuntimeError(
            f"dichotomy failure: central eigenspace has rank {n_center} (eigenvalues {lam})"
        )
    c_idx = int(np.where(~fast)[0][0])
    stable = [i for i in range(4) if fast[i] and lam[i] < 0]
    unstable = [i for i in range(4) if fast[i] and lam[i] > 0]
    cols = stable + [c_idx] + unstable
    Q = V[:, cols]
    Q = Q / np.linalg.norm(Q, axis=0, keepdims=True)
    return lam[cols], Q, len(stable), len(unstable)


def spectral_split(prof: ShockProfile, where) -> SpectralSplit:
    """Spectral projectors of the reduced coefficient matrix m(x).

    ``where`` is an x value, or "L"/"R" for the endpoint matrices.
    """
    m, _, _, _, _ = _reduced_linear_data(prof)
    if where == "L":
        j = 0
    elif where == "R":
        j = m.shape[0] - 1
    else:
        j = int(np.argmin(np.abs(prof.grid - float(where))))
    lam, Q, n_s, n_u = _split_matrix(m[j])
    Qi = np.linalg.inv(Q)
    Ps = Q[:, :n_s] @ Qi[:n_s, :]
    Pc = Q[:, n_s : n_s + 1] @ Qi[n_s : n_s + 1, :]
    Pu = Q[:, n_s + 1 :] @ Qi[n_s + 1 :, :]
    return SpectralSplit(Ps=Ps, Pc=Pc, Pu=Pu, mu_c=float(lam[n_s]), Q=Q, n_s=n_s, n_u=n_u)


def linearized_macro_solve(
    prof: ShockProfile,
    g: np.ndarray,
    d: float,
    max_sweeps: int = 12,
    sweep_tol: float = 1e-12,
) -> LinearMacroSolution:
    """Solve B(u_bar) U_x = (grad F(u_bar) - s) U + g with l_eps(U(0)) = d."""
    x = prof.grid
    N = x.shape[0]
    h = x[1] - x[0]
    g = np.asarray(g, dtype=float)
    if g.shape != (N, 5):
        raise ValueError("forcing g must have shape (N, 5)")
    m, BQ2inv, q1, aI, Q2 = _reduced_linear_data(prof)

    # algebraic elimination of the first component: u = q1 u1 + q2 w, with
    # rows II picking up P_II[A q1] u1 alongside the forcing and the
    # derivative of the eliminated part
    u1 = -g[:, 0] / aI  # coefficient of q1
    q1u1 = q1 * u1[:, None]
    dq1u1 = np.gradient(q1u1, x, axis=0, edge_order=2)
    gt = np.zeros((N, 4))
    for j in range(N):
        st = prof.prim_at(j)
        tc = prof.law.coefficients(st.theta)
        B = hydro.dissipation_matrix(st, tc)
        A = hydro.flux_jacobian(prof.U[j], prof.gamma) - prof.s * np.eye(5)
        gt[j] = BQ2inv[j] @ (
            g[j, 1:] + (A @ q1u1[j])[1:] - (B @ dq1u1[j])[1:]
        )

    # pointwise splitting with sign continuity
    lams = np.zeros((N, 4))
    Qs = np.zeros((N, 4, 4))
    n_s = n_u = None
    for j in range(N):
        lam, Q, ns_j, nu_j = _split_matrix(m[j])
        if n_s is None:
            n_s, n_u = ns_j, nu_j
        elif (ns_j, nu_j) != (n_s, n_u):
            raise RuntimeError("dichotomy failure: splitting dimensions change along x")
        if j > 0:
            for c in range(4):
                if Qs[j - 1, :, c] @ Q[:, c] < 0:
                    Q[:, c] = -Q[:, c]
        lams[j], Qs[j] = lam, Q
    c_idx = n_s
    Qinv = np.linalg.inv(Qs)
    # conjugation coupling C = (Q^{-1})' Q
    dQinv = np.gradient(Qinv, x, axis=0, edge_order=2)
    C = np.einsum("jab,jbc->jac", dQinv, Qs)
    p = np.einsum("jab,jbc,jcd->jad", Qinv, m, Qs)

    z = np.zeros((N, 4))
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        force = np.einsum("jab,jb->ja", Qinv, gt) - np.einsum("jab,jb->ja", C, z)
        znew = np.zeros_like(z)
        # stable block: integrate forward from the frozen particular solution
        if n_s:
            sl = slice(0, n_s)
            znew[0, sl] = -np.linalg.solve(p[0][sl, sl], force[0, sl])
            for j in range(N - 1):
                A0, A1 = p[j][sl, sl], p[j + 1][sl, sl]
                rhs = (np.eye(n_s) + 0.5 * h * A0) @ znew[j, sl] + 0.5 * h * (
                    force[j, sl] + force[j + 1, sl]
                )
                znew[j + 1, sl] = np.linalg.solve(np.eye(n_s) - 0.5 * h * A1, rhs)
        # unstable block: integrate backward
        if n_u:
            su = slice(n_s + 1, 4)
            znew[-1, su] = -np.linalg.solve(p[-1][su, su], force[-1, su])
            for j in range(N - 1, 0, -1):
                A0, A1 = p[j][su, su], p[j - 1][su, su]
                rhs = (np.eye(n_u) - 0.5 * h * A0) @ znew[j, su] - 0.5 * h * (
                    force[j, su] + force[j - 1, su]
                )
                znew[j - 1, su] = np.linalg.solve(np.eye(n_u) + 0.5 * h * A1, rhs)
        # central scalar from x = 0 in both directions
        j0 = N // 2
        znew[j0, c_idx] = d
        for j in range(j0, N - 1):
            a0, a1 = p[j][c_idx, c_idx], p[j + 1][c_idx, c_idx]
            rhs = (1.0 + 0.5 * h * a0) * znew[j, c_idx] + 0.5 * h * (
                force[j, c_idx] + force[j + 1, c_idx]
            )
            znew[j + 1, c_idx] = rhs / (1.0 - 0.5 * h * a1)
        for j in range(j0, 0, -1):
            a0, a1 = p[j][c_idx, c_idx], p[j - 1][c_idx, c_idx]
            rhs = (1.0 - 0.5 * h * a0) * znew[j, c_idx] - 0.5 * h * (
                force[j, c_idx] + force[j - 1, c_idx]
            )
            znew[j - 1, c_idx] = rhs / (1.0 + 0.5 * h * a1)
        delta = np.max(np.abs(znew - z)) / (1.0 + np.max(np.abs(znew)))
        z = znew
        if delta < sweep_tol:
            break

    w = np.einsum("jab,jb->ja", Qs, z)
    U = q1u1 + w @ Q2.T

    # residual of the original equation (midpoint discretization)
    res = 0.0
    for j in range(N - 1):
        Um = 0.5 * (U[j] + U[j + 1])
        gm = 0.5 * (g[j] + g[j + 1])
        st_j, st_j1 = prof.prim_at(j), prof.prim_at(j + 1)
        thm = 0.5 * (st_j.theta + st_j1.theta)
        um = 0.5 * (st_j.u[0] + st_j1.u[0])
        rhom = prof.s / (prof.s - um)
        stm = PrimState(rho=float(rhom), u=(float(um), 0.0, 0.0), theta=float(thm), gamma=prof.gamma)
        B = hydro.dissipation_matrix(stm, prof.law.coefficients(thm))
        Umid = 0.5 * (prof.U[j] + prof.U[j + 1])
        A = hydro.flux_jacobian(Umid, prof.gamma) - prof.s * np.eye(5)
        r = B @ (U[j + 1] - U[j]) / h - A @ Um - gm
        res = max(res, float(np.max(np.abs(r))))

    return LinearMacroSolution(
        x=x,
        U=U,
        d=float(d),
        g=g,
        residual=res,
        constraint_value=constraint_ell(prof, U),
        iterations=sweeps,
        split_norms={
            "stable": float(np.linalg.norm(z[:, :n_s])),
            "center": float(np.linalg.norm(z[:, c_idx])),
            "unstable": float(np.linalg.norm(z[:, n_s + 1 :])),
        },
    )


def constraint_ell(prof: ShockProfile, U) -> float:
    """l_eps(U(0)): the central-mode coefficient of the conjugated solution at x = 0.

    ``U`` is either the (N, 5) field or the 5-vector U(0). Normalized so a
    planted unit central eigenvector returns 1.
    """
    U = np.asarray(U, dtype=float)
    U0 = U[U.shape[0] // 2] if U.ndim == 2 else U
    m, _, q1, _, Q2 = _reduced_linear_data(prof)
    j0 = prof.grid.shape[0] // 2
    lam, Q, n_s, n_u = _split_matrix(m[j0])
    # decompose U0 = q1 a + Q2 w0
    Mat = np.concatenate([q1[j0][:, None], Q2], axis=1)
    coef = np.linalg.solve(Mat, U0)
    w0 = coef[1:]
    z0 = np.linalg.solve(Q, w0)
    return float(z0[n_s])
