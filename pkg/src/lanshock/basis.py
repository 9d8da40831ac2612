"""Truncated 3-D tensor Hermite basis adapted to the Gaussian exp(-|v|^2/4).

The basis functions are H_alpha(v) = sqrt(mu0(v)) * p_alpha(v), where
mu0 = (2*pi)^(-3/2) exp(-|v|^2/2) is the standard Maxwellian and p_alpha are
the orthonormalized (probabilists') Hermite polynomials, so that

    integral H_a H_b dv = delta_ab        (L^2(dv)-orthonormal),
    H_(0,0,0) = sqrt(mu0) exactly.

These are the eigenfunctions of T = -Laplacian_v + |v|^2/4 with eigenvalues
|alpha| + 3/2 (verified by a quadrature oracle in the tests; the value is
measured, never assumed downstream -- only the grading by |alpha| is used).

Quadrature is tensor Gauss-Hermite rescaled to the weight exp(-x^2/2)
(node scaling by sqrt(2) relative to exp(-x^2)), so products of two basis
functions times polynomials are integrated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MultiIndex = tuple[int, int, int]


def graded_indices(order: int) -> list[MultiIndex]:
    """All multi-indices with |alpha| <= order in graded lexicographic order.

    The ordering (total degree first, then lexicographic) is deterministic so
    assembled matrices are reproducible bit-for-bit across runs.
    """
    idx = [
        (i, j, k)
        for i in range(order + 1)
        for j in range(order + 1 - i)
        for k in range(order + 1 - i - j)
    ]
    idx.sort(key=lambda a: (sum(a), a))
    return idx


def basis_size(order: int) -> int:
    """binomial(order+3, 3), the number of multi-indices with |alpha| <= order."""
    return math.comb(order + 3, 3)


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Hermite rule for integrands of the form poly * exp(-|v|^2/2).

    ``nodes_1d``/``weights_1d`` integrate  int g(x) dx  exactly whenever
    g(x) = p(x) exp(-x^2/2) with deg p <= 2*n_q - 1.
    """

    n_q: int
    nodes_1d: np.ndarray
    weights_1d: np.ndarray

    @staticmethod
    def build(n_q: int) -> "QuadratureRule":
        t, w = np.polynomial.hermite.hermgauss(n_q)
        nodes = math.sqrt(2.0) * t
        weights = math.sqrt(2.0) * w * np.exp(t * t)
        return QuadratureRule(n_q=n_q, nodes_1d=nodes, weights_1d=weights)

    @property
    def nodes(self) -> np.ndarray:
        """All tensor nodes, shape (n_q^3, 3)."""
        x = self.nodes_1d
        g = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1)
        return g.reshape(-1, 3)

    @property
    def weights(self) -> np.ndarray:
        """Tensor weights, shape (n_q^3,)."""
        w = self.weights_1d
        return (w[:, None, None] * w[None, :, None] * w[None, None, :]).reshape(-1)


@dataclass(frozen=True)
class WeightSpec:
    """Velocity weight w(l, q, theta) = <v>^(-l) exp(q/4 <v>^theta).

    The regularized variant (used with the harder kernel) is w_R(l) = <v>^l,
    with q = theta = 0 by convention.
    """

    ell: float = 0.0
    q: float = 0.0
    theta: float = 2.0
    variant: str = "standard"

    def __post_init__(self):
        if self.variant not in ("standard", "regularized"):
            raise ValueError(f"unknown weight variant {self.variant!r}")
        if self.variant == "regularized" and (self.q != 0.0 or self.theta != 0.0):
            raise ValueError("regularized weight requires q = theta = 0")
        if self.variant == "standard" and not (0.0 <= self.q < 1.0):
            raise ValueError("standard weight requires q in [0, 1)")


def eval_weight(w: WeightSpec, v: np.ndarray) -> np.ndarray:
    """Evaluate the weight at velocity points ``v`` (shape (..., 3))."""
    v = np.asarray(v, dtype=float)
    bracket = 1.0 + np.sum(v * v, axis=-1)  # <v>^2
    if w.variant == "regularized":
        return bracket ** (w.ell / 2.0)
    out = bracket ** (-w.ell / 2.0)
    if w.q != 0.0:
        out = out * np.exp(0.25 * w.q * bracket ** (w.theta / 2.0))
    return out


def hermite_poly_values(x: np.ndarray, order: int) -> np.ndarray:
    """Values p_n(x) of the orthonormal probabilists' Hermite polynomials.

    p_0 = 1, p_1 = x, p_{n+1} = (x p_n - sqrt(n) p_{n-1}) / sqrt(n+1);
    orthonormal with respect to the N(0,1) density. Shape (order+1, *x.shape).
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((order + 1,) + x.shape)
    out[0] = 1.0
    if order >= 1:
        out[1] = x
    for n in range(1, order):
        out[n + 1] = (x * out[n] - math.sqrt(n) * out[n - 1]) / math.sqrt(n + 1)
    return out


@dataclass(frozen=True)
class HermiteBasis:
    """Graded-lex ordered tensor Hermite basis with |alpha| <= N_v."""

    N_v: int
    quadrature: QuadratureRule
    indices: list[MultiIndex] = field(default_factory=list)

    def __post_init__(self):
        if not self.indices:
            object.__setattr__(self, "indices", graded_indices(self.N_v))

    @property
    def size(self) -> int:
        return len(self.indices)

    def index_of(self, alpha: MultiIndex) -> int:
        return self._lookup()[alpha]

    def _lookup(self) -> dict[MultiIndex, int]:
        if not hasattr(self, "_lookup_cache"):
            object.__setattr__(
                self, "_lookup_cache", {a: i for i, a in enumerate(self.indices)}
            )
        return self._lookup_cache

    # --- node tables ------------------------------------------------------

    def poly_table(self, order: int | None = None) -> np.ndarray:
        """p_alpha at all tensor quadrature nodes for |alpha| <= order.

        Returns array of shape (n_indices(order), n_nodes); rows follow
        graded-lex ordering of ``graded_indices(order)``.
        """
        order = self.N_v if order is None else order
        key = ("poly", order)
        cache = self._table_cache()
        if key not in cache:
            nodes = self.quadrature.nodes
            one_d = [hermite_poly_values(nodes[:, ax], order) for ax in range(3)]
            idx = graded_indices(order)
            tab = np.empty((len(idx), nodes.shape[0]))
            for row, (i, j, k) in enumerate(idx):
                tab[row] = one_d[0][i] * one_d[1][j] * one_d[2][k]
            cache[key] = tab
        return cache[key]

    def gaussian_node_weights(self) -> np.ndarray:
        """Quadrature weights times mu0 at the nodes: integrates poly * mu0 exactly."""
        cache = self._table_cache()
        if "wmu" not in cache:
            nodes = self.quadrature.nodes
            mu0 = (2.0 * math.pi) ** (-1.5) * np.exp(-0.5 * np.sum(nodes**2, axis=1))
            cache["wmu"] = self.quadrature.weights * mu0
        return cache["wmu"]

    def _table_cache(self) -> dict:
        if not hasattr(self, "_tables"):
            object.__setattr__(self, "_tables", {})
        return self._tables

    # --- derived matrices ---------------------------------------------------

    def multiplication_matrix(self, axis: int) -> np.ndarray:
        """Galerkin matrix of multiplication by v_axis (exact ladder, truncated).

        v p_n = sqrt(n+1) p_{n+1} + sqrt(n) p_{n-1}; entries leaving the
        truncated span are dropped (Galerkin projection).
        """
        nb = self.size
        M = np.zeros((nb, nb))
        look = self._lookup()
        for row, a in enumerate(self.indices):
            n = a[axis]
            up = list(a)
            up[axis] += 1
            lo = list(a)
            lo[axis] -= 1
            j = look.get(tuple(up))
            if j is not None:
                M[j, row] += math.sqrt(n + 1)
            j = look.get(tuple(lo))
            if j is not None:
                M[j, row] += math.sqrt(n)
        return 0.5 * (M + M.T)

    def derivative_matrix(self, axis: int) -> np.ndarray:
        """Galerkin matrix of d/dv_axis acting on the H_alpha (exact ladder).

        dH_alpha/dv_i = (sqrt(a_i) H_{alpha-e_i} - sqrt(a_i+1) H_{alpha+e_i})/2.
        """
        nb = self.size
        D = np.zeros((nb, nb))
        look = self._lookup()
        for col, a in enumerate(self.indices):
            n = a[axis]
            lo = list(a)
            lo[axis] -= 1
            j = look.get(tuple(lo))
            if j is not None:
                D[j, col] += 0.5 * math.sqrt(n)
            up = list(a)
            up[axis] += 1
            j = look.get(tuple(up))
            if j is not None:
                D[j, col] -= 0.5 * math.sqrt(n + 1)
        return D

    def gram_matrix(self) -> np.ndarray:
        """Gram matrix of the basis under quadrature (identity to tolerance)."""
        P = self.poly_table()
        wmu = self.gaussian_node_weights()
        return (P * wmu) @ P.T


def build_basis(N_v: int, n_q: int, tol_orth: float = 1e-9) -> HermiteBasis:
    """Build the truncated basis and verify orthonormality under quadrature.

    Requires n_q >= N_v + 4 so that degree-2*N_v products are integrated with
    comfortable margin; smaller n_q signals quadrature underresolution.
    """
    if N_v < 1:
        raise ValueError("N_v must be >= 1")
    if n_q < N_v + 4:
        raise ValueError(
            f"quadrature underresolved: n_q = {n_q} < N_v + 4 = {N_v + 4}"
        )
    basis = HermiteBasis(N_v=N_v, quadrature=QuadratureRule.build(n_q))
    G = basis.gram_matrix()
    dev = np.max(np.abs(G - np.eye(basis.size)))
    if dev > tol_orth:
        raise ValueError(f"Gram deviation {dev:.3e} exceeds tol_orth {tol_orth:.1e}")
    return basis


def gaussian_moment(basis: HermiteBasis, p: tuple[int, int, int]) -> float:
    """int v1^p1 v2^p2 v3^p3 mu0 dv by quadrature (exact for |p| <= 2 n_q - 2)."""
    if sum(p) > 2 * basis.quadrature.n_q - 1:
        raise ValueError("polynomial degree exceeds quadrature exactness")
    nodes = basis.quadrature.nodes
    wmu = basis.gaussian_node_weights()
    mono = nodes[:, 0] ** p[0] * nodes[:, 1] ** p[1] * nodes[:, 2] ** p[2]
    return float(wmu @ mono)


def kernel_coefficient_vectors(basis: HermiteBasis) -> np.ndarray:
    """Orthonormal coefficient vectors spanning sqrt(mu0)*{1, v, |v|^2}.

    Rows are the five collision-invariant directions in basis coordinates:
    H_000; H_100, H_010, H_001; and the normalized |v|^2 sqrt(mu0) direction
    (3 H_000 + sqrt(2)(H_200 + H_020 + H_002)) / sqrt(15), orthonormalized
    against the mass direction.
    """
    nb = basis.size
    out = np.zeros((5, nb))
    ix = basis.index_of
    out[0, ix((0, 0, 0))] = 1.0
    out[1, ix((1, 0, 0))] = 1.0
    out[2, ix((0, 1, 0))] = 1.0
    out[3, ix((0, 0, 1))] = 1.0
    # |v|^2 sqrt(mu0) = 3 H_000 + sqrt(2) (H_200 + H_020 + H_002); remove the
    # H_000 component to orthonormalize against the mass direction.
    w = np.zeros(nb)
    for a in ((2, 0, 0), (0, 2, 0), (0, 0, 2)):
        w[ix(a)] = math.sqrt(2.0)
    out[4] = w / np.linalg.norm(w)
    return out
