"""Radial building blocks of the Landau convolution fields.

The collision kernels are convolved only with functions of the form
(polynomial) * mu0, and every such convolution reduces to derivatives of

    sigma    = phi   * mu0   (Coulomb kernel, phi^{ij}(z) = (I - zz/|z|^2)/|z|),
    sigma_R  = phi_R * mu0   (harder kernel,  phi_R^{ij}(z) = (I - zz/|z|^2)|z|),

because d^beta(mu0 * p_beta-family) are Rodrigues derivatives of mu0.  Both
sigma fields are assembled from two radial potentials,

    psi1(r) = (|z|   * mu0)(r) = (r + 1/r) erf(r/sqrt2) + sqrt(2/pi) e^{-r^2/2},
    psi3(r) = (|z|^3 * mu0)(r) = (r^4+6r^2+3)/r erf(r/sqrt2)
                                  + sqrt(2/pi)(r^2+5) e^{-r^2/2},

through the Hessian identities  phi = D^2|z|  and
phi_R = 2 I |z| - (1/3) D^2 |z|^3:

    sigma^{ij}   = delta_ij psi1^[1] + v_i v_j psi1^[2],
    sigma_R^{ij} = delta_ij (2 psi1 - psi3^[1]/3) - v_i v_j psi3^[2]/3,

where g^[k] := ((1/r) d/dr)^k g is the "Bessel ladder" (so no 1/r factors ever
appear and everything stays smooth through r = 0).  The ladders have stable
closed forms in terms of the moments

    m_j(r) = int_0^1 u^{2j} exp(-r^2 u^2 / 2) du,

via the subordination  |z| = sqrt(2/pi) int_0^inf (1 - e^{-t^2 |z|^2/2}) t^{-2} dt
(and its |z|^3 analogue), which also absorbs the kernel singularity exactly.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammainc, gammaln

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def m_moments(r: np.ndarray, jmax: int) -> np.ndarray:
    """m_j(r) = int_0^1 u^(2j) exp(-r^2 u^2/2) du for j = 0..jmax.

    Stable for all r >= 0: incomplete-gamma form for moderate r, Taylor
    series near r = 0. Returns shape (jmax+1, *r.shape).
    """
    r = np.asarray(r, dtype=float)
    q = 0.5 * r * r
    out = np.empty((jmax + 1,) + r.shape)
    small = q < 1e-3
    qs = np.where(small, 1.0, q)  # avoid 0^negative in the masked branch
    for j in range(jmax + 1):
        a = j + 0.5
        # m_j = 0.5 * Gamma(a) * P(a, q) * q^(-a),  P = regularized lower gamma
        main = 0.5 * np.exp(gammaln(a) - a * np.log(qs)) * gammainc(a, qs)
        # series: sum_k (-q)^k / (k! (2j + 2k + 1))
        ser = np.zeros_like(q)
        term = np.ones_like(q)
        for k in range(0, 12):
            ser = ser + term / (2 * j + 2 * k + 1)
            term = term * (-q) / (k + 1)
        out[j] = np.where(small, ser, main)
    return out


def psi1(r: np.ndarray) -> np.ndarray:
    """psi1(r) = E|r e - Z| for Z standard normal in R^3 (closed form)."""
    r = np.asarray(r, dtype=float)
    g = np.exp(-0.5 * r * r)
    rs = np.where(r < 1e-8, 1.0, r)
    erf_over_r = np.where(
        r < 1e-8,
        SQRT_2_OVER_PI * (1.0 - r * r / 6.0),
        np.vectorize(math.erf)(rs / math.sqrt(2.0)) / rs,
    )
    return (r * r + 1.0) * erf_over_r + SQRT_2_OVER_PI * g


def psi3(r: np.ndarray) -> np.ndarray:
    """psi3(r) = E|r e - Z|^3 (closed form)."""
    r = np.asarray(r, dtype=float)
    g = np.exp(-0.5 * r * r)
    rs = np.where(r < 1e-8, 1.0, r)
    erf_over_r = np.where(
        r < 1e-8,
        SQRT_2_OVER_PI * (1.0 - r * r / 6.0),
        np.vectorize(math.erf)(rs / math.sqrt(2.0)) / rs,
    )
    return (r**4 + 6.0 * r * r + 3.0) * erf_over_r + SQRT_2_OVER_PI * (r * r + 5.0) * g


def psi1_ladders(r: np.ndarray, kmax: int) -> np.ndarray:
    """psi1^[k](r) for k = 0..kmax;  psi1^[k] = sqrt(2/pi)(-1)^(k-1)(m_{k-1} - m_k)."""
    r = np.asarray(r, dtype=float)
    out = np.empty((kmax + 1,) + r.shape)
    out[0] = psi1(r)
    if kmax >= 1:
        m = m_moments(r, kmax)
        for k in range(1, kmax + 1):
            out[k] = SQRT_2_OVER_PI * (-1.0) ** (k - 1) * (m[k - 1] - m[k])
    return out


def _psi3_ladder_coeff_table(kmax: int) -> list[list[np.ndarray]]:
    """Polynomial data for psi3^[k], k >= 1.

    psi3^[k](r) = -(6 sqrt2/sqrt pi) * sum_m r^(2m) * int_0^1 U^{-2} (1-U)^2
                   c_m^(k)(U) e^{-r^2 U/2} du,   U := u^2,
    with c^(0) = (1 + 3U/2,  U(1-U)/2) and the ladder recurrence
    c^(k+1)_m = -U c^(k)_m + 2(m+1) c^(k)_{m+1}.  For k >= 1 each c_m^(k) is
    divisible by U^2, so after multiplying by U^{-2} (1-U)^2 the integrand is a
    polynomial in U times the Gaussian, i.e. a combination of the m_j moments.
    Returns, for each k (1-indexed), a list over m of coefficient arrays in U.
    """
    # polynomials in U as coefficient arrays, index = power of U
    c = [np.array([1.0, 1.5]), np.array([0.0, 0.5, -0.5])]
    tables = []
    for _ in range(kmax):
        new = []
        for m in range(len(c)):
            poly = -np.concatenate(([0.0], c[m]))  # -U * c_m
            if m + 1 < len(c):
                nxt = 2.0 * (m + 1) * c[m + 1]
                n = max(len(poly), len(nxt))
                poly = np.concatenate((poly, np.zeros(n - len(poly))))
                poly[: len(nxt)] += nxt
            new.append(poly)
        # drop a trailing identically-zero highest m if present
        while len(new) > 1 and not np.any(new[-1]):
            new.pop()
        c = new
        tables.append([p.copy() for p in c])
    return tables


def psi3_ladders(r: np.ndarray, kmax: int) -> np.ndarray:
    """psi3^[k](r) for k = 0..kmax (k = 0 closed form, k >= 1 via m-moments)."""
    r = np.asarray(r, dtype=float)
    out = np.empty((kmax + 1,) + r.shape)
    out[0] = psi3(r)
    if kmax < 1:
        return out
    tables = _psi3_ladder_coeff_table(kmax)
    jneed = max(len(p) for tab in tables for p in tab) + 2
    m = m_moments(r, jneed)
    pref = -6.0 * math.sqrt(2.0) / math.sqrt(math.pi)
    one_minus = np.array([1.0, -2.0, 1.0])  # (1-U)^2
    for k in range(1, kmax + 1):
        acc = np.zeros_like(r)
        for mm, poly in enumerate(tables[k - 1]):
            # poly is divisible by U^2 for k >= 1; shift by U^{-2}
            assert abs(poly[0]) < 1e-14 and (len(poly) < 2 or abs(poly[1]) < 1e-14)
            shifted = poly[2:]
            full = np.convolve(shifted, one_minus)
            contrib = np.zeros_like(r)
            for j, cj in enumerate(full):
                if cj != 0.0:
                    contrib += cj * m[j]
            acc += (r ** (2 * mm)) * contrib
        out[k] = pref * acc
    return out


class RadialLadders:
    """Tabulated psi1/psi3 ladders at a fixed set of radii (quadrature nodes)."""

    def __init__(self, r: np.ndarray, kmax: int):
        self.r = np.asarray(r, dtype=float)
        self.kmax = kmax
        self.psi1 = psi1_ladders(self.r, kmax)
        self.psi3 = psi3_ladders(self.r, kmax)

    def table(self, family: str) -> np.ndarray:
        return self.psi1 if family == "psi1" else self.psi3


# --- symbolic derivative fields -------------------------------------------

Mono = tuple[int, int, int]
Term = tuple[Mono, str, int]  # (monomial, family, ladder index)


def _differentiate(terms: dict[Term, float], axis: int) -> dict[Term, float]:
    """d/dv_axis of sum coeff * v^mono * g^[k](r), using d g^[k]/dv_i = v_i g^[k+1]."""
    out: dict[Term, float] = {}
    for (mono, fam, k), coeff in terms.items():
        if mono[axis] > 0:
            lower = list(mono)
            lower[axis] -= 1
            key = (tuple(lower), fam, k)
            out[key] = out.get(key, 0.0) + coeff * mono[axis]
        upper = list(mono)
        upper[axis] += 1
        key = (tuple(upper), fam, k + 1)
        out[key] = out.get(key, 0.0) + coeff
    return {t: c for t, c in out.items() if c != 0.0}


def sigma_terms(kernel: str, i: int, j: int) -> dict[Term, float]:
    """Symbolic representation of sigma^{ij} (kernel='coulomb') or sigma_R^{ij}."""
    zero: Mono = (0, 0, 0)
    vij = [0, 0, 0]
    vij[i] += 1
    vij[j] += 1
    vv: Mono = tuple(vij)  # type: ignore[assignment]
    out: dict[Term, float] = {}
    if kernel == "coulomb":
        if i == j:
            out[(zero, "psi1", 1)] = 1.0
        out[(vv, "psi1", 2)] = out.get((vv, "psi1", 2), 0.0) + 1.0
    elif kernel == "hard":
        if i == j:
            out[(zero, "psi1", 0)] = 2.0
            out[(zero, "psi3", 1)] = -1.0 / 3.0
        out[(vv, "psi3", 2)] = out.get((vv, "psi3", 2), 0.0) - 1.0 / 3.0
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    return out


def derivative_terms(kernel: str, i: int, j: int, beta: Mono) -> dict[Term, float]:
    """Symbolic d^beta sigma^{ij} as ladder terms."""
    terms = sigma_terms(kernel, i, j)
    for axis in range(3):
        for _ in range(beta[axis]):
            terms = _differentiate(terms, axis)
    return terms


def evaluate_terms(
    terms: dict[Term, float], nodes: np.ndarray, ladders: RadialLadders
) -> np.ndarray:
    """Evaluate a ladder-term expression at velocity nodes (shape (n, 3))."""
    out = np.zeros(nodes.shape[0])
    for (mono, fam, k), coeff in terms.items():
        tab = ladders.table(fam)
        val = tab[k].copy()
        for axis in range(3):
            if mono[axis]:
                val = val * nodes[:, axis] ** mono[axis]
        out += coeff * val
    return out
