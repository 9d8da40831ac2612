import math

import numpy as np
import pytest
from scipy.integrate import quad

from lanshock import radial


def psi_quadrature_oracle(r, p):
    """Bipolar-coordinate reduction of (|z|^p * mu0)(r), integrated adaptively."""

    def integrand(rho):
        a, b = abs(r - rho), r + rho
        return rho * math.exp(-0.5 * rho * rho) * (b ** (p + 2) - a ** (p + 2)) / (p + 2)

    val, _ = quad(integrand, 0.0, r + 45.0, limit=200)
    return (2.0 * math.pi) ** (-0.5) / r * val


@pytest.mark.parametrize("r", [0.3, 0.9, 1.7, 3.3, 6.1])
def test_closed_forms_match_quadrature(r):
    assert radial.psi1(np.array([r]))[0] == pytest.approx(psi_quadrature_oracle(r, 1), rel=1e-8)
    assert radial.psi3(np.array([r]))[0] == pytest.approx(psi_quadrature_oracle(r, 3), rel=1e-9)


def test_values_at_origin():
    # E|Z| = 2 sqrt(2/pi), E|Z|^3 = 8 sqrt(2/pi) for a standard 3-D Gaussian
    assert radial.psi1(np.array([0.0]))[0] == pytest.approx(2 * math.sqrt(2 / math.pi), rel=1e-12)
    assert radial.psi3(np.array([0.0]))[0] == pytest.approx(8 * math.sqrt(2 / math.pi), rel=1e-12)


@pytest.mark.parametrize("fam", ["psi1", "psi3"])
def test_ladders_match_finite_differences(fam):
    f0 = {"psi1": radial.psi1, "psi3": radial.psi3}[fam]
    lad = {"psi1": radial.psi1_ladders, "psi3": radial.psi3_ladders}[fam]
    r = np.array([0.4, 0.8, 1.5, 2.7, 4.5])
    h = 1e-5
    L = lad(r, 2)
    fd1 = (f0(r + h) - f0(r - h)) / (2 * h) / r
    assert np.max(np.abs(L[1] - fd1)) < 1e-8
    g1 = lambda x: lad(x, 1)[1]
    fd2 = (g1(r + h) - g1(r - h)) / (2 * h) / r
    assert np.max(np.abs(L[2] - fd2)) < 1e-7


def test_ladders_smooth_through_zero():
    r = np.array([0.0, 1e-9, 1e-5, 1e-3])
    L1 = radial.psi1_ladders(r, 6)
    L3 = radial.psi3_ladders(r, 6)
    for L in (L1, L3):
        assert np.all(np.isfinite(L))
        for k in range(L.shape[0]):
            assert abs(L[k, 0] - L[k, -1]) < 1e-4 * max(1.0, abs(L[k, 0]))


def test_sigma_identities():
    """sigma is PSD with the paper's |v|^{-1} large-velocity behavior."""
    r = np.array([0.5, 2.0, 4.0, 6.0, 8.0])
    L = radial.psi1_ladders(r, 2)
    transverse = L[1]
    longitudinal = L[1] + r * r * L[2]
    assert np.all(transverse > 0)
    assert np.all(longitudinal > 0)
    big = r >= 4.0
    slope = np.polyfit(np.log(r[big]), np.log((r * r * longitudinal)[big]), 1)[0]
    assert abs(slope + 1.0) < 0.15
    # isotropy at the origin: sigma(0) = (2/3) E|Z|^{-1}-free closed value
    s0 = radial.psi1_ladders(np.array([0.0]), 2)
    assert s0[1][0] == pytest.approx((2.0 / 3.0) * math.sqrt(2.0 / math.pi), rel=1e-12)
    assert s0[1][0] == pytest.approx(s0[1][0] + 0.0**2 * s0[2][0], rel=1e-12)


def test_derivative_terms_match_fd():
    v0 = np.array([0.8, -1.1, 1.9])
    lad = radial.RadialLadders(np.array([np.linalg.norm(v0)]), 8)

    def sigma(v, i, j, kernel):
        rr = np.linalg.norm(v)
        L1 = radial.psi1_ladders(np.array([rr]), 2)
        L3 = radial.psi3_ladders(np.array([rr]), 2)
        if kernel == "coulomb":
            return (i == j) * L1[1][0] + v[i] * v[j] * L1[2][0]
        return (i == j) * (2 * radial.psi1(np.array([rr]))[0] - L3[1][0] / 3.0) - v[i] * v[j] * L3[2][0] / 3.0

    h = 1e-4
    for kernel in ("coulomb", "hard"):
        for beta in [(1, 0, 0), (0, 1, 1), (2, 0, 0)]:
            for (i, j) in [(0, 0), (0, 2)]:
                terms = radial.derivative_terms(kernel, i, j, beta)
                got = radial.evaluate_terms(terms, v0[None, :], lad)[0]
                # second-order FD tensor applied per beta
                axes = [ax for ax in range(3) for _ in range(beta[ax])]
                if len(axes) == 1:
                    e = np.zeros(3)
                    e[axes[0]] = h
                    want = (sigma(v0 + e, i, j, kernel) - sigma(v0 - e, i, j, kernel)) / (2 * h)
                elif axes[0] == axes[1]:
                    e = np.zeros(3)
                    e[axes[0]] = h
                    want = (
                        sigma(v0 + e, i, j, kernel)
                        - 2 * sigma(v0, i, j, kernel)
                        + sigma(v0 - e, i, j, kernel)
                    ) / h**2
                else:
                    e1, e2 = np.zeros(3), np.zeros(3)
                    e1[axes[0]] = h
                    e2[axes[1]] = h
                    want = (
                        sigma(v0 + e1 + e2, i, j, kernel)
                        - sigma(v0 + e1 - e2, i, j, kernel)
                        - sigma(v0 - e1 + e2, i, j, kernel)
                        + sigma(v0 - e1 - e2, i, j, kernel)
                    ) / (4 * h * h)
                assert got == pytest.approx(want, rel=2e-5, abs=1e-7)


def test_m_moments_small_r_branch():
    r = np.array([0.0, 1e-4, 0.05, 1.0])
    m = radial.m_moments(r, 5)
    for j in range(6):
        assert m[j, 0] == pytest.approx(1.0 / (2 * j + 1), rel=1e-14)
    # against direct quadrature at r = 1
    from scipy.integrate import quad as q

    for j in range(6):
        want, _ = q(lambda u: u ** (2 * j) * math.exp(-0.5 * u * u), 0, 1)
        assert m[j, -1] == pytest.approx(want, rel=1e-12)
