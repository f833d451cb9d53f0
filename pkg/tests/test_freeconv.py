import math

import numpy as np
import pytest
from numpy.polynomial import polynomial as npoly
from scipy import integrate, stats

from hardedge.errors import RealRootsViolation
from hardedge.freeconv import (
    EmpiricalMeasure,
    FreeConvolution,
    MPLaw,
    RealPolynomial,
    SemicircleLaw,
    acp_heat_flow,
    ks_distance,
    laguerre_acp,
    mp_from_k,
    real_roots,
    solve_edges,
    stieltjes,
    stieltjes_quadrature,
    subordinate,
)

MP4 = MPLaw(4.0, (1.0,))


def mp4_stieltjes(z):
    """k = 1 law in closed form: G(z) = (1 - sqrt(1 - 4/z)) / 2, principal branch at infinity."""
    z = complex(z)
    r = np.sqrt(z) * np.sqrt(z - 4.0)
    return (z - r) / (2 * z)


def mp4_cdf(x):
    x = np.clip(np.asarray(x, float), 0, 4)
    return np.array([integrate.quad(lambda t: math.sqrt((4 - t) / t) / (2 * math.pi), 0, v)[0] for v in np.atleast_1d(x)])


# ---------------------------------------------------------------- laws

def test_mp_from_k_one():
    law, scale = mp_from_k(1)
    assert law.b == 1.0 and law.h == (4.0,)
    assert scale == pytest.approx(4.0, rel=1e-15)
    phys = law.scaled(scale)
    assert phys.b == pytest.approx(4.0) and phys.h[0] == pytest.approx(1.0)
    assert abs(law.mass() - 1.0) < 1e-13


def test_mp_from_k_two_constant_term():
    law, _ = mp_from_k(2)
    assert law.h[0] == pytest.approx(8.0 / 3.0, rel=1e-15)
    assert abs(law.mass() - 1.0) < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_mp_from_k_normalized(k):
    law, scale = mp_from_k(k)
    ref = integrate.quad(law.density, 0, 1, limit=200)[0]
    assert abs(ref - 1.0) < 1e-8
    assert abs(law.scaled(scale).mass() - 1.0) < 1e-12


def test_semicircle_normalization_and_cdf():
    sc = SemicircleLaw(0.5)
    assert abs(integrate.quad(sc.density, -1, 1)[0] - 1.0) < 1e-10
    assert sc.cdf(-1.0) == 0.0 and sc.cdf(1.0) == 1.0
    assert abs(sc.cdf(0.3) - integrate.quad(sc.density, -1, 0.3)[0]) < 1e-10


# ---------------------------------------------------------------- Stieltjes transform

def test_stieltjes_closed_value_at_minus_one():
    assert abs(stieltjes(MP4, -1.0) - (1 - math.sqrt(5)) / 2) < 1e-14


@pytest.mark.parametrize("z", [-1.0, 5.0, 2 + 1j, -3 - 2j, 4.5 + 0.01j, 1e3 + 1j, 0.5 + 1e-3j])
def test_stieltjes_matches_closed_form_oracle(z):
    assert abs(stieltjes(MP4, z) - mp4_stieltjes(z)) < 1e-12


@pytest.mark.parametrize("z", [-1.0, 6.0, 2 + 2j])
def test_stieltjes_quadrature_cross_check(z):
    assert abs(stieltjes_quadrature(MP4, z) - stieltjes(MP4, z)) < 1e-9
    for der in (1, 2):
        assert abs(stieltjes_quadrature(MP4, z, der=der) - stieltjes(MP4, z, der)) < 1e-9


def test_stieltjes_derivatives_by_finite_difference():
    law, _ = mp_from_k(3)
    z, h = 1.7 + 0.4j, 1e-4
    d1 = (stieltjes(law, z + h) - stieltjes(law, z - h)) / (2 * h)
    d2 = (stieltjes(law, z + h) - 2 * stieltjes(law, z) + stieltjes(law, z - h)) / h**2
    assert abs(stieltjes(law, z, 1) - d1) < 1e-7
    assert abs(stieltjes(law, z, 2) - d2) < 1e-5


def test_stieltjes_total_mass_at_infinity():
    z = 1e6 * np.exp(0.3j)
    assert abs(z * stieltjes(MP4, z) - 1.0) < 1e-5


def test_stieltjes_sign_above_support():
    x = np.linspace(0.05, 3.95, 40)
    assert np.all(stieltjes(MP4, x + 1e-6j).imag < 0)


def test_stieltjes_rejects_support():
    with pytest.raises(ValueError):
        stieltjes(MP4, 2.0)


# ---------------------------------------------------------------- edges

def test_edges_residuals():
    for eps in (0.1, 0.5, 2.0):
        e = solve_edges(MP4, eps)
        assert e.u_left < 0 < e.b_right and e.u_right > 4
        assert abs(eps**2 * -stieltjes(MP4, e.u_left, 1).real - 1) < 1e-10
        assert abs(e.a_left - (e.u_left + eps**2 * stieltjes(MP4, e.u_left).real)) < 1e-10
        assert abs(e.b_right - (e.u_right + eps**2 * stieltjes(MP4, e.u_right).real)) < 1e-10
        g2 = abs(stieltjes(MP4, e.u_left, 2).real)
        assert e.c_eps == pytest.approx(eps**-2 * (g2 / 6) ** (-1 / 3), rel=1e-12)


def test_edges_small_eps_constants():
    eps = 1e-3
    e = solve_edges(MP4, eps)
    assert abs(e.u_left / eps ** (4 / 3) + 2 ** (-2 / 3)) < 0.02 * 2 ** (-2 / 3)
    assert abs(e.a_left / eps ** (4 / 3) + 3 * 2 ** (-2 / 3)) < 0.02 * 3 * 2 ** (-2 / 3)


def test_edges_monotone_in_eps():
    eds = [solve_edges(MP4, e) for e in (0.1, 0.5, 1.0, 2.0)]
    a = [e.a_left for e in eds]
    b = [e.b_right for e in eds]
    assert all(x > y for x, y in zip(a, a[1:]))
    assert all(x < y for x, y in zip(b, b[1:]))


def test_edges_scaling_slopes():
    eps = np.logspace(-3, -1, 7)
    eds = [solve_edges(MP4, e) for e in eps]
    slope_a = np.polyfit(np.log(eps), np.log([-e.a_left for e in eds]), 1)[0]
    slope_c = np.polyfit(np.log(eps), np.log([e.c_eps for e in eds]), 1)[0]
    assert abs(slope_a - 4 / 3) < 0.05
    assert abs(slope_c + 8 / 9) < 0.05


def test_edges_semicircle_limit_for_large_noise():
    # for large eps the semicircle dominates: support about [m - 2 eps, m + 2 eps], m = mean = 1
    eps = 50.0
    e = solve_edges(MP4, eps)
    assert abs(e.a_left - (1 - 2 * eps)) < 0.05 * eps
    assert abs(e.b_right - (1 + 2 * eps)) < 0.05 * eps


# ---------------------------------------------------------------- subordination

def test_subordination_large_z_expansion():
    z = 1e5 * np.exp(0.7j)
    eps = 0.5
    s, g = subordinate(MP4, eps, z)
    assert abs(s - (z - eps**2 * stieltjes(MP4, z))) < 1e-9 * abs(z)
    # two-term expansion 1/z + mean/z^2 (mean 1 for this law, eps^2 shifts only the variance term)
    assert abs(g * z - (1 + 1 / z)) < 1e-8


def test_subordination_solves_the_equation():
    z = np.array([0.3 + 0.01j, 2 + 1j, -1 + 0.1j])
    s, g = subordinate(MP4, 0.5, z)
    assert np.max(np.abs(stieltjes(MP4, s) + (s - z) / 0.25)) < 1e-12
    assert np.all(s.imag > 0)


def test_subordination_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        subordinate(MP4, 0.5, 1 - 1j)


def test_subordination_eps_small_returns_base():
    z = 1.5 + 0.5j
    _, g = subordinate(MP4, 1e-6, z)
    assert abs(g - stieltjes(MP4, z)) < 1e-10


def test_free_convolution_density_mass_and_edges():
    fc = FreeConvolution(MP4, 0.5)
    a, b = fc.edges.a_left, fc.edges.b_right
    assert abs(fc.mass - 1.0) < 1e-3
    grid = np.linspace(a, b, 400)
    peak = float(np.max(fc.density(grid)))
    assert fc.density(a + 1e-4)[0] < 0.05 * peak
    assert fc.density(b - 1e-4)[0] < 0.05 * peak
    assert fc.density(a - 1e-2)[0] < 1e-8 * peak


def density_moments(fc, fns, panels=60, order=16):
    """Integrals of each f in ``fns`` against the density, vectorised.

    ``x = a + (b - a)(1 - cos t)/2`` smooths the square-root edges.
    """
    a, b = fc.edges.a_left, fc.edges.b_right
    xg, wg = np.polynomial.legendre.leggauss(order)
    e = np.linspace(0, np.pi, panels + 1)
    half = 0.5 * (e[1:, None] - e[:-1, None])
    t = (half * xg + 0.5 * (e[1:, None] + e[:-1, None])).ravel()
    w = (half * wg).ravel() * (b - a) / 2 * np.sin(t)
    x = a + (b - a) * (1 - np.cos(t)) / 2
    rho = fc.density(x)
    return [np.sum(w * rho * f(x)) for f in fns]


def test_free_convolution_stieltjes_consistency():
    fc = FreeConvolution(MP4, 0.5)
    z = 1 + 1j
    (g,) = density_moments(fc, [lambda x: 1 / (z - x)])
    assert abs(g - subordinate(MP4, 0.5, z)[1]) < 1e-4


def test_free_convolution_moments_add():
    # free cumulants add: mean stays 1, variance grows by eps^2
    eps = 0.7
    fc = FreeConvolution(MP4, eps)
    m0, m1, m2 = density_moments(fc, [np.ones_like, lambda x: x, lambda x: x * x])
    assert abs(m0 - 1.0) < 1e-3
    assert abs(m1 - 1.0) < 2e-3
    assert abs(m2 - (2.0 + eps**2)) < 5e-3


# ---------------------------------------------------------------- polynomials

def test_heat_flow_examples():
    x = RealPolynomial((0.0, 1.0))
    assert acp_heat_flow(x, 3, 0.8).coeffs == (0.0, 1.0)
    p = acp_heat_flow(RealPolynomial((0.0, 0.0, 1.0)), 1, 1.0)
    assert p.coeffs == (-1.0, 0.0, 1.0)


def test_heat_flow_matches_gaussian_average():
    rng = np.random.default_rng(0)
    c = rng.standard_normal(9)
    n, eps = 4, 0.9
    P = acp_heat_flow(RealPolynomial(tuple(c)), n, eps)
    z, w = np.polynomial.hermite_e.hermegauss(12)
    w = w / math.sqrt(2 * math.pi)
    for x in (-1.0, 0.3, 2.0):
        ref = (npoly.polyval(x + 1j * eps / math.sqrt(n) * z, c) @ w).real
        assert abs(P(x) - ref) < 1e-12 * max(1.0, abs(ref))


def test_heat_flow_composes_and_identity():
    p = laguerre_acp(8, 0.0)
    a = acp_heat_flow(acp_heat_flow(p, 8, 0.3), 8, 0.4)
    b = acp_heat_flow(p, 8, 0.5)
    np.testing.assert_allclose(a.coeffs, b.coeffs, rtol=1e-12, atol=1e-12 * max(np.abs(p.coeffs)))
    assert acp_heat_flow(p, 8, 0.0).coeffs == p.coeffs


def test_laguerre_first_polynomial():
    assert laguerre_acp(1, 0.0).coeffs == (-1.0, 1.0)


def test_laguerre_orthogonality():
    n = 6
    p = laguerre_acp(n, 0.0)
    norm = integrate.quad(lambda x: p(x) ** 2 * math.exp(-n * x), 0, np.inf)[0]
    for j in range(n):
        r = integrate.quad(lambda x: p(x) * x**j * math.exp(-n * x), 0, np.inf, epsabs=1e-14)[0]
        assert abs(r) < 1e-8 * norm


def test_laguerre_recurrence_evaluator_agrees_with_coefficients():
    p = laguerre_acp(12, 0.5)
    x = np.linspace(0, 4, 9)
    np.testing.assert_allclose(p(x), npoly.polyval(x, p.coeffs), rtol=1e-9, atol=1e-12)


def test_laguerre_zeros_match_scipy_roots():
    from scipy.special import roots_genlaguerre

    n = 60
    ref = roots_genlaguerre(n, 0.0)[0] / n
    r = real_roots(laguerre_acp(n, 0.0))
    assert np.max(np.abs(r - ref)) < 1e-10


def test_laguerre_zero_measure_close_to_mp():
    r = real_roots(laguerre_acp(60, 0.0))
    assert ks_distance(EmpiricalMeasure(tuple(r)), mp4_cdf) < 0.05


def test_heat_flowed_roots_real_and_simple():
    P = acp_heat_flow(laguerre_acp(20, 0.0), 20, 0.5)
    r = real_roots(P)
    assert len(r) == 20
    assert np.min(np.diff(r)) > 1e-10
    assert np.max(np.abs(P(r))) < 1e-8 * np.max(np.abs(P(np.linspace(r[0], r[-1], 200))))


def test_real_roots_small_and_wilkinson():
    np.testing.assert_allclose(real_roots(RealPolynomial((2.0, -3.0, 1.0))), [1.0, 2.0], atol=1e-14)
    c = npoly.polyfromroots(np.arange(1, 16) / 10)
    assert np.max(np.abs(real_roots(RealPolynomial(tuple(c))) - np.arange(1, 16) / 10)) < 1e-6


def test_real_roots_violation():
    with pytest.raises(RealRootsViolation):
        real_roots(RealPolynomial((1.0, 0.0, 1.0)))
    assert len(real_roots(RealPolynomial((1.0, 0.0, 1.0)), known_real=False)) == 0


# ---------------------------------------------------------------- empirical measures

def test_ks_examples():
    assert ks_distance(EmpiricalMeasure((0.5,)), lambda x: np.clip(x, 0, 1)) == pytest.approx(0.5)
    n = 50
    q = (np.arange(n) + 0.5) / n
    assert ks_distance(EmpiricalMeasure(tuple(stats.norm.ppf(q))), stats.norm.cdf) <= 1 / (2 * n) + 1e-12


def test_ks_agrees_with_scipy():
    x = np.random.default_rng(3).standard_normal(200)
    ref = stats.kstest(x, "norm").statistic
    assert abs(ks_distance(EmpiricalMeasure(tuple(x)), stats.norm.cdf) - ref) < 1e-14


def test_empirical_measure_sorted():
    e = EmpiricalMeasure((3.0, 1.0, 2.0))
    assert e.points == (1.0, 2.0, 3.0) and e.n == 3
