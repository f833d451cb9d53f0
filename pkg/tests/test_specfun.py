import math

import mpmath as mp
import numpy as np
import pytest
from scipy import special as sp

from hardedge.specfun import (
    AIRY_SERIES_RADIUS,
    BESSEL_SERIES_RADIUS,
    PoleError,
    airy,
    bessel_j,
    log_gamma,
    wright_bessel,
)


def test_log_gamma_half_is_log_sqrt_pi():
    assert abs(log_gamma(0.5) - 0.5 * math.log(math.pi)) < 1e-14


def test_log_gamma_six_is_log_120():
    assert abs(log_gamma(6.0) - math.log(120.0)) < 1e-13


def test_log_gamma_stirling_magnitude_on_vertical_line():
    z = 0.5 + 30j
    approx = math.sqrt(2 * math.pi) * math.exp(-math.pi * 30 / 2)
    assert abs(math.exp(log_gamma(z).real) / approx - 1) < 0.01


def test_log_gamma_matches_mpmath_in_disc():
    rng = np.random.default_rng(0)
    z = rng.uniform(-20, 20, 60) + 1j * rng.uniform(-30, 30, 60)
    for zi in z:
        ref = complex(mp.loggamma(mp.mpc(zi.real, zi.imag)))
        got = complex(log_gamma(zi))
        # compare Gamma itself (branch independent), relative
        assert abs(np.exp(got - ref) - 1) < 1e-12


@pytest.mark.parametrize("pole", [0.0, -1.0, -7.0])
def test_log_gamma_pole_is_domain_error(pole):
    with pytest.raises(PoleError, match=str(int(pole))):
        log_gamma(pole)


def test_recurrence_and_reflection_on_strip():
    rng = np.random.default_rng(1)
    z = rng.uniform(-10, 10, 100) + 1j * rng.uniform(-40, 40, 100)
    rec = np.exp(log_gamma(z + 1) - log_gamma(z)) / z
    assert np.max(np.abs(rec - 1)) < 1e-10
    zs = z[np.abs(z.imag) < 20]  # keep the product representable
    refl = np.exp(log_gamma(zs) + log_gamma(1 - zs)) * np.sin(np.pi * zs) / np.pi
    assert np.max(np.abs(refl - 1)) < 1e-9


def test_bessel_values_at_zero():
    assert bessel_j(0, 0.0)[0] == pytest.approx(1.0, abs=1e-15)
    assert abs(bessel_j(1, 0.0)[0]) < 1e-15


def test_bessel_first_zero_of_j0():
    assert abs(bessel_j(0, 2.404825557695773)[0]) < 1e-9


@pytest.mark.parametrize("order", [-0.5, 0.0, 0.5, 1.0, 2.5])
def test_bessel_against_scipy_on_0_100(order):
    x = np.linspace(0.05, 100, 700)
    j, jp = bessel_j(order, x)
    ref = sp.jv(order, x)
    refp = sp.jvp(order, x)
    scale = np.maximum(np.abs(ref), np.sqrt(2 / (np.pi * x)) * 1e-2)
    assert np.max(np.abs(j - ref) / scale) < 1e-10
    assert np.max(np.abs(jp - refp) / np.maximum(np.abs(refp), 1e-2 * scale)) < 1e-9


def test_bessel_ode_residual():
    x = np.linspace(0.5, 40, 80)
    for a in (0.0, 0.7, 3.0):
        j, jp = bessel_j(a, x)
        # J'' = (J'_{a-1} - J'_{a+1}) / 2, with J'_{-1} = -J'_1 at a = 0
        lower = -bessel_j(1.0, x)[1] if a == 0 else bessel_j(a - 1, x)[1]
        jpp = 0.5 * (lower - bessel_j(a + 1, x)[1])
        res = x**2 * jpp + x * jp + (x**2 - a**2) * j
        assert np.max(np.abs(res) / (1 + x**2)) < 1e-8


def test_bessel_branches_agree_in_overlap():
    x = np.linspace(BESSEL_SERIES_RADIUS - 1, BESSEL_SERIES_RADIUS + 1, 21)
    for a in (0.0, 1.5):
        j, _ = bessel_j(a, x)
        assert np.max(np.abs(j - sp.jv(a, x))) < 1e-9


def test_airy_at_zero():
    ai, aip = airy(0.0)
    assert ai == pytest.approx(3 ** (-2 / 3) / math.gamma(2 / 3), rel=1e-12)
    assert aip == pytest.approx(-(3 ** (-1 / 3)) / math.gamma(1 / 3), rel=1e-12)
    assert ai == pytest.approx(0.3550280539, abs=1e-10)
    assert aip == pytest.approx(-0.2588194038, abs=1e-10)


def test_airy_positive_and_decreasing_on_0_10():
    x = np.linspace(0, 10, 401)
    ai, _ = airy(x)
    assert np.all(ai > 0)
    assert np.all(np.diff(ai) < 0)


def test_airy_accuracy_on_minus10_10():
    x = np.linspace(-10, 10, 801)
    ai, aip = airy(x)
    rai, raip, _, _ = sp.airy(x)
    assert np.max(np.abs(ai - rai)) < 1e-10
    assert np.max(np.abs(aip - raip)) < 1e-10


def test_airy_ode_residual():
    x = np.linspace(-9, 9, 181)
    h = 1e-3

    def d(k):
        return airy(x + k * h)[1]

    aipp = (-d(2) + 8 * d(1) - 8 * d(-1) + d(-2)) / (12 * h)
    assert np.max(np.abs(aipp - x * airy(x)[0])) < 1e-8


def test_airy_branches_agree_in_overlap():
    for edge in (AIRY_SERIES_RADIUS, -AIRY_SERIES_RADIUS):
        x = np.linspace(edge - 0.5, edge + 0.5, 11)
        assert np.max(np.abs(airy(x)[0] - sp.airy(x)[0])) < 1e-9


def test_wright_first_term():
    assert wright_bessel(1.0, 1.0, 0.0) == pytest.approx(1.0)


def test_wright_bessel_identity_order0():
    x = 1.7
    lhs = wright_bessel(1.0, 1.0, x * x / 4)
    assert lhs == pytest.approx(bessel_j(0, x)[0], abs=1e-13)


def test_wright_two_one_at_one_is_j1_of_2():
    # (x/2) J_{2,1}(x^2/4) = J_1(x) at x = 2
    assert wright_bessel(2.0, 1.0, 1.0) == pytest.approx(sp.jv(1, 2.0), abs=1e-13)


def test_wright_rejects_nonpositive_b():
    with pytest.raises(ValueError):
        wright_bessel(1.0, 0.0, 1.0)


def test_wright_against_mpmath_series():
    for a, b, x in [(1.5, 0.5, 2.0), (2.0, 2.0, 7.0), (0.75, 0.5, 0.3)]:
        ref = mp.nsum(lambda j: (-x) ** j / (mp.factorial(j) * mp.gamma(a + j * b)), [0, mp.inf])
        assert wright_bessel(a, b, x) == pytest.approx(float(ref), rel=1e-11, abs=1e-14)
