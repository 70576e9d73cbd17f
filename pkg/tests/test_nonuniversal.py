import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special
from scipy.integrate import quad

from bvhspin.errors import DivergentMomentError, KernelDomainError
from bvhspin.kernels import ExpSumKernel, moments
from bvhspin.nonuniversal import (
    AppendixGKernel,
    appg_G,
    appg_laplace,
    appg_spectral_density,
    appg_x0,
    appg_x_exact,
    appg_x_half,
    dawson,
)
from bvhspin.volterra import solve_generic

K = AppendixGKernel(0.5, 1.0, 1.0)


# --- Dawson ---------------------------------------------------------------


def test_dawson_at_zero():
    assert dawson(0.0) == 0.0


def test_dawson_large_argument():
    # x daw(x) = 1/2 + 1/(4x^2) + 3/(8x^4) + 15/(16x^6) + ...
    x = 50.0
    ref = 0.5 + 1 / (4 * x**2) + 3 / (8 * x**4) + 15 / (16 * x**6)
    assert x * dawson(x) == pytest.approx(ref, abs=1e-13)


def test_dawson_at_one_matches_quadrature():
    with mpmath.workdps(30):
        val = mpmath.quad(lambda s: mpmath.exp(s * s), [0, 1])
    assert dawson(1.0) == pytest.approx(math.exp(-1) * float(val), abs=1e-14)


@given(st.floats(0.0, 40.0))
def test_dawson_matches_mpmath(x):
    # daw(x) = sqrt(pi)/2 exp(-x^2) erfi(x)
    with mpmath.workdps(40):
        ref = float(mpmath.sqrt(mpmath.pi) / 2 * mpmath.exp(-mpmath.mpf(x) ** 2) * mpmath.erfi(x))
    assert dawson(x) == pytest.approx(ref, abs=1e-12, rel=1e-12)


def test_dawson_is_odd_and_vectorized():
    x = np.linspace(-8, 8, 33)
    d = dawson(x)
    np.testing.assert_allclose(d, -dawson(-x), atol=0)
    np.testing.assert_allclose(d, special.dawsn(x), atol=1e-13)


# --- kernel ---------------------------------------------------------------


@pytest.mark.parametrize("chi", [0.0, 1.0, -0.1, 1.5])
def test_chi_outside_unit_interval(chi):
    with pytest.raises(KernelDomainError):
        AppendixGKernel(chi, 1, 1)


def test_kernel_at_zero():
    assert appg_G(AppendixGKernel(0.3, 1.7, 0.9), 0.0) == pytest.approx(1.7**2)


def test_kernel_matches_erf_form():
    # direct complex-erf evaluation with mpmath at moderate t
    k = AppendixGKernel(0.3, 1.2, 0.8)
    for t in (0.1, 1.0, 4.0):
        y = mpmath.sqrt(k.gamma * t)
        e = mpmath.exp(-k.gamma * t)
        sub = e * (1 - mpmath.im(mpmath.erf(1j * y))) + mpmath.exp(k.gamma * t) * (1 - mpmath.erf(y))
        ref = k.g**2 * (k.chi * e + (1 - k.chi) / 2 * sub)
        assert appg_G(k, t) == pytest.approx(float(ref), rel=1e-12)


@pytest.mark.parametrize("t", [50.0, 800.0, 2000.0])
def test_kernel_large_time_has_no_overflow(t):
    # the sub-ohmic part leaves a small negative power-law tail
    with mpmath.workdps(60):
        y = mpmath.sqrt(t)
        sub = mpmath.exp(-t) * (1 - mpmath.erfi(y)) + mpmath.exp(t) * mpmath.erfc(y)
        ref = float(K.g**2 * (K.chi * mpmath.exp(-t) + (1 - K.chi) / 2 * sub))
    val = appg_G(K, t)
    assert np.isfinite(val) and val < 0
    assert val == pytest.approx(ref, rel=1e-9)


def test_kernel_chi_near_one_is_lorentz():
    k = AppendixGKernel(1 - 1e-12, 0.7, 1.3)
    t = np.linspace(0, 5, 11)
    np.testing.assert_allclose(appg_G(k, t), 0.49 * np.exp(-1.3 * t), rtol=1e-9)


def test_kernel_negative_time():
    with pytest.raises(KernelDomainError):
        appg_G(K, -1.0)


def test_zeroth_moment_by_quadrature():
    val, _ = quad(lambda s: appg_G(K, s), 0, np.inf, limit=500)
    assert val == pytest.approx(K.g0, rel=1e-6)


def test_moments_only_zeroth():
    assert moments(K, 0)[0] == pytest.approx(0.5)
    with pytest.raises(DivergentMomentError):
        moments(K, 1)


@pytest.mark.parametrize("p", [0.1, 1.0, 10.0])
def test_laplace_matches_quadrature(p):
    val, _ = quad(lambda s: math.exp(-p * s) * appg_G(K, s), 0, np.inf, limit=500, epsabs=1e-13)
    assert appg_laplace(K, p) == pytest.approx(val, rel=1e-8)


def test_laplace_at_zero_and_small_p():
    assert appg_laplace(K, 0) == pytest.approx(K.g0)
    p = 1e-6
    approx = K.g**2 / K.gamma * (K.chi + (1 - K.chi) * math.sqrt(p / K.gamma))
    assert abs(appg_laplace(K, p) - approx) < 10 * p


def test_laplace_chi_near_one_is_lorentz():
    k = AppendixGKernel(1 - 1e-12, 0.7, 1.3)
    lor = ExpSumKernel.single(0.7, 1.3)
    assert appg_laplace(k, 0.4 + 0.3j) == pytest.approx(lor.laplace(0.4 + 0.3j), rel=1e-9)


def test_laplace_domain():
    with pytest.raises(KernelDomainError):
        appg_laplace(K, -0.5)


@given(st.floats(0.01, 0.99), st.floats(-100, 100))
def test_spectral_density_nonnegative(chi, w):
    assert appg_spectral_density(AppendixGKernel(chi, 1.0, 1.0), w) >= 0


def test_spectral_density_normalization():
    # (1/2pi) int J = G(0) = g^2
    val, _ = quad(lambda w: appg_spectral_density(K, w), -np.inf, np.inf, limit=500)
    assert val / (2 * math.pi) == pytest.approx(K.g**2, rel=1e-6)


# --- half-order term ------------------------------------------------------


def test_x_half_at_zero():
    assert appg_x_half(K, 0.0) == 0.0


def test_x_half_is_laplace_inverse_of_first_correction():
    # x~(p) = 1/(p + G~(lam^2 p)); the lam^1 coefficient is -(1-chi) g^2 gamma^(-3/2) sqrt(p) / (p+G0)^2
    c = (1 - K.chi) * K.g**2 / K.gamma**1.5

    def f(p):
        return -c * mpmath.sqrt(p) / (p + K.g0) ** 2

    for t in (0.5, 3.0, 20.0):
        with mpmath.workdps(30):
            ref = float(mpmath.invertlaplace(f, t, method="talbot"))
        assert appg_x_half(K, t) == pytest.approx(ref, rel=1e-9)


def test_x_half_tail_decays_as_power_three_halves():
    # y + (1 - 2y^2) daw(y) -> -1/(2y^3), so |x_half| t^(3/2) has a finite limit
    limit = (1 - K.chi) / (2 * math.sqrt(math.pi * K.chi)) * K.g / K.gamma * K.g0**-1.5
    t = np.array([1e4, 1e5, 1e6])
    scaled = np.abs(appg_x_half(K, t)) * t**1.5
    np.testing.assert_allclose(scaled, limit, rtol=1e-3)
    assert abs(scaled[-1] - limit) < abs(scaled[0] - limit)


def test_generic_solver_against_half_order_expansion():
    t = np.linspace(0, 4, 801)
    errs = []
    for lam in (0.3, 0.15):
        tr = solve_generic(K, lam, t)
        mask = t >= 1.0
        pert = appg_x0(K, t) + lam * appg_x_half(K, t)
        errs.append(np.max(np.abs(tr.values[mask] - pert[mask])))
    assert errs[0] / errs[1] > 3.0  # O(lam**2)


def test_exact_inversion_matches_generic_solver():
    lam = 0.3
    t = np.linspace(0, 3, 1201)
    tr = solve_generic(K, lam, t)
    ref = appg_x_exact(K, lam, t[::300])
    np.testing.assert_allclose(tr.values[::300].real, ref, atol=2e-5)


def test_exact_inversion_initial_value():
    assert appg_x_exact(K, 0.1, 0.0) == 1.0
