import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from bvhspin.errors import ConfigError, KernelDomainError
from bvhspin.kernels import ExpSumKernel, GenericKernel, LorentzMode
from bvhspin.volterra import (
    Provenance,
    Trajectory,
    born_x_prime,
    closed_form_single_peak,
    closed_form_single_peak_dot,
    single_peak_trajectory,
    solve_expsum,
    solve_generic,
    tcl_gamma,
    tcl_x,
)

from conftest import mode_lists


def talbot_x(kernel, lam, t):
    """Oracle for real kernels: numerical Laplace inversion of 1 / (p + G~(lam**2 p))."""

    def xt(p):
        q = lam**2 * p
        return 1 / (p + sum(m.weight / (q + m.gamma) for m in kernel.modes))

    with mpmath.workdps(30):
        return complex(mpmath.invertlaplace(xt, t, method="talbot"))


def residue_x(kernel, lam, t):
    """Oracle: x~(p) is rational, so x(t) is a sum of residues at its simple poles."""
    P = np.polynomial.Polynomial
    den_all = P([1.0 + 0j])
    for m in kernel.modes:
        den_all = den_all * P([m.rate, lam**2])
    num = den_all
    den = P([0, 1.0 + 0j]) * den_all
    for i, m in enumerate(kernel.modes):
        rest = P([1.0 + 0j])
        for j, o in enumerate(kernel.modes):
            if j != i:
                rest = rest * P([o.rate, lam**2])
        den = den + m.weight * rest
    roots = den.roots()
    dden = den.deriv()
    return sum(num(r) / dden(r) * np.exp(r * t) for r in roots)


# --- closed form ----------------------------------------------------------


def test_closed_form_initial_value():
    assert closed_form_single_peak(0.4, 1, 1, 0.0) == pytest.approx(1.0)


def test_closed_form_explicit_example():
    t = np.linspace(0, 10, 11)
    ref = 4 / 3 * np.exp(-0.2 * t) - 1 / 3 * np.exp(-0.8 * t)
    np.testing.assert_allclose(closed_form_single_peak(0.4, 1, 1, t), ref, rtol=1e-14)


def test_closed_form_derivative_vanishes_at_zero():
    assert closed_form_single_peak_dot(0.4, 1, 1, 0.0) == pytest.approx(0.0, abs=1e-16)


@pytest.mark.parametrize("g,gamma,lam", [(0.4, 1, 1), (0.9, 1, 1), (0.5, 1, 1)])
def test_closed_form_matches_laplace_inversion(g, gamma, lam):
    # covers the real-delta, oscillatory and critical regimes
    k = ExpSumKernel.single(g, gamma)
    for t in (0.3, 1.7, 6.0):
        assert closed_form_single_peak(g, gamma, lam, t) == pytest.approx(
            talbot_x(k, lam, t).real, abs=1e-10
        )


def test_closed_form_derivative_matches_finite_difference():
    t, h = 1.3, 1e-5
    fd = (closed_form_single_peak(0.4, 1, 0.7, t + h) - closed_form_single_peak(0.4, 1, 0.7, t - h)) / (2 * h)
    assert closed_form_single_peak_dot(0.4, 1, 0.7, t) == pytest.approx(fd, rel=1e-8)


def test_closed_form_rejects_nonpositive():
    with pytest.raises(KernelDomainError):
        closed_form_single_peak(0.4, 1, 0.0, 1.0)


def test_oscillatory_regime_is_flagged():
    tr = single_peak_trajectory(2.0, 1.0, 1.0, np.linspace(0, 5, 11))
    assert tr.meta["regime"] == "oscillatory-extension"
    assert single_peak_trajectory(0.4, 1.0, 1.0, [0, 1]).meta["regime"] == "real-delta"


@given(st.floats(0.05, 1.0), st.floats(0.5, 3.0), st.floats(0.1, 1.0))
def test_real_delta_envelope(g, gamma, lam):
    if (lam * g) ** 2 >= 0.99 * (gamma / 2) ** 2:
        return
    x = closed_form_single_peak(g, gamma, lam, np.linspace(0, 20, 201))
    assert np.all(x > 0) and np.all(x <= 1 + 1e-12)


# --- ODE solver -----------------------------------------------------------


def test_solve_expsum_matches_closed_form():
    grid = np.linspace(0, 10, 201)
    tr = solve_expsum(ExpSumKernel.single(0.4, 1), 1.0, grid)
    assert tr.provenance is Provenance.EXACT_ODE
    np.testing.assert_allclose(tr.values, closed_form_single_peak(0.4, 1, 1, grid), atol=1e-8)
    np.testing.assert_allclose(tr.xdot, closed_form_single_peak_dot(0.4, 1, 1, grid), atol=1e-8)


def test_solve_expsum_initial_condition():
    k = ExpSumKernel((LorentzMode(0.4, 1, 0.5), LorentzMode(0.3, 2, -1)))
    assert solve_expsum(k, 0.6, [0, 1, 2]).values[0] == 1


def test_residue_oracle_agrees_with_talbot():
    k = ExpSumKernel((LorentzMode(0.4, 1), LorentzMode(0.7, 0.6)))
    assert residue_x(k, 0.8, 1.3) == pytest.approx(talbot_x(k, 0.8, 1.3), abs=1e-10)


def test_solve_expsum_multimode_against_residues():
    k = ExpSumKernel((LorentzMode(0.4, 1, 0.5), LorentzMode(0.7, 0.6, -1.2)))
    grid = np.linspace(0, 6, 13)
    tr = solve_expsum(k, 0.8, grid)
    for t, x in zip(grid[1::3], tr.values[1::3]):
        assert x == pytest.approx(residue_x(k, 0.8, t), abs=1e-8)


def test_small_lambda_approaches_zeroth_order():
    k = ExpSumKernel.single(0.4, 1)
    grid = np.linspace(0, 5, 51)
    errs = []
    for lam in (0.1, 0.05):
        tr = solve_expsum(k, lam, grid)
        errs.append(np.max(np.abs(tr.values - np.exp(-0.16 * grid))))
    assert errs[1] < errs[0] / 3.5  # O(lam**2)


@given(mode_lists, st.floats(0.3, 1.5))
def test_exact_modulus_bounded(modes, lam):
    tr = solve_expsum(ExpSumKernel(tuple(modes)), lam, np.linspace(0, 5, 26))
    assert np.all(np.abs(tr.values) <= 1 + 1e-8)


def test_lambda_scaling_consistency():
    k = ExpSumKernel((LorentzMode(0.4, 1, 0.5), LorentzMode(0.3, 2, -1)))
    lam = 0.6
    grid = np.linspace(0, 4, 21)
    # x(t; lam) is the unscaled solution with couplings lam*g at time t/lam**2
    unscaled = ExpSumKernel(tuple(LorentzMode(lam * m.g, m.gamma, m.dw) for m in k.modes))
    a = solve_expsum(k, lam, grid).values
    b = solve_expsum(unscaled, 1.0, grid / lam**2).values
    np.testing.assert_allclose(a, b, atol=1e-8)


@pytest.mark.parametrize("grid", [[1.0, 2.0], [0.0, 2.0, 1.0], []])
def test_bad_grids_rejected(grid):
    with pytest.raises(Exception):
        solve_expsum(ExpSumKernel.single(1, 1), 1.0, grid)


def test_stiff_small_lambda_runs():
    tr = solve_expsum(ExpSumKernel.single(0.4, 1), 0.05, np.linspace(0, 5, 11))
    np.testing.assert_allclose(tr.values, closed_form_single_peak(0.4, 1, 0.05, tr.times), atol=1e-7)


# --- generic solver -------------------------------------------------------


def test_generic_zero_kernel():
    tr = solve_generic(GenericKernel(lambda t: np.zeros_like(t)), 0.5, np.linspace(0, 3, 31))
    np.testing.assert_allclose(tr.values, 1.0)


def test_generic_requires_uniform_grid():
    with pytest.raises(ConfigError):
        solve_generic(ExpSumKernel.single(1, 1), 1.0, [0, 0.1, 0.3, 0.4])


def test_generic_second_order_convergence():
    g = GenericKernel(lambda t: 0.16 * np.exp(-np.asarray(t)))
    errs = []
    for n in (101, 201, 401):
        grid = np.linspace(0, 5, n)
        tr = solve_generic(g, 0.7, grid)
        errs.append(np.max(np.abs(tr.values - closed_form_single_peak(0.4, 1, 0.7, grid))))
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    for r in rates:
        assert r == pytest.approx(2.0, abs=0.2)


def test_generic_derivative_is_second_order_too():
    g = GenericKernel(lambda t: 0.16 * np.exp(-np.asarray(t)))
    grid = np.linspace(0, 5, 401)
    tr = solve_generic(g, 0.7, grid)
    assert tr.xdot[0] == 0
    np.testing.assert_allclose(tr.xdot, closed_form_single_peak_dot(0.4, 1, 0.7, grid), atol=5e-6)


# --- Trajectory -----------------------------------------------------------


def test_trajectory_interpolation_and_extrapolation():
    tr = single_peak_trajectory(0.4, 1, 1, np.linspace(0, 5, 51))
    assert tr.interpolate(2.345) == pytest.approx(closed_form_single_peak(0.4, 1, 1, 2.345), abs=1e-7)
    with pytest.raises(ValueError):
        tr.interpolate(5.5)


def test_trajectory_requires_start_at_one():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 1.0]), np.array([0.5, 0.4]), 1.0, Provenance.EXACT_ODE)


# --- Born and TCL ---------------------------------------------------------


def test_born_initial_value():
    assert born_x_prime(0.4, 1, 1, 0.0) == pytest.approx(1.0)


def test_born_second_order_expansion():
    # population factor x'(t) ~ exp(-2g^2 t/gamma)(1 + 2 g^2/gamma^2 (1 - 2 g^2 t/gamma) lam^2)
    g, gamma, t = 0.4, 1.0, 2.0
    errs = []
    for lam in (0.1, 0.05):
        ref = math.exp(-2 * g**2 * t / gamma) * (1 + 2 * g**2 / gamma**2 * (1 - 2 * g**2 * t / gamma) * lam**2)
        errs.append(abs(born_x_prime(g, gamma, lam, t) - ref))
    assert 12 < errs[0] / errs[1] < 20  # O(lam**4)


def test_tcl2_limits():
    assert tcl_gamma(2, 0.4, 1, 1, 0.0) == 0
    assert tcl_gamma(2, 0.4, 1, 1, 1e3) == pytest.approx(2 * 0.16)


def test_tcl_rejects_other_orders():
    with pytest.raises(ValueError):
        tcl_gamma(3, 0.4, 1, 1, 1.0)


@pytest.mark.parametrize("order", [2, 4])
def test_tcl_rate_matches_display(order):
    g, gamma, lam, t = 0.4, 1.0, 0.7, 0.9
    s = gamma * t / lam**2
    ref = 2 * g**2 / gamma * (1 - math.exp(-s))
    if order == 4:
        ref += lam**2 * 4 * g**4 / gamma**3 * math.exp(-s) * (math.sinh(s) - s)
    assert tcl_gamma(order, g, gamma, lam, t) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("order", [2, 4])
def test_tcl_x_is_integral_of_rate(order):
    g, gamma, lam = 0.4, 1.0, 0.7
    grid = np.linspace(0, 3, 7)
    tr = tcl_x(order, g, gamma, lam, grid)
    assert tr.values[0] == 1
    for t, x in zip(grid, tr.values):
        integral, _ = quad(lambda s: tcl_gamma(order, g, gamma, lam, s), 0, t, epsabs=1e-14)
        assert x == pytest.approx(math.exp(-0.5 * integral), rel=1e-11)


def test_tcl2_long_time_form():
    g, gamma, t = 0.4, 1.0, 3.0
    errs = []
    for lam in (0.2, 0.1):
        x = tcl_x(2, g, gamma, lam, [0, t]).values[-1]
        ref = math.exp(-g**2 * t / gamma) * (1 + g**2 / gamma**2 * lam**2)
        errs.append(abs(x - ref))
    assert errs[0] / errs[1] > 12


def test_tcl4_long_time_matches_series():
    # long-time form of TCL4 agrees with the lambda**2 perturbative series
    g, gamma, t = 0.4, 1.0, 3.0
    errs = []
    for lam in (0.2, 0.1):
        x = tcl_x(4, g, gamma, lam, [0, t]).values[-1]
        a = g**2 / gamma
        ref = math.exp(-a * t) * (1 + g**2 / gamma**2 * (1 - a * t) * lam**2)
        errs.append(abs(x - ref))
    assert errs[0] / errs[1] > 12


def test_tcl2_short_time_matches_dyson():
    # for t = O(lam**2): 1 - (g^2/gamma) t + (g^2 lam^2/gamma^2)(1 - exp(-gamma t/lam^2)) + O(lam^4)
    g, gamma, tau = 0.4, 1.0, 1.5
    errs = []
    for lam in (0.2, 0.1):
        t = tau * lam**2
        x = tcl_x(2, g, gamma, lam, [0, t]).values[-1]
        ref = 1 - g**2 / gamma * t + g**2 * lam**2 / gamma**2 * (1 - math.exp(-gamma * t / lam**2))
        errs.append(abs(x - ref))
    assert errs[0] / errs[1] > 12
