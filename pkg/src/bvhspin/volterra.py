"""Exact reduced dynamics x(t; lambda) and the single-peak comparators.

``x`` solves ``dx/dt = -int_0^t lam**-2 G((t - s)/lam**2) x(s) ds`` with
``x(0) = 1`` on the scaled time axis.
"""
from __future__ import annotations

import cmath
import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from .errors import ConfigError, KernelDomainError, SolverError
from .kernels import ExpSumKernel, Kernel

__all__ = [
    "Provenance",
    "Trajectory",
    "solve_expsum",
    "solve_generic",
    "closed_form_single_peak",
    "closed_form_single_peak_dot",
    "single_peak_trajectory",
    "born_x_prime",
    "tcl_gamma",
    "tcl_x",
]

RTOL = 1e-10
ATOL = 1e-12
CRITICAL_TOL = 1e-7


class Provenance(str, enum.Enum):
    EXACT_ODE = "exact-ode"
    EXACT_CLOSED_FORM = "exact-closed-form"
    EXACT_VOLTERRA = "exact-volterra"
    BORN = "born"
    TCL2 = "tcl2"
    TCL4 = "tcl4"
    PERTURBATIVE = "perturbative"
    UNIFORM = "uniform"
    SHORT_TIME = "short-time"


EXACT = {Provenance.EXACT_ODE, Provenance.EXACT_CLOSED_FORM, Provenance.EXACT_VOLTERRA}
STARTS_AT_ONE = EXACT | {
    Provenance.BORN,
    Provenance.TCL2,
    Provenance.TCL4,
    Provenance.UNIFORM,
    Provenance.SHORT_TIME,
}


@dataclass(frozen=True)
class Trajectory:
    """Samples of x(t; lambda) on a strictly increasing grid.

    ``xdot`` is the time derivative when the producer knows it analytically
    (or from the ODE right-hand side); otherwise ``None``.
    """

    times: np.ndarray
    values: np.ndarray
    lam: float
    provenance: Provenance
    xdot: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("trajectory grid must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if self.xdot is not None:
            object.__setattr__(self, "xdot", np.asarray(self.xdot, dtype=complex))
        if self.provenance in STARTS_AT_ONE and t.size:
            if t[0] != 0.0 or abs(v[0] - 1) > 1e-12:
                raise ValueError(f"{self.provenance.value} trajectories start at t = 0 with x = 1")

    def derivative(self) -> np.ndarray:
        """dx/dt on the grid; falls back to finite differences."""
        if self.xdot is not None:
            return self.xdot
        return np.gradient(self.values, self.times, edge_order=2)

    def interpolate(self, t):
        """x at arbitrary times inside the grid by cubic Hermite interpolation."""
        t = np.asarray(t, dtype=float)
        lo, hi = self.times[0], self.times[-1]
        if np.any(t < lo - 1e-12) or np.any(t > hi + 1e-12):
            raise ValueError(f"time outside trajectory grid [{lo}, {hi}]")
        spline = CubicHermiteSpline(self.times, self.values, self.derivative())
        out = spline(np.clip(t, lo, hi))
        return complex(out) if out.ndim == 0 else out


def _check_grid(grid) -> np.ndarray:
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ConfigError("time grid must be a non-empty 1-D array")
    if t[0] != 0.0:
        raise ConfigError("time grid must start at t = 0")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ConfigError("time grid must be strictly increasing")
    return t


def _check_lam(lam):
    if not (lam > 0):
        raise KernelDomainError(f"lambda must be > 0, got {lam}")


def solve_expsum(
    kernel: ExpSumKernel,
    lam: float,
    grid,
    rtol: float = RTOL,
    atol: float = ATOL,
    method: str = "DOP853",
) -> Trajectory:
    """Integrate the pseudomode ODE for an exponential-sum kernel.

    With ``nu_l = gamma_l + i dw_l`` the convolution is replaced by
    auxiliary amplitudes ``y_l`` obeying ``dy_l/dt = (g_l**2 x - nu_l y_l) / lam**2``
    and ``dx/dt = -sum_l y_l``. This is exact; only stepping error remains.
    """
    _check_lam(lam)
    t = _check_grid(grid)
    w = kernel.weights / lam**2
    nu = kernel.rates / lam**2
    m = len(w)
    A = np.zeros((m + 1, m + 1), dtype=complex)
    A[0, 1:] = -1.0
    A[1:, 0] = w
    A[1:, 1:] = np.diag(-nu)
    y0 = np.zeros(m + 1, dtype=complex)
    y0[0] = 1.0
    if t.size == 1:
        return Trajectory(t, np.ones(1), lam, Provenance.EXACT_ODE, np.zeros(1))
    extra = {"jac": A} if method in ("Radau", "BDF", "LSODA") else {}
    sol = integrate.solve_ivp(
        lambda _s, y: A @ y,
        (0.0, float(t[-1])),
        y0,
        method=method,
        t_eval=t,
        rtol=rtol,
        atol=atol,
        **extra,
    )
    if not sol.success:
        raise SolverError(
            f"integration failed at lambda={lam}, rates={kernel.rates.tolist()}: "
            f"{sol.message}"
        )
    x = sol.y[0]
    xdot = -np.sum(sol.y[1:], axis=0)
    meta = {"rtol": rtol, "atol": atol, "method": method, "nfev": int(sol.nfev)}
    return Trajectory(t, x, lam, Provenance.EXACT_ODE, xdot, meta)


def _cumulative_kernel(kernel: Kernel, lam: float, t: np.ndarray, nodes: int = 12):
    """``K(u) = int_0^u lam**-2 G(v / lam**2) dv`` on a uniform grid.

    Each grid cell is integrated with fixed-order Gauss-Legendre.
    """
    if isinstance(kernel, ExpSumKernel):
        out = np.zeros(t.shape, dtype=complex)
        for w, nu in kernel.merged_poles():
            out += (w / nu) * -np.expm1(-nu * t / lam**2)
        return out
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    a, b = t[:-1], t[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    pts = mid[:, None] + half[:, None] * xg[None, :]
    vals = kernel.evaluate(pts.ravel() / lam**2).reshape(pts.shape) / lam**2
    cell = (vals @ wg) * half
    return np.concatenate([[0.0], np.cumsum(cell)])


def solve_generic(kernel: Kernel, lam: float, grid) -> Trajectory:
    """Trapezoidal product rule for the integrated (second-kind) form.

    Swapping the order of the double integral gives
    ``x(t) = 1 - int_0^t K(t - s) x(s) ds`` with ``K`` the running integral of
    the scaled kernel. ``K(0) = 0`` makes the trapezoidal scheme explicit.
    Global error is O(h**2); the grid must be uniform.
    """
    _check_lam(lam)
    t = _check_grid(grid)
    n = t.size
    if n > 2:
        steps = np.diff(t)
        h = steps[0]
        if np.max(np.abs(steps - h)) > 1e-9 * max(h, 1e-300) * n:
            raise ConfigError("solve_generic requires a uniform grid")
    else:
        h = t[-1] if n == 2 else 0.0
    K = _cumulative_kernel(kernel, lam, t)
    x = np.empty(n, dtype=complex)
    x[0] = 1.0
    for i in range(1, n):
        # weights: h/2 at j=0, h inside; j=i term vanishes since K(0)=0
        s = 0.5 * K[i] * x[0] + np.dot(K[i - 1 : 0 : -1], x[1:i])
        x[i] = 1.0 - h * s
    # xdot = -int k(t - s) x(s) ds with x linear per cell and k integrated exactly via K
    xdot = np.zeros(n, dtype=complex)
    dK = np.diff(K)
    xm = 0.5 * (x[1:] + x[:-1])
    for i in range(1, n):
        xdot[i] = -np.dot(xm[:i], dK[i - 1 :: -1][:i])
    meta = {"h": float(h), "scheme": "trapezoid", "derivative": "product-midpoint"}
    return Trajectory(t, x, lam, Provenance.EXACT_VOLTERRA, xdot, meta)


def _delta(g, gamma, lam):
    d2 = (gamma / 2) ** 2 - (lam * g) ** 2
    return cmath.sqrt(d2), d2


def closed_form_single_peak(g: float, gamma: float, lam: float, t):
    """Exact x for ``G(t) = g**2 exp(-gamma t)``.

    For ``lam g > gamma / 2`` the square root becomes imaginary (principal
    branch) and the same expression gives the oscillatory solution. At the
    critical coupling the confluent limit is used.
    """
    if not (g > 0 and gamma > 0 and lam > 0):
        raise KernelDomainError("g, gamma and lambda must all be positive")
    t = np.asarray(t, dtype=float)
    D, d2 = _delta(g, gamma, lam)
    h = gamma / 2
    if abs(D) < CRITICAL_TOL * h:
        s = h * t / lam**2
        out = (1 + s) * np.exp(-s)
    else:
        e1 = np.exp(-(h - D) * t / lam**2)
        e2 = np.exp(-(h + D) * t / lam**2)
        out = ((h + D) * e1 - (h - D) * e2) / (2 * D)
        out = out.real
    return float(out) if out.ndim == 0 else np.asarray(out, dtype=float)


def closed_form_single_peak_dot(g: float, gamma: float, lam: float, t):
    """Time derivative of :func:`closed_form_single_peak`."""
    t = np.asarray(t, dtype=float)
    D, _ = _delta(g, gamma, lam)
    h = gamma / 2
    if abs(D) < CRITICAL_TOL * h:
        s = h * t / lam**2
        out = -(h / lam**2) * s * np.exp(-s)
    else:
        e1 = np.exp(-(h - D) * t / lam**2)
        e2 = np.exp(-(h + D) * t / lam**2)
        out = (-(g**2) / (2 * D) * (e1 - e2)).real
    return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)


def single_peak_trajectory(g: float, gamma: float, lam: float, grid) -> Trajectory:
    """Closed-form trajectory; the oscillatory regime is flagged in ``meta``."""
    t = _check_grid(grid)
    _, d2 = _delta(g, gamma, lam)
    regime = "real-delta" if d2 >= 0 else "oscillatory-extension"
    return Trajectory(
        t,
        np.atleast_1d(closed_form_single_peak(g, gamma, lam, t)),
        lam,
        Provenance.EXACT_CLOSED_FORM,
        np.atleast_1d(closed_form_single_peak_dot(g, gamma, lam, t)),
        {"regime": regime},
    )


def born_x_prime(g: float, gamma: float, lam: float, t):
    """Population factor of the Born integro-differential equation.

    Same shape as the exact solution with ``g**2`` doubled, i.e.
    ``Delta' = sqrt((gamma/2)**2 - 2 lam**2 g**2)``. Coherences in the Born
    equation follow the exact ``x``.
    """
    return closed_form_single_peak(np.sqrt(2.0) * g, gamma, lam, t)


def tcl_gamma(order: int, g: float, gamma: float, lam: float, t):
    """Decay rate of the second- or fourth-order TCL generator."""
    if order not in (2, 4):
        raise ValueError(f"TCL order must be 2 or 4, got {order}")
    _check_lam(lam)
    t = np.asarray(t, dtype=float)
    s = gamma * t / lam**2
    rate = 2 * g**2 / gamma * -np.expm1(-s)
    if order == 4:
        # exp(-s) (sinh s - s) written without overflow
        rate = rate + lam**2 * 4 * g**4 / gamma**3 * (-np.expm1(-2 * s) / 2 - s * np.exp(-s))
    return float(rate) if rate.ndim == 0 else rate


def _tcl_integral(order, g, gamma, lam, t):
    s = gamma * t / lam**2
    a = g**2 / gamma
    total = 2 * a * (t - lam**2 / gamma * -np.expm1(-s))
    if order == 4:
        c = 4 * g**4 * lam**4 / gamma**4
        total = total + c * (s / 2 + np.expm1(-2 * s) / 4 - (1 - (1 + s) * np.exp(-s)))
    return total


def tcl_x(order: int, g: float, gamma: float, lam: float, grid) -> Trajectory:
    """``x_TCL(t) = exp(-1/2 int_0^t Gamma_TCL)``, integrated analytically."""
    if order not in (2, 4):
        raise ValueError(f"TCL order must be 2 or 4, got {order}")
    _check_lam(lam)
    t = _check_grid(grid)
    x = np.exp(-0.5 * _tcl_integral(order, g, gamma, lam, t))
    xdot = -0.5 * tcl_gamma(order, g, gamma, lam, t) * x
    prov = Provenance.TCL2 if order == 2 else Provenance.TCL4
    return Trajectory(t, x, lam, prov, np.atleast_1d(xdot))
