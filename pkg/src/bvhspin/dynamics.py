"""Qubit states, time-local rates, propagators and two-time correlations built from x(t)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from .errors import NodeSingularityError
from .perturbation import ExponentialPart, PoleExpansion, initial_layer_tstar
from .volterra import Trajectory

__all__ = [
    "QubitDensity",
    "GeneratorRates",
    "PhysicalityReport",
    "density_from_x",
    "generator_rates",
    "propagator",
    "corr_exact",
    "corr_markov",
    "corr_renormalized",
    "jump_ratio",
    "physicality_report",
]

NODE_TOL = 1e-13


@dataclass(frozen=True)
class QubitDensity:
    """``[[p11, c10], [conj(c10), 1 - p11]]``.

    Trace and hermiticity hold by construction. Positivity is only recorded:
    perturbative states may legitimately leave the state space.
    """

    p11: float
    c10: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "p11", float(self.p11))
        object.__setattr__(self, "c10", complex(self.c10))

    @property
    def p00(self) -> float:
        return 1.0 - self.p11

    @property
    def is_physical(self) -> bool:
        tol = 1e-12
        return (
            -tol <= self.p11 <= 1 + tol
            and abs(self.c10) ** 2 <= self.p11 * (1 - self.p11) + tol
        )

    def matrix(self) -> np.ndarray:
        return np.array([[self.p11, self.c10], [self.c10.conjugate(), self.p00]])


@dataclass(frozen=True)
class GeneratorRates:
    gamma_t: float
    delta_omega_t: float


def density_from_x(x: complex, rho0: QubitDensity) -> QubitDensity:
    x = complex(x)
    return QubitDensity(abs(x) ** 2 * rho0.p11, x * rho0.c10)


def generator_rates(x, xdot):
    """Decay rate ``-2 Re(xdot/x)`` and shift ``-Im(xdot/x)``; arrays are accepted."""
    x = np.asarray(x, dtype=complex)
    if np.any(np.abs(x) < NODE_TOL):
        raise NodeSingularityError("x(t) vanishes; the time-local generator is singular")
    q = np.asarray(xdot, dtype=complex) / x
    if q.ndim == 0:
        return GeneratorRates(float(-2 * q.real), float(-q.imag))
    return GeneratorRates(-2 * q.real, -q.imag)


def propagator(x_t1: complex, x_t2: complex, rho: QubitDensity) -> QubitDensity:
    """Map from time t1 to t2; it acts like :func:`density_from_x` with ``x(t2)/x(t1)``."""
    if abs(x_t1) < NODE_TOL:
        raise NodeSingularityError("propagator from a node of x is undefined")
    return density_from_x(complex(x_t2) / complex(x_t1), rho)


def _x_at(source, t):
    if isinstance(source, Trajectory):
        return source.interpolate(t)
    return source(t)


def _check_order(t1, t2):
    if np.any(np.asarray(t2) < np.asarray(t1)):
        raise ValueError("two-time correlations need t2 >= t1")


def corr_exact(source, t1, t2):
    """``<sigma_-(t2) sigma_+(t1)> = x(t2 - t1)``.

    ``source`` is a :class:`Trajectory` (interpolated by cubic Hermite,
    extrapolation rejected) or any callable ``x(t)``.
    """
    _check_order(t1, t2)
    return _x_at(source, np.asarray(t2, dtype=float) - np.asarray(t1, dtype=float))


def corr_markov(source, t1, t2):
    """Regression-formula value ``x(t2) / x(t1)``."""
    _check_order(t1, t2)
    x1 = _x_at(source, t1)
    if np.any(np.abs(x1) < NODE_TOL):
        raise NodeSingularityError("x(t1) vanishes")
    return _x_at(source, t2) / x1


def corr_renormalized(source, expansion, t1, t2, lam: Optional[float] = None):
    """Exact correlation divided by the residue ``r``.

    After the initial layer this coincides with the regression formula:
    with ``x = r exp(p t)`` one has ``x(t2)/x(t1) = x(t2 - t1) / r``.
    """
    if isinstance(expansion, ExponentialPart):
        r = expansion.r
    else:
        if lam is None:
            lam = source.lam
        r = expansion.residue(lam)
    return corr_exact(source, t1, t2) / r


def jump_ratio(source, t: float = 0.0, eps: float = 1e-9) -> complex:
    """``<sigma_-(t+eps) sigma_+(t)> / <sigma_-(t) sigma_+(t)>`` with the equal-time value 1.

    On a perturbative part the numerator tends to ``r``; on exact dynamics to 1.
    """
    # the equal-time correlation is x(0) = 1 by definition
    return complex(corr_exact(source, t, t + eps))


@dataclass(frozen=True)
class PhysicalityReport:
    times: np.ndarray
    valid: np.ndarray
    first_physical_time: Optional[float]
    tstar_formula: Optional[float] = None


def physicality_report(source, rho0: QubitDensity, grid, lam: Optional[float] = None):
    """Check ``|x|**2 p11 <= 1 - |c10|**2 / p11`` on ``grid``.

    ``first_physical_time`` is the earliest time after which the inequality
    holds on the rest of the grid; for smooth sources the crossing is refined
    with Brent's method. For an exponential perturbative part the closed-form
    ``-ln|r| / Re p`` is returned alongside as a cross-check.
    """
    t = np.asarray(grid, dtype=float)
    if rho0.p11 == 0:
        return PhysicalityReport(t, np.ones(t.size, bool), float(t[0]))

    bound = 1 - abs(rho0.c10) ** 2 / rho0.p11
    if isinstance(source, PoleExpansion):
        if lam is None:
            raise ValueError("lam is required with a PoleExpansion")
        source = source.evaluate(lam)

    def slack(s):
        return bound - abs(complex(_x_at(source, s))) ** 2 * rho0.p11

    xs = np.asarray(_x_at(source, t), dtype=complex)
    valid = bound - np.abs(xs) ** 2 * rho0.p11 >= -1e-12
    bad = np.nonzero(~valid)[0]
    if bad.size == 0:
        first = float(t[0])
    elif bad[-1] == t.size - 1:
        first = None
    else:
        i = bad[-1]
        a, b = t[i], t[i + 1]
        first = float(b)
        if slack(a) < 0 < slack(b):
            first = brentq(slack, a, b, xtol=1e-14, rtol=1e-14)
        elif slack(b) == 0:
            first = float(b)

    tstar = None
    if isinstance(source, ExponentialPart):
        tstar = initial_layer_tstar(source, lam or 1.0, "exact")
    return PhysicalityReport(t, valid, first, tstar)
