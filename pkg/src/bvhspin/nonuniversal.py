"""A kernel with a divergent first moment.

The bath mixes a Lorentz peak (weight ``chi``) with a sub-ohmic
``|w|**(1/2)`` component. Only ``G~_0 = chi g**2 / gamma`` exists, the
expansion of x picks up odd powers of ``lam`` and its first correction
decays as a power law instead of exponentially.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import erfcx

from .errors import DivergentMomentError, KernelDomainError, SingularityError
from .kernels import Kernel, MomentTable

__all__ = [
    "AppendixGKernel",
    "dawson",
    "appg_G",
    "appg_laplace",
    "appg_spectral_density",
    "appg_x0",
    "appg_x_half",
    "appg_x_exact",
]

# below this the exp(-x^2) * sum x^(2n+1)/(n!(2n+1)) series is used
DAWSON_SWITCH = 6.0
SQRT_PI = math.sqrt(math.pi)


def dawson(x):
    """Dawson integral ``exp(-x**2) int_0^x exp(s**2) ds``.

    For ``|x| <= 6`` the positive-term series ``sum x**(2n+1) / (n! (2n+1))``
    is summed and multiplied by ``exp(-x**2)``; no cancellation occurs. Above
    that the asymptotic series ``(1/2x) sum (2n-1)!! / (2x**2)**n`` is
    truncated at its smallest term, which is below 1e-16 there.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.empty_like(ax)

    small = ax <= DAWSON_SWITCH
    if np.any(small):
        xs = ax[small]
        x2 = xs * xs
        term = xs.copy()  # x^(2n+1)/n!
        total = term.copy()
        n = 0
        while True:
            n += 1
            term = term * x2 / n
            contrib = term / (2 * n + 1)
            total = total + contrib
            if np.all(contrib <= 1e-17 * total):
                break
        out[small] = np.exp(-x2) * total

    big = ~small
    if np.any(big):
        xb = ax[big]
        inv = 1.0 / (2 * xb * xb)
        term = np.ones_like(xb)
        total = term.copy()
        for n in range(1, 60):
            nxt = term * (2 * n - 1) * inv
            if np.all(nxt >= term):
                break
            term = np.where(nxt < term, nxt, 0.0)
            total = total + term
            if np.all(term < 1e-18 * total):
                break
        out[big] = total / (2 * xb)

    out = np.sign(x) * out
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AppendixGKernel(Kernel):
    """Lorentz plus sub-ohmic mixture with mixing weight ``chi`` in (0, 1)."""

    chi: float
    g: float
    gamma: float

    def __post_init__(self):
        if not (0 < self.chi < 1):
            raise KernelDomainError(f"chi must lie in (0, 1), got {self.chi}")
        if not (self.g > 0 and self.gamma > 0):
            raise KernelDomainError("g and gamma must be positive")

    n_finite_moments = 1

    @property
    def g0(self) -> float:
        return self.chi * self.g**2 / self.gamma

    def evaluate(self, t):
        return appg_G(self, t)

    def laplace(self, p: complex) -> complex:
        return appg_laplace(self, p)

    def moment_table(self, n: int) -> MomentTable:
        if n > 0:
            raise DivergentMomentError("only the zeroth moment of this kernel is finite")
        return MomentTable((self.g0,))


def appg_G(kernel: AppendixGKernel, t):
    """Correlation function for t >= 0.

    ``Im erf(i y)`` equals ``(2/sqrt(pi)) exp(y**2) daw(y)`` and
    ``exp(y**2) erfc(y)`` is the scaled complementary error function, so no
    exponentially large intermediate appears.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise KernelDomainError("t must be >= 0")
    y = np.sqrt(kernel.gamma * t)
    e = np.exp(-kernel.gamma * t)
    sub = e - 2 / SQRT_PI * dawson(y) + erfcx(y)
    out = kernel.g**2 * (kernel.chi * e + (1 - kernel.chi) / 2 * sub)
    return float(out) if out.ndim == 0 else out


def appg_laplace(kernel: AppendixGKernel, p: complex) -> complex:
    """``g**2 (chi/(p+gamma) + (1-chi) sqrt(p) / ((sqrt(p)+sqrt(gamma))(p+gamma)))``."""
    p = complex(p)
    if p.real < 0:
        raise KernelDomainError("closed form is used for Re p >= 0 only")
    if abs(p + kernel.gamma) < 1e-12:
        raise SingularityError("p at the pole -gamma")
    sp = cmath.sqrt(p)
    sg = math.sqrt(kernel.gamma)
    return kernel.g**2 * (
        kernel.chi / (p + kernel.gamma)
        + (1 - kernel.chi) * sp / ((sp + sg) * (p + kernel.gamma))
    )


def appg_spectral_density(kernel: AppendixGKernel, omega):
    """J at detuning ``omega``."""
    om = np.asarray(omega, dtype=float)
    den = kernel.gamma**2 + om**2
    out = kernel.g**2 * (
        kernel.chi * 2 * kernel.gamma / den
        + (1 - kernel.chi) * np.sqrt(np.abs(om)) * math.sqrt(2 * kernel.gamma) / den
    )
    return float(out) if out.ndim == 0 else out


def appg_x0(kernel: AppendixGKernel, t):
    t = np.asarray(t, dtype=float)
    out = np.exp(-kernel.g0 * t)
    return float(out) if out.ndim == 0 else out


def appg_x_half(kernel: AppendixGKernel, t):
    """Coefficient of ``lam**1`` in the perturbative part."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise KernelDomainError("t must be >= 0")
    chi, g, gam = kernel.chi, kernel.g, kernel.gamma
    y = np.sqrt(kernel.g0 * t)
    pref = -(1 - chi) / math.sqrt(math.pi * chi) * g / gam
    out = pref * (y + (1 - 2 * y * y) * dawson(y))
    return float(out) if out.ndim == 0 else out


def appg_x_exact(kernel: AppendixGKernel, lam: float, t, dps: int = 30):
    """Exact x(t; lam) by numerical Bromwich inversion (Talbot contour).

    ``x~(p) = 1 / (p + G~(lam**2 p))``; the only non-polar singularity is the
    square-root branch cut on the negative real axis, which the Talbot
    contour wraps.
    """
    if not (lam > 0):
        raise KernelDomainError("lambda must be > 0")
    chi, g2, gam = kernel.chi, kernel.g**2, kernel.gamma

    def xt(p):
        q = lam**2 * p
        sq = mpmath.sqrt(q)
        Gq = g2 * (chi / (q + gam) + (1 - chi) * sq / ((sq + mpmath.sqrt(gam)) * (q + gam)))
        return 1 / (p + Gq)

    t = np.asarray(t, dtype=float)
    with mpmath.workdps(dps):
        vals = [
            1.0 if ti == 0 else float(mpmath.re(mpmath.invertlaplace(xt, ti, method="talbot")))
            for ti in np.atleast_1d(t)
        ]
    out = np.array(vals)
    return float(out[0]) if t.ndim == 0 else out
