"""Bath correlation functions G(t), their moments and Laplace transforms.

Conventions: the kernel is one-sided (t >= 0), rates are in units of a
reference width, and the spectral density is tied to the kernel through
``G(t) = (1/2pi) int exp(-i (w - W) t) J(w) dw`` with ``W`` the system
frequency. Spectral densities therefore take the detuning ``w - W`` as input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import (
    DivergentMomentError,
    KernelDomainError,
    SingularityError,
)

__all__ = [
    "LorentzMode",
    "Kernel",
    "ExpSumKernel",
    "GenericKernel",
    "MomentTable",
    "eval_kernel",
    "eval_scaled_kernel",
    "spectral_density",
    "laplace_G",
    "moments",
]

POLE_TOL = 1e-12
ENVELOPE_CUTOFF = 1e-14


@dataclass(frozen=True)
class LorentzMode:
    """One Lorentz peak: coupling ``g``, width ``gamma``, detuning ``dw``."""

    g: float
    gamma: float
    dw: float = 0.0

    def __post_init__(self):
        if not (self.g > 0):
            raise KernelDomainError(f"coupling g must be > 0, got {self.g}")
        if not (self.gamma > 0):
            raise KernelDomainError(f"width gamma must be > 0, got {self.gamma}")
        if not math.isfinite(self.dw):
            raise KernelDomainError(f"detuning must be finite, got {self.dw}")

    @property
    def rate(self) -> complex:
        return complex(self.gamma, self.dw)

    @property
    def weight(self) -> float:
        return self.g * self.g


@dataclass(frozen=True)
class MomentTable:
    """Taylor coefficients ``G~_0 .. G~_n`` of the Laplace transform at p = 0.

    ``errors`` holds quadrature error estimates when the moments were not
    computed in closed form.
    """

    moments: tuple
    errors: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "moments", tuple(complex(m) for m in self.moments))
        if not self.moments:
            raise ValueError("a moment table needs at least G~_0")

    @property
    def order(self) -> int:
        return len(self.moments) - 1

    def __getitem__(self, k):
        return self.moments[k]

    def __len__(self):
        return len(self.moments)

    def truncated(self, n: int) -> "MomentTable":
        if n > self.order:
            from .errors import InsufficientMomentsError

            raise InsufficientMomentsError(
                f"need moments up to order {n}, table has {self.order}"
            )
        errs = None if self.errors is None else self.errors[: n + 1]
        return MomentTable(self.moments[: n + 1], errs)

    def as_array(self) -> np.ndarray:
        return np.array(self.moments, dtype=complex)


class Kernel:
    """Interface shared by all correlation functions.

    Subclasses implement :meth:`evaluate`; the remaining methods have
    quadrature-based defaults.
    """

    #: number of finite moments; ``None`` means all of them
    n_finite_moments: Optional[int] = None

    def evaluate(self, t):
        raise NotImplementedError

    def laplace(self, p: complex) -> complex:
        return _laplace_quad(self, p)

    def moment_table(self, n: int) -> MomentTable:
        vals, errs = [], []
        for k in range(n + 1):
            v, e = _moment_quad(self, k)
            vals.append(v)
            errs.append(e)
        return MomentTable(tuple(vals), tuple(errs))

    def quad_horizon(self, power: int = 0) -> float:
        """Upper integration limit beyond which ``t**power * |G|`` is negligible."""
        return math.inf

    def __call__(self, t):
        return self.evaluate(t)


@dataclass(frozen=True)
class ExpSumKernel(Kernel):
    """``G(t) = sum_l g_l**2 exp(-(gamma_l + i dw_l) t)`` for t >= 0."""

    modes: tuple

    def __post_init__(self):
        modes = tuple(
            m if isinstance(m, LorentzMode) else LorentzMode(**m) for m in self.modes
        )
        if not modes:
            raise KernelDomainError("an exponential-sum kernel needs at least one mode")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def single(cls, g: float, gamma: float, dw: float = 0.0) -> "ExpSumKernel":
        return cls((LorentzMode(g, gamma, dw),))

    @property
    def rates(self) -> np.ndarray:
        return np.array([m.rate for m in self.modes], dtype=complex)

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.modes], dtype=float)

    @property
    def min_gamma(self) -> float:
        return min(m.gamma for m in self.modes)

    @property
    def is_single_resonant(self) -> bool:
        return len(self.modes) == 1 and self.modes[0].dw == 0.0

    def merged_poles(self) -> list:
        """``(weight, rate)`` pairs with coinciding rates summed."""
        out: dict = {}
        for m in self.modes:
            out[m.rate] = out.get(m.rate, 0.0) + m.weight
        return [(w, r) for r, w in out.items()]

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        vals = np.exp(-np.multiply.outer(t, self.rates)) @ self.weights
        return vals if vals.ndim else complex(vals)

    def laplace(self, p: complex, analytic_continuation: bool = False) -> complex:
        p = complex(p)
        if not analytic_continuation and p.real <= -self.min_gamma:
            raise KernelDomainError(
                f"Laplace integral diverges for Re p = {p.real} <= -{self.min_gamma}"
            )
        total = 0j
        for m in self.modes:
            den = p + m.rate
            if abs(den) < POLE_TOL:
                raise SingularityError(f"p = {p} sits on the pole -{m.rate}")
            total += m.weight / den
        return total

    def moment_table(self, n: int) -> MomentTable:
        rates = self.rates
        w = self.weights
        vals = [((-1) ** k) * np.sum(w * rates ** (-(k + 1))) for k in range(n + 1)]
        return MomentTable(tuple(vals))

    def quad_horizon(self, power: int = 0) -> float:
        return _horizon(lambda t: np.sum(self.weights) * np.exp(-self.min_gamma * t), power)


@dataclass(frozen=True)
class GenericKernel(Kernel):
    """A kernel given by an arbitrary callable.

    ``envelope`` bounds ``|G(t)|`` and fixes the quadrature horizon; without
    it integrals run to infinity. ``n_finite_moments`` of ``None`` means
    every moment exists.
    """

    func: Callable
    laplace_func: Optional[Callable] = None
    n_finite_moments: Optional[int] = None
    envelope: Optional[Callable] = None

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        out = np.asarray(self.func(t), dtype=complex)
        if out.shape != t.shape:
            out = np.broadcast_to(out, t.shape).copy()
        return out if out.ndim else complex(out)

    def laplace(self, p: complex) -> complex:
        if self.laplace_func is not None:
            return complex(self.laplace_func(complex(p)))
        return _laplace_quad(self, p)

    def quad_horizon(self, power: int = 0) -> float:
        if self.envelope is None:
            return math.inf
        return _horizon(self.envelope, power)


def _horizon(envelope: Callable, power: int) -> float:
    t = 1.0
    while t < 1e8:
        if abs(envelope(t)) * max(t, 1.0) ** power < ENVELOPE_CUTOFF:
            return t
        t *= 2.0
    return math.inf


def _quad_complex(f: Callable, T: float, epsabs=1e-15, epsrel=1e-12):
    kw = dict(epsabs=epsabs, epsrel=epsrel, limit=2000)
    if math.isinf(T):
        pieces = [(0.0, 50.0), (50.0, math.inf)]
    else:
        pieces = [(0.0, T)]
    val, err = 0j, 0.0
    for a, b in pieces:
        re, er = integrate.quad(lambda s: complex(f(s)).real, a, b, **kw)
        im, ei = integrate.quad(lambda s: complex(f(s)).imag, a, b, **kw)
        val += complex(re, im)
        err += er + ei
    return val, err


def _moment_quad(kernel: Kernel, k: int):
    if kernel.n_finite_moments is not None and k >= kernel.n_finite_moments:
        raise DivergentMomentError(
            f"moment {k} diverges (kernel declares {kernel.n_finite_moments} finite)"
        )
    T = kernel.quad_horizon(k)
    val, err = _quad_complex(lambda s: s**k * kernel.evaluate(s), T)
    c = (-1) ** k / math.factorial(k)
    return c * val, abs(c) * err


def _laplace_quad(kernel: Kernel, p: complex) -> complex:
    p = complex(p)
    T = kernel.quad_horizon(0)
    val, _ = _quad_complex(lambda s: np.exp(-p * s) * kernel.evaluate(s), T)
    return val


def _check_time(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise KernelDomainError("the kernel is defined for t >= 0 only")
    return arr


def eval_kernel(kernel: Kernel, t):
    """G(t) for t >= 0 (scalar or array)."""
    _check_time(t)
    return kernel.evaluate(t)


def eval_scaled_kernel(kernel: Kernel, t, lam: float):
    """The rescaled kernel ``lam**-2 G(t / lam**2)``."""
    if not (lam > 0):
        raise KernelDomainError(f"lambda must be > 0, got {lam}")
    arr = _check_time(t)
    return kernel.evaluate(arr / lam**2) / lam**2


def spectral_density(kernel: ExpSumKernel, omega, per_mode: bool = False):
    """J at detuning ``omega`` (= w - W). With ``per_mode`` returns each J_l.

    Each peak contributes ``2 gamma g**2 / (gamma**2 + (omega - dw)**2)``.
    """
    if not isinstance(kernel, ExpSumKernel):
        raise TypeError("spectral_density needs an ExpSumKernel")
    om = np.asarray(omega, dtype=float)
    parts = [
        2 * m.gamma * m.weight / (m.gamma**2 + (om - m.dw) ** 2) for m in kernel.modes
    ]
    if per_mode:
        return np.array(parts)
    total = np.sum(parts, axis=0)
    return float(total) if np.ndim(total) == 0 else total


def laplace_G(kernel: Kernel, p: complex, **kwargs) -> complex:
    """G~(p) = int_0^inf exp(-p t) G(t) dt."""
    return kernel.laplace(p, **kwargs)


def moments(kernel: Kernel, n: int) -> MomentTable:
    """``G~_k = (-1)**k / k! int t**k G(t) dt`` for k = 0..n."""
    if n < 0:
        raise ValueError("moment order must be >= 0")
    if kernel.n_finite_moments is not None and n >= kernel.n_finite_moments:
        raise DivergentMomentError(
            f"moment {kernel.n_finite_moments} and beyond diverge; asked for {n}"
        )
    return kernel.moment_table(n)
