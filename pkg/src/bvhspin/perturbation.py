"""Weak-coupling asymptotics of x(t; lambda) at fixed scaled time.

The perturbative part is ``sum_k x_k(t) lam**(2k)`` where every ``x_k`` is a
polynomial of degree <= k times ``exp(-G~_0 t)``. Resummed, it is a single
exponential ``r(lam) exp(p(lam) t)`` whose pole ``p`` and residue ``r`` are
obtained here as power series in ``lam**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from numpy.polynomial import Polynomial

from .errors import (
    DegeneratePoleError,
    InsufficientMomentsError,
    KernelDomainError,
)
from .kernels import ExpSumKernel, MomentTable, spectral_density

__all__ = [
    "PolyExp",
    "PoleExpansion",
    "ExponentialPart",
    "AsymptoticGKSL",
    "compositions",
    "wronski_D",
    "perturbative_term",
    "pole_series",
    "residue_series",
    "pole_expansion",
    "single_peak_exponential",
    "x_pert",
    "series_x",
    "asymptotic_gksl",
    "initial_layer_tstar",
    "lorentz_tstar",
]

MAX_ORDER = 16


def _moments_array(moments) -> np.ndarray:
    if isinstance(moments, MomentTable):
        return moments.as_array()
    return np.asarray(moments, dtype=complex)


def _need(G: np.ndarray, k: int):
    if len(G) <= k:
        raise InsufficientMomentsError(
            f"need moments up to order {k}, have {len(G) - 1}"
        )


@dataclass(frozen=True)
class PolyExp:
    """``(sum_j coeffs[j] t**j) * exp(-rate t)``."""

    coeffs: tuple
    rate: complex

    def __post_init__(self):
        c = tuple(complex(v) for v in np.atleast_1d(self.coeffs))
        object.__setattr__(self, "coeffs", c or (0j,))
        object.__setattr__(self, "rate", complex(self.rate))

    @property
    def degree(self) -> int:
        c = np.abs(self.coeffs)
        scale = max(c.max(), 1e-300)
        nz = np.nonzero(c > 1e-13 * scale)[0]
        return int(nz[-1]) if nz.size else 0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        poly = np.polynomial.polynomial.polyval(t, np.array(self.coeffs))
        out = poly * np.exp(-self.rate * t)
        return complex(out) if out.ndim == 0 else out

    def derivative(self) -> "PolyExp":
        c = np.array(self.coeffs)
        dc = np.polynomial.polynomial.polyder(c) if len(c) > 1 else np.zeros(1)
        dc = np.pad(dc, (0, len(c) - len(dc)))
        return PolyExp(tuple(dc - self.rate * c), self.rate)

    def __add__(self, other: "PolyExp") -> "PolyExp":
        if other.rate != self.rate:
            raise ValueError("cannot add PolyExp terms with different rates")
        a, b = np.array(self.coeffs), np.array(other.coeffs)
        n = max(len(a), len(b))
        return PolyExp(tuple(np.pad(a, (0, n - len(a))) + np.pad(b, (0, n - len(b)))), self.rate)

    def scaled(self, c: complex) -> "PolyExp":
        return PolyExp(tuple(complex(c) * np.array(self.coeffs)), self.rate)


@dataclass(frozen=True)
class ExponentialPart:
    """A concrete perturbative part ``r * exp(p t)`` at one coupling."""

    r: complex
    p: complex

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.r * np.exp(self.p * t)
        return complex(out) if out.ndim == 0 else out

    def derivative(self, t):
        return self.p * self(t)


@dataclass(frozen=True)
class PoleExpansion:
    """Series coefficients of the slow pole ``p`` and its residue ``r``.

    ``p(lam) = sum_n p_terms[n] lam**(2n)``, likewise for ``r``.
    """

    p_terms: tuple
    r_terms: Optional[tuple] = None

    @property
    def order(self) -> int:
        return len(self.p_terms) - 1

    def pole(self, lam: float) -> complex:
        return _lam_series(self.p_terms, lam)

    def residue(self, lam: float) -> complex:
        if self.r_terms is None:
            raise ValueError("residue series not computed; call residue_series first")
        return _lam_series(self.r_terms, lam)

    def evaluate(self, lam: float) -> ExponentialPart:
        return ExponentialPart(self.residue(lam), self.pole(lam))


@dataclass(frozen=True)
class AsymptoticGKSL:
    """Constant rates of the asymptotic master equation plus the initial factor."""

    gamma_rate: float
    lamb_shift: float
    r: complex


def _lam_series(terms, lam: float) -> complex:
    z = lam * lam
    return complex(sum(c * z**k for k, c in enumerate(terms)))


@lru_cache(maxsize=None)
def compositions(n: int) -> tuple:
    """All ordered tuples of positive integers summing to ``n`` (2**(n-1) of them)."""
    if n == 0:
        return ((),)
    out = []
    for first in range(1, n + 1):
        for rest in compositions(n - first):
            out.append((first,) + rest)
    return tuple(out)


def wronski_D(moments, k: int) -> Polynomial:
    """Determinant D_k(p) of the banded Hessenberg moment matrix.

    First row ``G~_1 .. G~_k``, sub-diagonal ``G~_0 + p``. Expanding along the
    first row gives ``D_k = sum_j (-1)**(j-1) G~_j (G~_0 + p)**(j-1) D_{k-j}``.
    """
    G = _moments_array(moments)
    if k < 0:
        raise ValueError("k must be >= 0")
    _need(G, k)
    q = Polynomial([G[0], 1.0])
    D = [Polynomial([1.0 + 0j])]
    for m in range(1, k + 1):
        acc = Polynomial([0j])
        for j in range(1, m + 1):
            acc = acc + ((-1) ** (j - 1) * G[j]) * q ** (j - 1) * D[m - j]
        D.append(acc)
    return D[k]


def perturbative_term(moments, k: int) -> PolyExp:
    """``x_k(t) = (-1)**k / k! * D_k(d/dt) d**k/dt**k (t**k exp(-G~_0 t))``."""
    G = _moments_array(moments)
    _need(G, k)
    a = G[0]
    f = PolyExp(tuple([0j] * k + [1.0]), a)
    for _ in range(k):
        f = f.derivative()
    dcoef = wronski_D(G, k).coef
    total = PolyExp((0j,), a)
    term = f
    for i, d in enumerate(dcoef):
        if i:
            term = term.derivative()
        total = total + term.scaled(d)
    return total.scaled((-1) ** k / math.factorial(k))


def pole_series(moments, n: int, max_order: int = MAX_ORDER) -> PoleExpansion:
    """Coefficients of the root of ``p + G~(lam**2 p) = 0`` in powers of lam**2.

    ``p_n = -sum over compositions (i_1..i_k) of n of G~_k p_{i_1-1} ... p_{i_k-1}``
    """
    if n > max_order:
        raise ValueError(f"order {n} exceeds the cap {max_order}")
    G = _moments_array(moments)
    _need(G, n)
    p = [-G[0]]
    for m in range(1, n + 1):
        acc = 0j
        for comp in compositions(m):
            prod = G[len(comp)]
            for i in comp:
                prod *= p[i - 1]
            acc += prod
        p.append(-acc)
    return PoleExpansion(tuple(p))


def residue_series(moments, pole: PoleExpansion, n: Optional[int] = None) -> PoleExpansion:
    """Residue coefficients from ``r = 1 + lam**2 (dp/d lam**2) / p``.

    Matching powers of ``lam**2`` in ``p (r - 1) = sum_n n p_n lam**(2n)`` gives
    ``r_n = (n p_n - sum_{k=1}^{n-1} p_k r_{n-k}) / p_0``.
    """
    n = pole.order if n is None else n
    if n > pole.order:
        raise InsufficientMomentsError(f"pole series only has order {pole.order}")
    p = pole.p_terms
    if p[0] == 0:
        raise DegeneratePoleError("G~_0 = 0: the slow pole is not O(1)")
    r = [1.0 + 0j]
    for m in range(1, n + 1):
        acc = m * p[m] - sum(p[k] * r[m - k] for k in range(1, m))
        r.append(acc / p[0])
    return PoleExpansion(tuple(p[: n + 1]), tuple(r))


def pole_expansion(moments, n: int) -> PoleExpansion:
    """Both series to order ``n``."""
    G = _moments_array(moments)
    if G[0] == 0:
        raise DegeneratePoleError("G~_0 = 0 is outside the supported regime")
    return residue_series(G, pole_series(G, n), n)


def single_peak_exponential(g: float, gamma: float, lam: float) -> ExponentialPart:
    """Closed-form slow pole and residue for one resonant Lorentz peak."""
    import cmath

    h = gamma / 2
    D = cmath.sqrt(h * h - (lam * g) ** 2)
    if D == 0:
        raise DegeneratePoleError("critical coupling: the two poles coincide")
    return ExponentialPart((h + D) / (2 * D), -(h - D) / lam**2)


def _as_exponential(expansion, lam) -> ExponentialPart:
    if isinstance(expansion, ExponentialPart):
        return expansion
    return expansion.evaluate(lam)


def x_pert(expansion: Union[PoleExpansion, ExponentialPart], lam: float, t):
    """``r(lam) exp(p(lam) t)``; at t = +0 this is the corrected initial value."""
    return _as_exponential(expansion, lam)(t)


def series_x(moments, n: int, lam: float, t):
    """Truncated sum ``sum_{k<=n} x_k(t) lam**(2k)``."""
    t = np.asarray(t, dtype=float)
    total = np.zeros(t.shape, dtype=complex)
    for k in range(n + 1):
        total = total + perturbative_term(moments, k)(t) * lam ** (2 * k)
    return complex(total) if total.ndim == 0 else total


def asymptotic_gksl(expansion, lam: float) -> AsymptoticGKSL:
    e = _as_exponential(expansion, lam)
    return AsymptoticGKSL(-2 * e.p.real, -e.p.imag, e.r)


def initial_layer_tstar(expansion, lam: float, mode: str = "exact") -> Optional[float]:
    """Time at which the perturbative density matrix becomes a valid state.

    ``exact``: ``-ln|r| / Re p``. ``asymptotic``: ``-lam**2 Re G~_1 / Re G~_0``
    read off the series (``p_0 = -G~_0``, ``r_1 = -G~_1``). Returns ``None``
    when ``|r(lam)| <= 1``, i.e. the perturbative part is physical throughout.
    """
    if mode not in ("exact", "asymptotic"):
        raise ValueError(f"unknown mode {mode!r}")
    e = _as_exponential(expansion, lam)
    if abs(e.r) <= 1:
        return None
    if mode == "exact":
        if e.p.real == 0:
            raise KernelDomainError("Re p = 0 with |r| > 1: no finite t*")
        return -math.log(abs(e.r)) / e.p.real
    if isinstance(expansion, ExponentialPart) or expansion.order < 1:
        raise ValueError("asymptotic t* needs a series expansion of order >= 1")
    re_g0 = -expansion.p_terms[0].real
    re_g1 = -expansion.r_terms[1].real
    if re_g0 == 0:
        raise KernelDomainError("Re G~_0 = 0: asymptotic t* undefined")
    return -lam**2 * re_g1 / re_g0


def lorentz_tstar(kernel: ExpSumKernel, lam: float) -> float:
    """Peak-weighted estimate ``lam**2 sum_l (J_l/J)(1/gamma_l)(gamma_l**2 - dw_l**2)/(gamma_l**2 + dw_l**2)``.

    All spectral densities are taken at the system frequency (zero detuning).
    """
    Jl = spectral_density(kernel, 0.0, per_mode=True)
    J = Jl.sum()
    acc = 0.0
    for m, j in zip(kernel.modes, Jl):
        acc += (j / J) / m.gamma * (m.gamma**2 - m.dw**2) / (m.gamma**2 + m.dw**2)
    return lam**2 * float(acc)
