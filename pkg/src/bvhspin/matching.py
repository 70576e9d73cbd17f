"""Short-time Dyson expansion, overlap terms and the uniform matched expansion."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegeneratePoleError
from .kernels import ExpSumKernel, Kernel, MomentTable, moments as kernel_moments
from .perturbation import ExponentialPart, PoleExpansion, series_x, x_pert
from .volterra import _cumulative_kernel

__all__ = [
    "PowerTable",
    "power_table",
    "short_time_x",
    "overlap_x",
    "uniform_x",
]


@dataclass(frozen=True)
class PowerTable:
    """``table[k, m]`` is the p**m coefficient of ``G~(p)**k`` (m <= k)."""

    table: np.ndarray

    @property
    def order(self) -> int:
        return self.table.shape[0] - 1

    def __getitem__(self, km):
        k, m = km
        if m > k:
            raise IndexError("only m <= k is stored")
        return self.table[k, m]


def power_table(moments, n: int) -> PowerTable:
    """Powers of the moment series via ``G_{k,m} = sum_j (jk - m + j) G_j G_{k,m-j} / (m G_0)``."""
    G = moments.as_array() if isinstance(moments, MomentTable) else np.asarray(moments, complex)
    if len(G) <= n:
        from .errors import InsufficientMomentsError

        raise InsufficientMomentsError(f"need moments up to order {n}")
    if G[0] == 0:
        raise DegeneratePoleError("power recurrence divides by G~_0 = 0")
    T = np.zeros((n + 1, n + 1), dtype=complex)
    for k in range(n + 1):
        T[k, 0] = G[0] ** k
        for m in range(1, k + 1):
            acc = sum((j * k - m + j) * G[j] * T[k, m - j] for j in range(1, m + 1))
            T[k, m] = acc / (m * G[0])
    return PowerTable(T)


class _PartialFractions:
    """Sum of ``c / (p + rate)**m`` kept as ``{rate: [c_1, c_2, ...]}``."""

    def __init__(self, terms=None):
        self.terms = terms or {}

    @classmethod
    def pole(cls, rate, power=1, coeff=1.0):
        c = [0j] * power
        c[-1] = complex(coeff)
        return cls({complex(rate): c})

    def _add_term(self, rate, m, c):
        arr = self.terms.setdefault(rate, [])
        if len(arr) < m:
            arr.extend([0j] * (m - len(arr)))
        arr[m - 1] += c

    def __add__(self, other):
        out = _PartialFractions({r: list(c) for r, c in self.terms.items()})
        for r, cs in other.terms.items():
            for m, c in enumerate(cs, 1):
                out._add_term(r, m, c)
        return out

    def __mul__(self, other):
        out = _PartialFractions()
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                for m, x in enumerate(ca, 1):
                    if x == 0:
                        continue
                    for n, y in enumerate(cb, 1):
                        if y == 0:
                            continue
                        xy = x * y
                        if a == b:
                            out._add_term(a, m + n, xy)
                            continue
                        d = b - a
                        for i in range(1, m + 1):
                            A = (-1) ** (m - i) * math.comb(m + n - i - 1, n - 1) / d ** (m + n - i)
                            out._add_term(a, i, xy * A)
                        for j in range(1, n + 1):
                            B = (-1) ** (n - j) * math.comb(m + n - j - 1, m - 1) / (-d) ** (m + n - j)
                            out._add_term(b, j, xy * B)
        return out

    def inverse(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for r, cs in self.terms.items():
            e = np.exp(-r * t)
            for m, c in enumerate(cs, 1):
                if c != 0:
                    out = out + c * t ** (m - 1) / math.factorial(m - 1) * e
        return out


def _dyson_closed(kernel: ExpSumKernel, lam: float, t, n: int):
    # Laplace image of the k-th iterate: (-1)**k p**-(k+1) G~(lam**2 p)**k
    S = _PartialFractions()
    for w, nu in kernel.merged_poles():
        S = S + _PartialFractions.pole(nu / lam**2, 1, w / lam**2)
    total = _PartialFractions.pole(0.0, 1, 1.0)
    Sk = None
    for k in range(1, n + 1):
        Sk = S if Sk is None else Sk * S
        term = _PartialFractions.pole(0.0, k + 1, (-1) ** k) * Sk
        total = total + term
    return total.inverse(t)


def _dyson_grid(kernel: Kernel, lam: float, grid: np.ndarray, n: int):
    h = grid[1] - grid[0] if grid.size > 1 else 0.0
    K = _cumulative_kernel(kernel, lam, grid)
    y = np.ones(grid.size, dtype=complex)
    total = y.copy()
    for k in range(1, n + 1):
        z = np.zeros_like(y)
        for i in range(1, grid.size):
            z[i] = h * (0.5 * K[i] * y[0] + np.dot(K[i - 1 : 0 : -1], y[1:i]))
        y = z
        total = total + (-1) ** k * y
    return total


def short_time_x(kernel: Kernel, lam: float, t, order: int, n_steps: int = 400):
    """n-th Dyson iterate of ``x = 1 - int int lam**-2 G(..) x``.

    Exponential-sum kernels are handled exactly in the Laplace domain. Other
    kernels use the trapezoidal product rule: a scalar ``t`` is resolved
    with ``n_steps`` cells, an array must be a uniform grid starting at 0.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    if isinstance(kernel, ExpSumKernel):
        out = _dyson_closed(kernel, lam, t, order)
        return complex(out) if np.ndim(out) == 0 else out
    arr = np.asarray(t, dtype=float)
    if arr.ndim == 0:
        grid = np.linspace(0.0, float(arr), n_steps + 1)
        return complex(_dyson_grid(kernel, lam, grid, order)[-1])
    if arr[0] != 0 or (arr.size > 2 and np.ptp(np.diff(arr)) > 1e-9 * arr[-1]):
        raise ValueError("array input must be a uniform grid starting at 0")
    return _dyson_grid(kernel, lam, arr, order)


def overlap_x(moments, lam: float, t, order: int):
    """``sum_{k<=n} sum_{m<=k} (-1)**k G_{k,m} t**(k-m)/(k-m)! lam**(2m)``."""
    P = power_table(moments, order)
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for k in range(order + 1):
        for m in range(k + 1):
            out = out + (-1) ** k * P[k, m] * t ** (k - m) / math.factorial(k - m) * lam ** (2 * m)
    return complex(out) if out.ndim == 0 else out


def uniform_x(
    kernel: Kernel,
    expansion: Optional[PoleExpansion],
    lam: float,
    t,
    order: int,
):
    """Matched expansion ``short-time + perturbative - overlap``.

    With ``expansion=None`` the perturbative piece is the truncated power
    series; otherwise the exponential form built from ``expansion``, whose
    order must equal ``order``.
    """
    if isinstance(expansion, ExponentialPart):
        raise ValueError("uniform_x needs an order-truncated expansion, not a closed form")
    if expansion is not None and expansion.order != order:
        raise ValueError(
            f"order mismatch: expansion has order {expansion.order}, requested {order}"
        )
    M = kernel_moments(kernel, order)
    corr = short_time_x(kernel, lam, t, order)
    if expansion is None:
        pert = series_x(M, order, lam, t)
    else:
        pert = x_pert(expansion, lam, t)
    return corr + pert - overlap_x(M, lam, t, order)
