"""Scenario files and the command-line front end.

A scenario is a TOML document::

    [kernel]
    modes = [{g = 0.4, gamma = 1.0, dw = 0.0}]   # or: type = "appendixG", chi, g, gamma

    [grid]
    t_max = 8.0
    n_points = 801

    [run]
    lambda = 1.0                 # or a list for a sweep
    orders = [1]
    outputs = ["exact", "pert"]
    pert_form = "series"         # or "closed" (single resonant peak only)

    [rho0]
    p11 = 1.0
    c10 = [0.0, 0.0]             # real, imaginary

Each requested curve family becomes one CSV; ``manifest.txt`` records every
parameter and derived constant.
"""
from __future__ import annotations

import argparse
import io
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from . import matching, nonuniversal, perturbation, volterra
from .dynamics import QubitDensity, corr_exact, corr_markov, generator_rates
from .errors import BVHError, ConfigError
from .kernels import ExpSumKernel, Kernel, LorentzMode, moments, spectral_density
from .nonuniversal import AppendixGKernel

__all__ = ["Scenario", "load_scenario", "parse_scenario", "run", "report_constants", "main"]

OUTPUTS = (
    "exact",
    "pert",
    "pert-uncorrected",
    "pert-series",
    "wclt",
    "uniform",
    "overlap",
    "short-time",
    "born",
    "tcl2",
    "tcl4",
    "gamma-rate",
    "tstar",
    "correlations",
)
SINGLE_PEAK_ONLY = {"born", "tcl2", "tcl4"}
MOMENT_BASED = {"pert", "pert-uncorrected", "pert-series", "uniform", "overlap", "short-time"}
FMT = "%.17g"


@dataclass(frozen=True)
class Scenario:
    kernel: Kernel
    lambdas: tuple
    t_max: float
    n_points: int
    outputs: tuple
    orders: tuple = (1,)
    rho0: QubitDensity = QubitDensity(1.0, 0j)
    pert_form: str = "series"
    corr_t1: tuple = (0.0,)
    name: str = "scenario"

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_points)

    @property
    def single_peak(self) -> Optional[LorentzMode]:
        k = self.kernel
        if isinstance(k, ExpSumKernel) and len(k.modes) == 1:
            return k.modes[0]
        return None


def _field(d: dict, key: str, ctx: str, kind=None, default=...):
    if key not in d:
        if default is ...:
            raise ConfigError(f"[{ctx}] missing required field '{key}'")
        return default
    v = d[key]
    if kind is not None and not isinstance(v, kind):
        raise ConfigError(f"[{ctx}] field '{key}' has wrong type {type(v).__name__}")
    return v


def _parse_kernel(d: dict) -> Kernel:
    if d.get("type", "lorentz") == "appendixG":
        args = [float(_field(d, key, "kernel")) for key in ("chi", "g", "gamma")]
        try:
            return AppendixGKernel(*args)
        except BVHError as exc:
            raise ConfigError(f"[kernel] {exc}") from exc
    if d.get("type", "lorentz") != "lorentz":
        raise ConfigError(f"[kernel] unknown type {d.get('type')!r}")
    modes = _field(d, "modes", "kernel", list)
    out = []
    for i, m in enumerate(modes):
        ctx = f"kernel.modes[{i}]"
        if not isinstance(m, dict):
            raise ConfigError(f"[{ctx}] each mode must be a table")
        g, gamma = float(_field(m, "g", ctx)), float(_field(m, "gamma", ctx))
        try:
            out.append(LorentzMode(g, gamma, float(m.get("dw", 0.0))))
        except BVHError as exc:
            raise ConfigError(f"[{ctx}] {exc}") from exc
    if not out:
        raise ConfigError("[kernel] modes must not be empty")
    return ExpSumKernel(tuple(out))


def parse_scenario(doc: dict, name: str = "scenario") -> Scenario:
    kernel = _parse_kernel(_field(doc, "kernel", "root", dict))
    grid = _field(doc, "grid", "root", dict)
    t_max = float(_field(grid, "t_max", "grid"))
    n_points = int(_field(grid, "n_points", "grid", int))
    if not t_max > 0:
        raise ConfigError("[grid] t_max must be > 0")
    if n_points < 2:
        raise ConfigError("[grid] n_points must be >= 2")

    runs = _field(doc, "run", "root", dict)
    lam = _field(runs, "lambda", "run")
    lambdas = tuple(float(v) for v in (lam if isinstance(lam, list) else [lam]))
    if not lambdas or any(not v > 0 for v in lambdas):
        raise ConfigError("[run] lambda values must be positive")
    outputs = tuple(_field(runs, "outputs", "run", list))
    if not outputs:
        raise ConfigError("[run] at least one output must be requested")
    for o in outputs:
        if o not in OUTPUTS:
            raise ConfigError(f"[run] unknown output {o!r}; choose from {', '.join(OUTPUTS)}")
    orders = tuple(int(v) for v in runs.get("orders", [1]))
    if any(n < 0 or n > perturbation.MAX_ORDER for n in orders):
        raise ConfigError(f"[run] orders must lie in 0..{perturbation.MAX_ORDER}")
    pert_form = runs.get("pert_form", "series")
    if pert_form not in ("series", "closed"):
        raise ConfigError("[run] pert_form must be 'series' or 'closed'")
    corr_t1 = tuple(float(v) for v in runs.get("corr_t1", [0.0]))

    r0 = doc.get("rho0", {})
    c10 = r0.get("c10", [0.0, 0.0])
    if not (isinstance(c10, list) and len(c10) == 2):
        raise ConfigError("[rho0] c10 must be [re, im]")
    rho0 = QubitDensity(float(r0.get("p11", 1.0)), complex(c10[0], c10[1]))
    if not rho0.is_physical:
        raise ConfigError("[rho0] initial state is not a density matrix")

    sc = Scenario(kernel, lambdas, t_max, n_points, outputs, orders, rho0, pert_form, corr_t1, name)
    _validate_combination(sc)
    return sc


def _validate_combination(sc: Scenario):
    peak = sc.single_peak
    resonant = peak is not None and peak.dw == 0.0
    wanted = set(sc.outputs)
    if wanted & SINGLE_PEAK_ONLY and not resonant:
        raise ConfigError(
            f"[run] outputs {sorted(wanted & SINGLE_PEAK_ONLY)} need a single resonant peak"
        )
    if sc.pert_form == "closed" and not resonant:
        raise ConfigError("[run] pert_form = 'closed' needs a single resonant peak")
    if isinstance(sc.kernel, AppendixGKernel):
        bad = wanted - {"exact", "pert", "wclt", "gamma-rate", "correlations"}
        if bad:
            raise ConfigError(f"[run] outputs {sorted(bad)} need finite higher moments")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_scenario(doc, path.stem)


def load_preset(name: str) -> Scenario:
    try:
        text = resources.files("bvhspin.presets").joinpath(f"{name}.toml").read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"unknown preset {name!r}") from exc
    return parse_scenario(tomli.loads(text), name)


# --------------------------------------------------------------------------
# computation


def _exact_trajectory(sc: Scenario, lam: float) -> volterra.Trajectory:
    peak = sc.single_peak
    if peak is not None and peak.dw == 0.0:
        return volterra.single_peak_trajectory(peak.g, peak.gamma, lam, sc.grid)
    if isinstance(sc.kernel, ExpSumKernel):
        return volterra.solve_expsum(sc.kernel, lam, sc.grid)
    return volterra.solve_generic(sc.kernel, lam, sc.grid)


def _constants(sc: Scenario, lam: float) -> dict:
    """Derived numbers for one coupling, keyed for the manifest."""
    out = {}
    k = sc.kernel
    if isinstance(k, AppendixGKernel):
        out["G_0"] = k.g0
        out["G_1"] = "divergent"
        return out
    nmax = max(sc.orders)
    M = moments(k, nmax)
    for i, g in enumerate(M.moments):
        out[f"G_{i}"] = g
    exp = perturbation.pole_expansion(M, nmax)
    for i, (p, r) in enumerate(zip(exp.p_terms, exp.r_terms)):
        out[f"p_{i}"] = p
        out[f"r_{i}"] = r
    part = _pert_part(sc, lam, nmax)
    g = perturbation.asymptotic_gksl(part, lam)
    out["pert_p"] = part.p
    out["pert_r"] = part.r
    out["Gamma_pert"] = g.gamma_rate
    out["DeltaOmega_pert"] = g.lamb_shift
    # the asymptotic estimate is reported even when |r| <= 1 so that a zero
    # numerator shows up as 0 rather than as "none"
    G = M.as_array()
    ta = -lam**2 * G[1].real / G[0].real if nmax >= 1 and G[0].real != 0 else None
    te = perturbation.initial_layer_tstar(part, lam, "exact")
    out["tstar_asymptotic"] = "none" if ta is None else ta + 0.0
    out["tstar_exact"] = "none" if te is None else te
    if isinstance(k, ExpSumKernel):
        out["tstar_lorentz"] = perturbation.lorentz_tstar(k, lam)
        out["J_at_Omega"] = spectral_density(k, 0.0)
    return out


def _pert_part(sc: Scenario, lam: float, n: int) -> perturbation.ExponentialPart:
    if sc.pert_form == "closed":
        peak = sc.single_peak
        return perturbation.single_peak_exponential(peak.g, peak.gamma, lam)
    return perturbation.pole_expansion(moments(sc.kernel, n), n).evaluate(lam)


def _time_column(sc: Scenario, lam: float):
    peak = sc.single_peak
    if peak is not None:
        return "gamma_t", peak.gamma * sc.grid / lam**2
    return "t", sc.grid


def _curve_rows(tcol, x, rho0: QubitDensity, rho11=None):
    x = np.asarray(x, dtype=complex)
    p11 = np.abs(x) ** 2 * rho0.p11 if rho11 is None else np.asarray(rho11) * rho0.p11
    coh = np.abs(x * rho0.c10) ** 2
    valid = (p11 <= 1 + 1e-12) & (coh <= p11 * (1 - p11) + 1e-12)
    return ["value_re", "value_im", "rho11", "validity_flag"], np.column_stack(
        [tcol, x.real, x.imag, p11, valid.astype(float)]
    )


def _tables_for_lambda(sc: Scenario, lam: float) -> list:
    """``[(basename, header, rows)]`` for one coupling."""
    tname, tcol = _time_column(sc, lam)
    grid = sc.grid
    tables = []
    wanted = sc.outputs
    multi_order = len(sc.orders) > 1 or any(
        o in wanted for o in ("pert-series", "uniform", "overlap", "short-time")
    )

    def add(base, header, rows):
        tables.append((base, [tname] + header, rows))

    exact = None
    if {"exact", "gamma-rate", "correlations"} & set(wanted):
        exact = _exact_trajectory(sc, lam)
    if "exact" in wanted:
        add("exact", *_curve_rows(tcol, exact.values, sc.rho0))

    k = sc.kernel
    if isinstance(k, AppendixGKernel):
        if "pert" in wanted:
            x = nonuniversal.appg_x0(k, grid) + lam * nonuniversal.appg_x_half(k, grid)
            add("pert", *_curve_rows(tcol, x, sc.rho0))
        if "wclt" in wanted:
            add("wclt", *_curve_rows(tcol, nonuniversal.appg_x0(k, grid), sc.rho0))
    else:
        if "wclt" in wanted:
            g0 = moments(k, 0)[0]
            add("wclt", *_curve_rows(tcol, np.exp(-g0 * grid), sc.rho0))
        for n in sc.orders:
            suffix = f"_n{n}" if (sc.pert_form == "series" and multi_order) else ""
            part = _pert_part(sc, lam, n)
            if "pert" in wanted:
                add("pert" + suffix, *_curve_rows(tcol, part(grid), sc.rho0))
            if "pert-uncorrected" in wanted:
                x = np.exp(part.p * grid)
                add("pert-uncorrected" + suffix, *_curve_rows(tcol, x, sc.rho0))
            M = moments(k, n) if set(wanted) & MOMENT_BASED else None
            if "pert-series" in wanted:
                x = perturbation.series_x(M, n, lam, grid)
                add(f"pert-series_n{n}", *_curve_rows(tcol, x, sc.rho0))
            if "uniform" in wanted:
                x = matching.uniform_x(k, None, lam, grid, n)
                add(f"uniform_n{n}", *_curve_rows(tcol, x, sc.rho0))
            if "overlap" in wanted:
                x = matching.overlap_x(M, lam, grid, n)
                add(f"overlap_n{n}", *_curve_rows(tcol, x, sc.rho0))
            if "short-time" in wanted:
                x = matching.short_time_x(k, lam, grid, n)
                add(f"short-time_n{n}", *_curve_rows(tcol, x, sc.rho0))
            if sc.pert_form == "closed":
                break

    peak = sc.single_peak
    if "born" in wanted:
        x = volterra.closed_form_single_peak(peak.g, peak.gamma, lam, grid)
        xp = volterra.born_x_prime(peak.g, peak.gamma, lam, grid)
        add("born", *_curve_rows(tcol, x, sc.rho0, rho11=xp))
    for order in (2, 4):
        if f"tcl{order}" in wanted:
            tr = volterra.tcl_x(order, peak.g, peak.gamma, lam, grid)
            add(f"tcl{order}", *_curve_rows(tcol, tr.values, sc.rho0))

    if "gamma-rate" in wanted:
        rates = generator_rates(exact.values, exact.derivative())
        add("gamma-rate", ["gamma", "delta_omega"], np.column_stack([tcol, rates.gamma_t, rates.delta_omega_t]))

    if "correlations" in wanted:
        rows = []
        r = None
        if not isinstance(k, AppendixGKernel):
            r = _pert_part(sc, lam, max(sc.orders)).r
        for t1 in sc.corr_t1:
            t2 = grid[grid >= t1]
            t2 = t2[t2 - t1 <= grid[-1]]
            ce = np.atleast_1d(corr_exact(exact, t1, t2))
            cm = np.atleast_1d(corr_markov(exact, t1, t2))
            cr = ce / r if r is not None else np.full_like(ce, np.nan)
            for a, b, c, d in zip(t2, ce, cm, cr):
                rows.append([t1, a, b.real, b.imag, c.real, c.imag, d.real, d.imag])
        tables.append(
            (
                "correlations",
                ["t1", "t2", "exact_re", "exact_im", "markov_re", "markov_im", "renorm_re", "renorm_im"],
                np.array(rows, dtype=float).reshape(-1, 8),
            )
        )

    if "tstar" in wanted and not isinstance(k, AppendixGKernel):
        c = _constants(sc, lam)
        rows = []
        for key, mode in (("tstar_asymptotic", 0.0), ("tstar_exact", 1.0), ("tstar_lorentz", 2.0)):
            v = c.get(key, "none")
            rows.append([mode, math.nan if v == "none" else float(v)])
        tables.append(("tstar", ["mode", "value"], np.array(rows)))
    return tables


def _fmt(v) -> str:
    if isinstance(v, complex) or isinstance(v, np.complexfloating):
        v = complex(v)
        return f"{FMT % (v.real + 0.0)} {FMT % (v.imag + 0.0)}"
    if isinstance(v, (float, np.floating, int)):
        return FMT % (v + 0.0)
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        # adding 0.0 turns -0 into 0 so signs of zero never differ between runs
        buf.write(",".join(FMT % (v + 0.0) for v in row) + "\n")
    return buf.getvalue()


def _manifest(sc: Scenario, per_lambda: dict) -> list:
    lines = [("scenario", sc.name)]
    k = sc.kernel
    if isinstance(k, AppendixGKernel):
        lines += [("kernel.type", "appendixG"), ("kernel.chi", k.chi), ("kernel.g", k.g), ("kernel.gamma", k.gamma)]
    else:
        lines.append(("kernel.type", "lorentz"))
        for i, m in enumerate(k.modes):
            lines += [(f"kernel.mode{i}.g", m.g), (f"kernel.mode{i}.gamma", m.gamma), (f"kernel.mode{i}.dw", m.dw)]
    lines += [
        ("grid.t_max", sc.t_max),
        ("grid.n_points", sc.n_points),
        ("run.lambda", " ".join(FMT % v for v in sc.lambdas)),
        ("run.orders", " ".join(str(n) for n in sc.orders)),
        ("run.outputs", " ".join(sc.outputs)),
        ("run.pert_form", sc.pert_form),
        ("run.corr_t1", " ".join(FMT % v for v in sc.corr_t1)),
        ("rho0.p11", sc.rho0.p11),
        ("rho0.c10", sc.rho0.c10),
        ("solver.rtol", volterra.RTOL),
        ("solver.atol", volterra.ATOL),
        ("format", "%.17g; complex values as 're im'"),
    ]
    for lam in sc.lambdas:
        for key, v in per_lambda[lam].items():
            lines.append((f"lambda[{lam!r}].{key}", v))
    return [f"{k}={_fmt(v)}" for k, v in lines]


def report_constants(sc: Scenario) -> str:
    """Manifest text with derived constants only; no trajectories are computed."""
    per = {lam: _constants(sc, lam) for lam in sc.lambdas}
    return "\n".join(_manifest(sc, per)) + "\n"


def run(sc: Scenario, out_dir=None, workers: int = 4) -> dict:
    """Compute every requested curve; write CSVs and ``manifest.txt`` if ``out_dir`` is given.

    Returns ``{filename: csv_text}`` including the manifest.
    """
    with ThreadPoolExecutor(max_workers=max(1, min(workers, len(sc.lambdas)))) as pool:
        results = list(pool.map(lambda lam: _tables_for_lambda(sc, lam), sc.lambdas))
        consts = list(pool.map(lambda lam: _constants(sc, lam), sc.lambdas))
    files = {}
    sweep = len(sc.lambdas) > 1
    for lam, tables in zip(sc.lambdas, results):
        for base, header, rows in tables:
            name = f"{base}_lam{lam!r}.csv" if sweep else f"{base}.csv"
            files[name] = _csv_text(header, rows)
    files["manifest.txt"] = "\n".join(_manifest(sc, dict(zip(sc.lambdas, consts)))) + "\n"
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            with open(out / name, "w", newline="\n") as fh:
                fh.write(text)
    return files


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bvhspin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default="out")
    p_const = sub.add_parser("constants", help="print derived constants")
    p_const.add_argument("scenario")
    p_pre = sub.add_parser("preset", help="run a shipped preset")
    p_pre.add_argument("name", choices=["figure1", "figure2"])
    p_pre.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    try:
        if args.cmd == "run":
            run(load_scenario(args.scenario), args.out)
            print(f"wrote results to {args.out}")
        elif args.cmd == "constants":
            sys.stdout.write(report_constants(load_scenario(args.scenario)))
        else:
            out = args.out or args.name
            run(load_preset(args.name), out)
            print(f"wrote results to {out}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (BVHError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
