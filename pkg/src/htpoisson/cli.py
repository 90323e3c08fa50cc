"""Command-line entry point: threshold queries, single values and CSV sweeps.

Sub-commands::

    htpoisson thresholds --law "lomax(alpha=2.5)" --rho 0.9 --k 1.5 --kstar 2.5
    htpoisson exact      --law ... --rho 0.9 --x 10 50 100
    htpoisson simulate   --law ... --rho 0.8 --reps 100000 --seed 1 --x 5 20
    htpoisson bmax       --law ... --rho 0.8 --x 1 5 10
    htpoisson run        experiment.ini

An experiment file is flat ``key = value`` text in bracketed sections::

    [experiment]
    law = lomax(alpha=2.5)
    rho = 0.8, 0.9, 0.95
    seed = 7
    output = results            ; relative to $HTPOISSON_OUTPUT_DIR or the cwd

    [engine]
    h = 0.01

    [simulation]
    replications = 100000

    [sweep local]
    quantity = local            ; local | sup | mtau | bmax | tau | kingman | passage
    x = threshold x_rho k=1.5 n=20 span=5

``x`` is ``abs 1, 2, 5`` (levels), ``scaled 0.5, 1, 2`` (units of
``1 / (1 - rho)``, or of ``1 / (1 - rho)^2`` for ``tau``) or
``threshold NAME [k=..] [kstar=..] [n=..] [span=..]`` (``n`` log-spaced levels
on ``[t, span * t]``; ``span=1`` gives the threshold alone).  A sweep of
``quantity = thresholds`` writes the threshold table instead.
"""
from __future__ import annotations

import argparse
import configparser
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from . import pk_engine as pk
from .bmax import bmax_curve, solve_bmax_tail
from .distributions import parse_law
from .simulator import (Estimate, Exceeds, Passed, SimConfig, Value, ZeroSupportError, estimate_m_infinity,
                        estimate_many, write_functionals_csv)

OUTPUT_ENV = "HTPOISSON_OUTPUT_DIR"
QUANTITIES = ("local", "sup", "mtau", "bmax", "tau", "kingman", "passage", "thresholds")
SWEEP_COLUMNS = ["rho", "x", "exact", "asymptotic", "simulated", "ci_half_width",
                 "ratio_exact_asym", "ratio_sim_asym"]
THRESHOLD_COLUMNS = ["rho", "x_rho", "x_tilde", "x_rho_star", "a_rho_star"]


class SpecError(ValueError):
    """Malformed experiment file; the message carries the offending line."""


def fmt(v) -> str:
    """Deterministic cell text; empty for a missing source."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def write_rows(path: Path | None, header, rows, stream=None) -> None:
    text = ",".join(header) + "\n" + "".join(",".join(fmt(c) for c in r) + "\n" for r in rows)
    if path is None:
        (stream or sys.stdout).write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _ratio(a, b):
    if a is None or b is None or b == 0:
        return None
    return a / b


# ---------------------------------------------------------------- experiment files

@dataclass
class Sweep:
    name: str
    quantity: str
    mode: str
    values: list = field(default_factory=list)
    threshold: str = ""
    k: float = 1.5
    k_star: float = 2.5
    n: int = 20
    span: float = 5.0
    window: float = 1.0
    y: float = 1.0


@dataclass
class ExperimentSpec:
    law: str
    rhos: list
    seed: int
    output: Path
    h: float
    x_max: float | None
    replications: int
    workers: int
    sweeps: list


def _line_index(text: str) -> dict:
    """``(section, key) -> line number`` for error messages."""
    where, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";")[0].split("#")[0].strip()
        m = re.match(r"^\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = no
        elif "=" in line and section is not None:
            where[(section, line.split("=", 1)[0].strip().lower())] = no
    return where


def parse_spec(path: str | os.PathLike) -> ExperimentSpec:
    text = Path(path).read_text()
    where = _line_index(text)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise SpecError(f"{path}: {exc}") from exc

    def fail(section, key, msg):
        no = where.get((section, key), where.get((section, None), "?"))
        raise SpecError(f"{path}, line {no}: [{section}] {key}: {msg}")

    def get(section, key, conv, default=...):
        if not cp.has_option(section, key):
            if default is ...:
                fail(section, key, "missing")
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            fail(section, key, str(exc))

    def floats(raw):
        return [float(v) for v in re.split(r"[,\s]+", raw.strip()) if v]

    if not cp.has_section("experiment"):
        raise SpecError(f"{path}, line 1: missing [experiment] section")
    law = get("experiment", "law", str)
    try:
        parse_law(law)
    except ValueError as exc:
        fail("experiment", "law", str(exc))
    rhos = get("experiment", "rho", floats)
    for r in rhos:
        if not 0 < r < 1:
            fail("experiment", "rho", f"rho must lie in (0, 1) (got {r})")
    base = Path(os.environ.get(OUTPUT_ENV, "."))
    out = get("experiment", "output", str, "results")
    sweeps = []
    for section in cp.sections():
        if not section.startswith("sweep"):
            continue
        name = section[5:].strip() or "sweep"
        q = get(section, "quantity", str).strip()
        if q not in QUANTITIES:
            fail(section, "quantity", f"unknown quantity {q!r}; choose from {', '.join(QUANTITIES)}")
        sw = Sweep(name, q, "none")
        if q != "thresholds":
            sw = _parse_x(get(section, "x", str), sw, lambda msg, s=section: fail(s, "x", msg))
        sw.window = get(section, "window", float, 1.0)
        sw.y = get(section, "y", float, 1.0)
        if q == "thresholds":
            sw.k = get(section, "k", float, 1.5)
            sw.k_star = get(section, "kstar", float, 2.5)
        sweeps.append(sw)
    if not sweeps:
        raise SpecError(f"{path}: no [sweep ...] sections")
    return ExperimentSpec(
        law=law, rhos=rhos,
        seed=get("experiment", "seed", int, 0),
        output=base / out,
        h=get("engine", "h", float, 0.01) if cp.has_section("engine") else 0.01,
        x_max=get("engine", "x_max", float, None) if cp.has_section("engine") else None,
        replications=get("simulation", "replications", int, 0) if cp.has_section("simulation") else 0,
        workers=get("simulation", "workers", int, 1) if cp.has_section("simulation") else 1,
        sweeps=sweeps,
    )


def _parse_x(raw: str, sw: Sweep, fail) -> Sweep:
    parts = raw.split(None, 1)
    if not parts:
        fail("empty level specification")
    mode = parts[0].lower()
    rest = parts[1] if len(parts) > 1 else ""
    if mode in ("abs", "scaled"):
        try:
            sw.values = [float(v) for v in re.split(r"[,\s]+", rest.strip()) if v]
        except ValueError as exc:
            fail(str(exc))
        if not sw.values:
            fail("no levels given")
    elif mode == "threshold":
        toks = rest.split()
        if not toks or toks[0] not in ("x_rho", "x_tilde", "x_rho_star", "a_rho_star"):
            fail("threshold name must be one of x_rho, x_tilde, x_rho_star, a_rho_star")
        sw.threshold = toks[0]
        for tok in toks[1:]:
            key, _, val = tok.partition("=")
            try:
                if key == "k":
                    sw.k = float(val)
                elif key == "kstar":
                    sw.k_star = float(val)
                elif key == "n":
                    sw.n = int(val)
                elif key == "span":
                    sw.span = float(val)
                else:
                    fail(f"unknown threshold option {key!r}")
            except ValueError as exc:
                fail(str(exc))
    else:
        fail(f"level mode must be abs, scaled or threshold (got {mode!r})")
    sw.mode = mode
    return sw


def _levels(sw: Sweep, params: pk.ModelParams) -> np.ndarray:
    rho = params.rho
    if sw.mode == "abs":
        return np.asarray(sw.values, dtype=float)
    if sw.mode == "scaled":
        unit = 1.0 if sw.quantity == "kingman" else (1.0 - rho) ** (2 if sw.quantity == "tau" else 1)
        return np.asarray(sw.values, dtype=float) / unit
    t = getattr(asy.thresholds(params, sw.k, sw.k_star), sw.threshold)
    return np.geomspace(t, sw.span * t, sw.n) if sw.span != 1 else np.array([t])


# ---------------------------------------------------------------- evaluation

def _table(params, h, top, x_max=None):
    need = max(top, 10.0 / params.drift_gap if params.rho >= 0.95 else 0.0)
    return pk.build_stationary(params, h, x_max if x_max is not None and x_max >= need else need, tol=1e-4)


def sweep_rows(sw: Sweep, params: pk.ModelParams, h: float, reps: int, seed: int, workers: int = 1,
               x_max: float | None = None) -> list:
    rho = params.rho
    xs = _levels(sw, params)
    q = sw.quantity
    exact = [None] * xs.size
    asym = [None] * xs.size
    sim: list[Estimate | None] = [None] * xs.size
    if q in ("local", "sup", "mtau", "kingman", "passage", "tau"):
        if q == "tau":
            top = (1.0 - rho) * xs.max() + 2 * h + 1.0
        elif q == "kingman":
            top = xs.max() / (1.0 - rho) + 1.0
        else:
            top = xs.max() + sw.window + 2 * h + 1.0
        table = _table(params, h, top, x_max)
    cfg = SimConfig(params, reps, seed, workers=workers) if reps >= 2 else None
    for i, x in enumerate(xs):
        if q == "local":
            exact[i] = pk.stationary_local(table, x, sw.window)
            asym[i] = asy.approx_supremum_local(params, x, sw.window)
        elif q == "sup":
            exact[i] = table.sf_at(x)
            asym[i] = asy.classical_global(params, x)
        elif q == "mtau":
            exact[i] = pk.mtau_tail(table, x)
            asym[i] = asy.approx_mtau(params, x)
        elif q == "bmax":
            exact[i] = solve_bmax_tail(params, float(x)).p
            asym[i] = asy.approx_bmax(params, x)
        elif q == "tau":
            # exact column: the M_tau-based form P(M_tau > (1 - rho) x) from the engine
            exact[i] = pk.mtau_tail(table, (1.0 - rho) * x)
            asym[i] = asy.approx_tau(params, x)
        elif q == "kingman":
            exact[i] = table.density_at(x / (1.0 - rho)) / (1.0 - rho)
            asym[i] = asy.kingman_local_density(params, x)
        elif q == "passage":
            exact[i] = pk.expected_passage_random_start(table, x)
    if cfg is not None:
        try:
            if q in ("local", "sup"):
                sim = estimate_m_infinity(cfg, xs, sw.window if q == "local" else None)
            elif q in ("mtau", "bmax", "tau"):
                name = {"mtau": "m_tau", "bmax": "b_tau", "tau": "tau"}[q]
                sim = estimate_many(cfg, [(Exceeds(name, float(x)), None) for x in xs])
            elif q == "passage":
                sim = [estimate_many(SimConfig(params, reps, seed, passage_level=float(x), workers=workers),
                                     [(Value("sigma_a"), Passed())])[0] for x in xs]
        except ZeroSupportError:
            sim = [None] * xs.size
    rows = []
    for i, x in enumerate(xs):
        s = sim[i]
        rows.append([rho, x, exact[i], asym[i], None if s is None else s.mean, None if s is None else s.half_width,
                     _ratio(exact[i], asym[i]), None if s is None else _ratio(s.mean, asym[i])])
    return rows


def threshold_rows(params_list, k, k_star):
    rows = []
    for p in params_list:
        t = asy.thresholds(p, k, k_star)
        rows.append([p.rho, t.x_rho, t.x_tilde, t.x_rho_star, t.a_rho_star])
    return rows


def run_spec(spec: ExperimentSpec, stream=None) -> list[Path]:
    stream = sys.stdout if stream is None else stream
    law = parse_law(spec.law)
    params_list = [pk.ModelParams(r, law) for r in spec.rhos]
    written = []
    for sw in spec.sweeps:
        path = spec.output / f"{sw.name}.csv"
        if sw.quantity == "thresholds":
            write_rows(path, THRESHOLD_COLUMNS, threshold_rows(params_list, sw.k, sw.k_star))
            stream.write(f"{sw.name}: thresholds for {len(params_list)} values of rho -> {path}\n")
            written.append(path)
            continue
        rows = []
        for p in params_list:
            rows += sweep_rows(sw, p, spec.h, spec.replications, spec.seed, spec.workers, spec.x_max)
        write_rows(path, SWEEP_COLUMNS, rows)
        written.append(path)
        for p in params_list:
            floor = _summary_floor(sw, p)
            devs = [abs(r[6] - 1) for r in rows if r[0] == p.rho and r[6] is not None and r[1] >= floor]
            worst = fmt(max(devs)) if devs else "n/a"
            stream.write(f"{sw.name}: rho={fmt(p.rho)} max|ratio-1| over x >= {fmt(floor)}: {worst}\n")
    return written


def _summary_floor(sw: Sweep, params) -> float:
    if sw.mode == "threshold":
        return getattr(asy.thresholds(params, sw.k, sw.k_star), sw.threshold)
    return 0.0


# ---------------------------------------------------------------- argparse

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="htpoisson", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run an experiment file")
    r.add_argument("spec")

    def common(p):
        p.add_argument("--law", required=True, help='e.g. "lomax(alpha=2.5)"')
        p.add_argument("--rho", type=float, nargs="+", required=True)

    t = sub.add_parser("thresholds", help="transition thresholds")
    common(t)
    t.add_argument("--k", type=float, default=1.5)
    t.add_argument("--kstar", type=float, default=2.5)

    e = sub.add_parser("exact", help="engine values at given levels")
    common(e)
    e.add_argument("--x", type=float, nargs="+", required=True)
    e.add_argument("--h", type=float, default=0.01)
    e.add_argument("--window", type=float, default=1.0)
    e.add_argument("--table", help="also write the stationary table to this CSV")

    s = sub.add_parser("simulate", help="Monte Carlo tail estimates")
    common(s)
    s.add_argument("--reps", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--x", type=float, nargs="+", default=[])
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--raw", help="stream per-path functionals to this CSV (single rho)")
    s.add_argument("--a", type=float, help="record first passage of this level")

    b = sub.add_parser("bmax", help="tail of the largest jump before tau")
    common(b)
    b.add_argument("--x", type=float, nargs="+", required=True)
    b.add_argument("--tol", type=float, default=1e-12)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = sys.stdout
    try:
        if args.cmd == "run":
            run_spec(parse_spec(args.spec), out)
            return 0
        law = parse_law(args.law)
        params_list = [pk.ModelParams(r, law) for r in args.rho]
        if args.cmd == "thresholds":
            write_rows(None, THRESHOLD_COLUMNS, threshold_rows(params_list, args.k, args.kstar), out)
        elif args.cmd == "exact":
            rows = []
            for p in params_list:
                top = max(args.x) + args.window + 1.0
                table = _table(p, args.h, top)
                if args.table:
                    table.to_csv(args.table)
                for x in args.x:
                    mt = pk.mtau_tail(table, x) if x >= table.h else None
                    rows.append([p.rho, x, table.cdf_at(x), table.density_at(x),
                                 pk.stationary_local(table, x, args.window), mt, solve_bmax_tail(p, x).p])
            write_rows(None, ["rho", "x", "sup_cdf", "sup_density", "sup_local", "mtau_tail", "bmax_tail"],
                       rows, out)
        elif args.cmd == "simulate":
            rows = []
            for p in params_list:
                cfg = SimConfig(p, args.reps, args.seed, passage_level=args.a, workers=args.workers)
                if args.raw:
                    write_functionals_csv(cfg, args.raw)
                pairs = [(Value("tau"), None)]
                for x in args.x:
                    pairs += [(Exceeds("tau", x), None), (Exceeds("m_tau", x), None), (Exceeds("b_tau", x), None)]
                ests = estimate_many(cfg, pairs)
                rows.append([p.rho, "E[tau]", ests[0].mean, ests[0].half_width, ests[0].n])
                for j, x in enumerate(args.x):
                    for name, e in zip(("P(tau>x)", "P(M_tau>x)", "P(B_tau>x)"), ests[1 + 3 * j:4 + 3 * j]):
                        rows.append([p.rho, f"{name}@{fmt(x)}", e.mean, e.half_width, e.n])
            out.write("rho,statistic,mean,ci_half_width,n\n")
            for r in rows:
                out.write(",".join(c if isinstance(c, str) else fmt(c) for c in r) + "\n")
        elif args.cmd == "bmax":
            for p in params_list:
                curve = bmax_curve(p, sorted(args.x), args.tol)
                out.write(f"# rho={fmt(p.rho)}, law={law.spec()}\n")
                curve.to_csv(out)
    except (SpecError, ValueError, ArithmeticError, ZeroSupportError) as exc:
        print(f"htpoisson: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
