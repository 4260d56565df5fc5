"""Command-line drivers: single solve, convergence ladder, timing ladder and a
quick self-test.

    ls2d solve    --config run.json [--backend atm] [--grid 2x33x17+65x33] ...
    ls2d converge --config run.json --ladder 2x9x5+17x9,2x17x9+33x17,...
    ls2d timing   --config run.json --ladder ...
    ls2d selftest

A configuration is a JSON object whose keys are the fields of ``RunConfig``;
flags override individual fields.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ConfigError, LS2DError
from .geometry import Scatterer, constant_contrast, gaussian_contrast, make_curve, max_tau0
from .grids import GridSpec
from .oracle import DiscSeriesSolution
from .solver import (SolverOptions, error_metrics, interpolate_solution, observed_order, scatter_solve)

REPORT_SCHEMA = 1
FIELD_COLUMNS = ["x", "y", "re_u", "im_u", "re_us", "im_us"]
CONVERGENCE_COLUMNS = ["grid", "unknowns", "eps_inf", "order_inf", "eps_2", "order_2", "numIt"]
TIMING_COLUMNS = ["grid", "unknowns", "time_accel", "time_unaccel", "growth_accel", "numIt", "accel_diff"]


@dataclass
class RunConfig:
    shape: str = "disc"
    shape_params: dict = field(default_factory=dict)
    contrast: dict = field(default_factory=lambda: {"kind": "constant", "n": math.sqrt(2.0)})
    kappa: float = 2.0
    direction: tuple = (1.0, 0.0)
    backend: str = "atm"
    grid: str = "2x33x17+65x33"
    ladder: list = field(default_factory=list)
    tau0: float | None = None
    tol: float = 1e-10
    restart: int = 200
    maxit: int = 500
    accel: bool = True
    threads: int | None = None
    output_dir: str = "."
    prefix: str = "ls2d"

    def __post_init__(self):
        self.direction = tuple(float(d) for d in self.direction)
        self.ladder = [str(g) for g in self.ladder]
        if self.backend not in ("atm", "pct"):
            raise ConfigError(f"backend must be 'atm' or 'pct', not {self.backend!r}")
        GridSpec.parse(self.grid)
        for g in self.ladder:
            GridSpec.parse(g)

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["direction"] = list(self.direction)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    # -- derived objects --------------------------------------------------

    def curve(self):
        return make_curve(self.shape, **self.shape_params)

    def contrast_function(self):
        c = dict(self.contrast)
        kind = c.pop("kind", "constant")
        if kind == "constant":
            if "n" in c:
                n = c["n"]
                return constant_contrast(complex(*n) if isinstance(n, (list, tuple)) else complex(n))
            if "m" in c:
                # m = 1 - n^2
                return constant_contrast(np.sqrt(complex(1.0 - c["m"])))
            raise ConfigError("constant contrast needs 'n' or 'm'")
        if kind == "gaussian":
            return gaussian_contrast(float(c.get("amplitude", 0.5)), float(c.get("width", 1.0)))
        raise ConfigError(f"unknown contrast kind {kind!r}")

    def scatterer(self) -> Scatterer:
        curve = self.curve()
        tau0 = self.tau0 if self.tau0 is not None else default_tau0(curve)
        return Scatterer(curve, tau0, self.contrast_function())

    def options(self) -> SolverOptions:
        return SolverOptions(tol=self.tol, restart=self.restart, maxit=self.maxit, accel=self.accel)

    def exact(self):
        """Reference field when the series solution applies, else None."""
        if self.shape not in ("disc", "circle") or self.contrast.get("kind", "constant") != "constant":
            return None
        curve = self.curve()
        if curve.cx != 0 or curve.cy != 0:
            return None
        dx, dy = self.direction
        if dy != 0 or dx <= 0:
            return None
        n = np.sqrt(complex(1.0 - self.contrast_function()(np.zeros(1), np.zeros(1))[0]))
        series = DiscSeriesSolution(self.kappa, n, curve.radius)
        return series.field

    def path(self, suffix: str) -> Path:
        return Path(self.output_dir) / f"{self.prefix}_{suffix}"


def default_tau0(curve) -> float:
    """0.3 of the inscribed scale, capped below the curvature limit."""
    return float(min(0.3 * curve.diameter() / 2.0, max_tau0(curve, safety=0.9)))


# ----------------------------------------------------------------------------
# drivers
# ----------------------------------------------------------------------------

def run_solve(cfg: RunConfig) -> dict:
    sc = cfg.scatterer()
    sol = scatter_solve(sc, cfg.kappa, cfg.grid, cfg.backend, cfg.direction, cfg.options(), exact=cfg.exact())
    write_field_csv(cfg.path("field.csv"), sol.x, sol.y, sol.total, sol.scattered)
    report = {"schema": REPORT_SCHEMA, "command": "solve", "config": json.loads(cfg.to_json()),
              "tau0": sc.tau0, **sol.report.to_dict()}
    report["finite"] = bool(np.all(np.isfinite(sol.total)))
    _write_json(cfg.path("report.json"), report)
    return report


def run_convergence(cfg: RunConfig) -> dict:
    if len(cfg.ladder) < 3:
        raise ConfigError("a convergence study needs a ladder of at least 3 grids")
    sc = cfg.scatterer()
    opts = cfg.options()
    exact = cfg.exact()
    ref = None
    if exact is None:
        refspec = GridSpec.parse(cfg.ladder[-1]).refined()
        ref = scatter_solve(sc, cfg.kappa, refspec, cfg.backend, cfg.direction, opts)
    rows = []
    for g in cfg.ladder:
        sol = scatter_solve(sc, cfg.kappa, g, cfg.backend, cfg.direction, opts)
        target = exact(sol.x, sol.y) if exact is not None else interpolate_solution(ref, sol.x, sol.y)
        e = error_metrics(sol.total, target)
        rows.append({"grid": str(GridSpec.parse(g)), "unknowns": sol.report.unknowns,
                     "eps_inf": e["eps_inf"], "eps_2": e["eps_2"], "numIt": sol.report.iterations})
    oi = observed_order([r["eps_inf"] for r in rows])
    o2 = observed_order([r["eps_2"] for r in rows])
    for i, r in enumerate(rows):
        r["order_inf"] = float(oi[i - 1]) if i else float("nan")
        r["order_2"] = float(o2[i - 1]) if i else float("nan")
    write_table_csv(cfg.path("convergence.csv"), CONVERGENCE_COLUMNS, rows)
    report = {"schema": REPORT_SCHEMA, "command": "converge", "config": json.loads(cfg.to_json()),
              "tau0": sc.tau0, "reference": "series" if exact is not None else str(GridSpec.parse(cfg.ladder[-1]).refined()),
              "rows": rows}
    _write_json(cfg.path("convergence.json"), report)
    return report


def run_timing(cfg: RunConfig, max_growth=6.0) -> dict:
    if len(cfg.ladder) < 2:
        raise ConfigError("a timing study needs at least 2 grids")
    sc = cfg.scatterer()
    rows = []
    for g in cfg.ladder:
        row = {"grid": str(GridSpec.parse(g))}
        fields = {}
        for accel in (True, False):
            opts = dataclasses.replace(cfg.options(), accel=accel)
            t0 = time.perf_counter()
            sol = scatter_solve(sc, cfg.kappa, g, cfg.backend, cfg.direction, opts)
            row["time_accel" if accel else "time_unaccel"] = time.perf_counter() - t0
            fields[accel] = sol.total
            row["unknowns"] = sol.report.unknowns
            if accel:
                row["numIt"] = sol.report.iterations
        row["accel_diff"] = float(np.abs(fields[True] - fields[False]).max() / np.abs(fields[False]).max())
        rows.append(row)
    for i, r in enumerate(rows):
        r["growth_accel"] = r["time_accel"] / rows[i - 1]["time_accel"] if i else float("nan")
    # each ladder step doubles every grid dimension, i.e. about 4x unknowns
    ok_growth = all(r["growth_accel"] <= max_growth for r in rows[1:])
    ok_gap = rows[-1]["time_accel"] < rows[-1]["time_unaccel"]
    write_table_csv(cfg.path("timing.csv"), TIMING_COLUMNS, rows)
    report = {"schema": REPORT_SCHEMA, "command": "timing", "config": json.loads(cfg.to_json()),
              "tau0": sc.tau0, "rows": rows, "growth_ok": ok_growth, "accel_faster": ok_gap}
    _write_json(cfg.path("timing.json"), report)
    return report


def run_selftest(out=sys.stdout) -> bool:
    """Small end-to-end checks; returns True when all pass."""
    results = []

    def check(name, ok, detail):
        results.append(ok)
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=out, flush=True)

    series = DiscSeriesSolution(2.0, math.sqrt(2.0), 1.0)
    r = series.continuity_residual()
    check("series interface continuity", r <= 1e-10, f"{r:.1e}")

    cfg = RunConfig(contrast={"kind": "constant", "n": 1.0}, grid="2x17x9+33x17")
    sol = scatter_solve(cfg.scatterer(), cfg.kappa, cfg.grid, cfg.backend, options=cfg.options())
    dev = float(np.abs(sol.scattered).max())
    check("zero contrast gives the incident field", sol.report.iterations <= 1 and dev <= 1e-12,
          f"numIt={sol.report.iterations}, max|u_s|={dev:.1e}")

    for backend in ("atm", "pct"):
        cfg = RunConfig(backend=backend, grid="2x33x17+65x33" if backend == "atm" else "2x33x17+65x65")
        sol = scatter_solve(cfg.scatterer(), cfg.kappa, cfg.grid, backend, options=cfg.options(), exact=cfg.exact())
        e = sol.report.errors["eps_inf"]
        check(f"disc scattering ({backend})", e <= 1e-3, f"eps_inf={e:.2e}, numIt={sol.report.iterations}")
    return all(results)


# ----------------------------------------------------------------------------
# output
# ----------------------------------------------------------------------------

def write_field_csv(path, x, y, u, us):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([x, y, u.real, u.imag, us.real, us.imag])
    np.savetxt(path, data, delimiter=",", header=",".join(FIELD_COLUMNS), comments="", fmt="%.17g")


def read_field_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2] + 1j * data[:, 3], data[:, 4] + 1j * data[:, 5]


def write_table_csv(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def read_table_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({k: (v if k == "grid" else (int(v) if k in ("unknowns", "numIt") else float(v))) for k, v in r.items()})
    return out


def _write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, default=_jsonable))


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


# ----------------------------------------------------------------------------
# argument handling
# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ls2d", description="Lippmann-Schwinger solver for 2-D penetrable scatterers")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "converge", "timing"):
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON run configuration")
        s.add_argument("--backend", choices=["atm", "pct"])
        s.add_argument("--grid", help="grid spec KxN1xN2+M1xM2")
        s.add_argument("--ladder", help="comma-separated grid specs")
        s.add_argument("--kappa", type=float)
        s.add_argument("--tau0", type=float)
        s.add_argument("--accel", dest="accel", action="store_true", default=None)
        s.add_argument("--no-accel", dest="accel", action="store_false")
        s.add_argument("--threads", type=int)
        s.add_argument("--output-dir")
        s.add_argument("--prefix")
    sub.add_parser("selftest")
    return p


def config_from_args(args) -> RunConfig:
    base = RunConfig.from_json(args.config.read_text()) if args.config else RunConfig()
    over = {}
    for key in ("backend", "grid", "kappa", "tau0", "accel", "threads", "output_dir", "prefix"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = val
    if args.ladder:
        over["ladder"] = [g.strip() for g in args.ladder.split(",") if g.strip()]
    return dataclasses.replace(base, **over)


def thread_count(cfg: RunConfig | None) -> int:
    env = os.environ.get("LS2D_THREADS")
    if env:
        return max(1, int(env))
    if cfg is not None and cfg.threads:
        return cfg.threads
    return os.cpu_count() or 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = None if args.command == "selftest" else config_from_args(args)
        with threadpool_limits(limits=thread_count(cfg)):
            if args.command == "selftest":
                return 0 if run_selftest() else 1
            if args.command == "solve":
                rep = run_solve(cfg)
                print(json.dumps({k: rep[k] for k in ("numIt", "residual", "converged", "unknowns", "errors")}))
            elif args.command == "converge":
                rep = run_convergence(cfg)
                _print_rows(CONVERGENCE_COLUMNS, rep["rows"])
            else:
                rep = run_timing(cfg)
                _print_rows(TIMING_COLUMNS, rep["rows"])
                if not (rep["growth_ok"] and rep["accel_faster"]):
                    print("timing check failed: accelerated growth or gap outside bounds", file=sys.stderr)
                    return 3
    except (LS2DError, OSError) as exc:
        print(f"ls2d: error: {exc}", file=sys.stderr)
        return 2
    return 0


def _print_rows(columns, rows):
    print("  ".join(f"{c:>14s}" for c in columns))
    for r in rows:
        cells = []
        for c in columns:
            v = r.get(c, "")
            cells.append(f"{v:14.3e}" if isinstance(v, float) else f"{v!s:>14s}")
        print("  ".join(cells))


if __name__ == "__main__":
    sys.exit(main())
