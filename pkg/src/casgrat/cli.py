"""Batch driver: config parsing, sweeps, caching, result emission.

A run is described by a flat INI file with SI units throughout::

    [geometry]
    gap = 200e-9          # sphere surface to grating top, m
    radius = 500e-9       # sphere radius, m
    lateral = 0.0         # sphere center offset along x, m

    [grating]
    period = 1e-6
    depth = 500e-9
    fill = 0.5
    material = silica     # gold | silica | vacuum | eps:2.1
                          # | drude:1.37e16,5.32e13 | file:eps.txt

    [sphere]
    material = gold

    [thermal]
    temperature = 300

    [numerics]
    tol = 1e-3
    deterministic = true
    threads = 1
    # optional explicit cutoffs (otherwise auto-converged):
    # ell_max = 8, n_orders = 6, n_kx = 12, n_ky = 32, ky_cutoff = 12

    [sweep]               # optional; at most one variable
    variable = gap        # gap | lateral | fill | depth | radius
    values = 1.0e-6, 1.5e-6, 2.0e-6

    [output]
    path = results.csv
    format = csv          # csv | json
    ledger = false        # per-term CSV next to the results
    lateral_force = false
    eta = none            # none | single | double | both

    [cache]
    dir =                 # defaults to $CASGRAT_CACHE_DIR if set

Completed sweep points are check-pointed in the cache directory keyed
by a content hash of everything that can influence the number, so a
re-run resumes where it stopped and a warm re-run reproduces the
output file byte for byte.  Exit codes: 0 success, 2 invalid
configuration, 3 numerical failure (partial results are still
written).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import materials as mats
from .energy import (ThermalState, free_energy, lateral_force, pfa_double,
                     pfa_single)
from .mie import SphereSpec
from .rcwa import GratingSpec, ReflectionCache, material_fingerprint
from .roundtrip import TruncationSpec, auto_truncate

SWEEPABLES = ("gap", "lateral", "fill", "depth", "radius")
ETA_CHOICES = ("none", "single", "double", "both")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


@dataclass
class RunConfig:
    gap: float
    radius: float
    lateral: float
    period: float
    depth: float
    fill: float
    grating_material: str
    sphere_material: str
    temperature: float
    tol: float
    deterministic: bool
    threads: int
    trunc_overrides: dict
    sweep_variable: str | None
    sweep_values: list
    output_path: str
    output_format: str
    emit_ledger: bool
    want_lateral_force: bool
    eta: str
    cache_dir: str | None

    def validate(self) -> None:
        for name in ("gap", "radius", "period"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")
        if self.depth < 0.0:
            raise ConfigError("depth must be non-negative")
        if not 0.0 < self.fill <= 1.0:
            raise ConfigError(f"fill must be in (0, 1], got {self.fill}")
        if self.temperature <= 0.0:
            raise ConfigError("temperature must be positive")
        if not 1e-6 < self.tol < 1e-1:
            raise ConfigError("tol must lie in (1e-6, 1e-1)")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.sweep_variable is not None:
            if self.sweep_variable not in SWEEPABLES:
                raise ConfigError(f"sweep variable must be one of {SWEEPABLES}")
            if not self.sweep_values:
                raise ConfigError("sweep values must be non-empty")
            for v in self.sweep_values:
                probe = dataclasses.replace(self)
                probe.sweep_variable = None
                setattr(probe, self.sweep_variable, v)
                probe.validate()
        if self.output_format not in ("csv", "json"):
            raise ConfigError("output format must be csv or json")
        if self.eta not in ETA_CHOICES:
            raise ConfigError(f"eta must be one of {ETA_CHOICES}")
        parse_material(self.grating_material)
        parse_material(self.sphere_material)


@dataclass
class ResultRow:
    """One sweep point; attribute order defines the CSV column order."""

    gap: float
    radius: float
    lateral: float
    period: float
    depth: float
    fill: float
    temperature: float
    F_J: float
    F_over_kBT: float
    F_x_N: float | None
    eta_single: float | None
    eta_double: float | None
    ell_max: int
    n_orders: int
    n_terms: int
    wall_time_s: float
    error: str | None = None

    @classmethod
    def columns(cls):
        return [f.name for f in dataclasses.fields(cls)]


def parse_material(token: str) -> mats.MaterialModel:
    """Material reference syntax of the config file."""
    token = token.strip()
    if token == "gold":
        return mats.gold()
    if token == "silica":
        return mats.fused_silica()
    if token == "vacuum":
        return mats.Vacuum()
    if token.startswith("eps:"):
        val = float(token[4:])
        if val < 1.0:
            raise ConfigError(f"eps material must have eps >= 1, got {val}")
        if val == 1.0:
            return mats.Vacuum()
        # constant permittivity via one far-off resonance
        return mats.LorentzOscillators(((val - 1.0, 1e30, 0.0),))
    if token.startswith("drude:"):
        try:
            omega_p, gamma = (float(x) for x in token[6:].split(","))
        except ValueError as exc:
            raise ConfigError(f"bad drude spec {token!r}; expected "
                              "drude:omega_p_rad_s,gamma_rad_s") from exc
        return mats.Drude(omega_p, gamma)
    if token.startswith("file:"):
        return mats.load_tabulated(token[5:])
    raise ConfigError(f"unknown material {token!r}")


def load_config(path) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    def get(section, option, conv=str, default=None, required=False):
        if cp.has_option(section, option):
            raw = cp.get(section, option).strip()
            if raw != "":
                try:
                    return conv(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"[{section}] {option}: cannot parse {raw!r}") from exc
        if required:
            raise ConfigError(f"missing required option [{section}] {option}")
        return default

    boolean = lambda s: s.lower() in ("1", "true", "yes", "on")
    trunc_over = {}
    for name, conv in (("ell_max", int), ("n_orders", int), ("n_kx", int),
                       ("n_ky", int), ("ky_cutoff", float)):
        val = get("numerics", name, conv)
        if val is not None:
            trunc_over[name] = val

    sweep_var = get("sweep", "variable")
    sweep_vals = []
    if sweep_var is not None:
        raw = get("sweep", "values", str, required=True)
        sweep_vals = [float(v) for v in raw.replace(",", " ").split()]

    cfg = RunConfig(
        gap=get("geometry", "gap", float, required=True),
        radius=get("geometry", "radius", float, required=True),
        lateral=get("geometry", "lateral", float, 0.0),
        period=get("grating", "period", float, required=True),
        depth=get("grating", "depth", float, required=True),
        fill=get("grating", "fill", float, required=True),
        grating_material=get("grating", "material", str, required=True),
        sphere_material=get("sphere", "material", str, required=True),
        temperature=get("thermal", "temperature", float, 300.0),
        tol=get("numerics", "tol", float, 1e-3),
        deterministic=get("numerics", "deterministic", boolean, True),
        threads=get("numerics", "threads", int, 1),
        trunc_overrides=trunc_over,
        sweep_variable=sweep_var,
        sweep_values=sweep_vals,
        output_path=get("output", "path", str, "results.csv"),
        output_format=get("output", "format", str, "csv"),
        emit_ledger=get("output", "ledger", boolean, False),
        want_lateral_force=get("output", "lateral_force", boolean, False),
        eta=get("output", "eta", str, "none"),
        cache_dir=get("cache", "dir", str,
                      os.environ.get("CASGRAT_CACHE_DIR")))
    cfg.validate()
    return cfg


def _point_config(cfg: RunConfig, value) -> RunConfig:
    point = dataclasses.replace(cfg)
    if cfg.sweep_variable is not None:
        setattr(point, cfg.sweep_variable, value)
    point.sweep_variable = None
    point.sweep_values = []
    return point


def _point_key(point: RunConfig) -> str:
    """Content hash over everything that can change the numbers."""
    h = hashlib.sha256()
    payload = {k: v for k, v in dataclasses.asdict(point).items()
               if k not in ("output_path", "output_format", "emit_ledger",
                            "cache_dir", "threads")}
    h.update(json.dumps(payload, sort_keys=True).encode())
    for token in (point.grating_material, point.sphere_material):
        h.update(material_fingerprint(parse_material(token)).encode())
    return h.hexdigest()


def evaluate_point(point: RunConfig, cache: ReflectionCache
                   ) -> tuple[ResultRow, list]:
    """Compute one sweep point (free energy plus requested extras).

    Returns the result row and the per-term Matsubara ledger rows
    (n, xi_rad_per_s, term_J, cumulative_J).
    """
    t_start = time.perf_counter()
    sphere = SphereSpec(point.radius, parse_material(point.sphere_material))
    grating = GratingSpec(point.period, point.depth, point.fill,
                          parse_material(point.grating_material))
    thermal = ThermalState(point.temperature)
    if point.trunc_overrides:
        base = dict(ell_max=int(math.ceil(4.0 * point.radius / point.gap)) + 2,
                    n_orders=max(1, int(math.ceil(
                        5.0 * point.period
                        / (2.0 * math.pi * point.gap))) + 5),
                    n_kx=12, n_ky=24, ky_cutoff=10.0)
        base.update(point.trunc_overrides)
        trunc = TruncationSpec(**base)
    else:
        trunc = auto_truncate(sphere, grating, point.gap, point.tol,
                              temperature=point.temperature,
                              lateral=point.lateral, cache=cache)
    result = free_energy(sphere, grating, point.gap, point.lateral, thermal,
                         point.tol, trunc, cache)
    f_x = None
    if point.want_lateral_force:
        f_x = lateral_force(sphere, grating, point.gap, point.lateral,
                            thermal, point.tol, trunc, cache)
    eta_s = eta_d = None
    if point.eta in ("single", "both"):
        eta_s = result.free_energy / pfa_single(sphere, grating, point.gap,
                                                thermal, point.tol,
                                                cache=cache)
    if point.eta in ("double", "both"):
        eta_d = result.free_energy / pfa_double(sphere, grating, point.gap,
                                                thermal, point.tol)
    row = ResultRow(
        gap=point.gap, radius=point.radius, lateral=point.lateral,
        period=point.period, depth=point.depth, fill=point.fill,
        temperature=point.temperature,
        F_J=result.free_energy, F_over_kBT=result.free_energy_kbt,
        F_x_N=f_x, eta_single=eta_s, eta_double=eta_d,
        ell_max=trunc.ell_max, n_orders=trunc.n_orders,
        n_terms=len(result.terms),
        wall_time_s=round(time.perf_counter() - t_start, 3))
    return row, result.ledger_rows()


def run(cfg: RunConfig) -> tuple[list, int]:
    """Execute all sweep points; returns (rows, exit_status)."""
    values = cfg.sweep_values if cfg.sweep_variable else [None]
    cache_dir = Path(cfg.cache_dir) if cfg.cache_dir else None
    if cache_dir:
        cache_dir.mkdir(parents=True, exist_ok=True)
    block_cache = ReflectionCache()

    def one(index_value):
        index, value = index_value
        point = _point_config(cfg, value)
        key = _point_key(point)
        if cache_dir:
            hit = cache_dir / f"{key}.json"
            if hit.exists():
                return ResultRow(**json.loads(hit.read_text())), None
        try:
            row, ledger = evaluate_point(point, block_cache)
        except Exception as exc:  # keep the sweep going, record the failure
            return ResultRow(
                gap=point.gap, radius=point.radius, lateral=point.lateral,
                period=point.period, depth=point.depth, fill=point.fill,
                temperature=point.temperature, F_J=math.nan,
                F_over_kBT=math.nan, F_x_N=None, eta_single=None,
                eta_double=None, ell_max=0, n_orders=0, n_terms=0,
                wall_time_s=0.0, error=f"{type(exc).__name__}: {exc}"), None
        if cache_dir:
            tmp = cache_dir / f".{key}.tmp"
            tmp.write_text(json.dumps(dataclasses.asdict(row)))
            tmp.replace(cache_dir / f"{key}.json")
        if cfg.emit_ledger and ledger is not None:
            _write_ledger(cfg.output_path, index, ledger)
        return row, ledger

    tasks = list(enumerate(values))
    if cfg.threads > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            outcome = list(pool.map(one, tasks))
    else:
        outcome = [one(t) for t in tasks]
    rows = [row for row, _ in outcome]

    status = 3 if any(r.error for r in rows) else 0
    write_rows(rows, cfg.output_path, cfg.output_format)
    return rows, status


def _write_ledger(output_path, point_index: int, ledger_rows) -> None:
    """Per-term Matsubara ledger CSV alongside the main output."""
    path = Path(output_path)
    name = path.with_suffix("").name + f"_ledger_{point_index:03d}.csv"
    target = path.parent / name
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "xi_rad_per_s", "term_J", "cumulative_J"])
        writer.writerows(ledger_rows)


def write_rows(rows, path, fmt) -> None:
    """Atomically write the result table (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".casgrat_")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            if fmt == "csv":
                writer = csv.writer(fh)
                writer.writerow(ResultRow.columns())
                for row in rows:
                    writer.writerow([getattr(row, c)
                                     for c in ResultRow.columns()])
            else:
                json.dump([dataclasses.asdict(r) for r in rows], fh, indent=1)
                fh.write("\n")
        os.replace(tmp_name, path)
    except BaseException:
        os.unlink(tmp_name)
        raise


PLOT_KINDS = {
    "energy_vs_d": ("gap", "F_over_kBT"),
    "energy_vs_xS": ("lateral", "F_over_kBT"),
    "eta_vs_d": ("gap", "eta_single"),
    "force_vs_xS": ("lateral", "F_x_N"),
}

_PLOT_STUB = """\
#!/usr/bin/env python3
# render {csv_name}; requires matplotlib (not a package dependency)
import csv
import matplotlib.pyplot as plt

xs, ys = [], []
with open({csv_name!r}) as fh:
    for row in csv.DictReader(fh):
        xs.append(float(row[{xcol!r}]))
        ys.append(float(row[{ycol!r}]))
plt.plot(xs, ys, "o-")
plt.xlabel({xcol!r})
plt.ylabel({ycol!r})
plt.tight_layout()
plt.savefig({png_name!r}, dpi=160)
"""


def emit_plot_data(rows, kind: str, stem: str) -> tuple[str, str]:
    """Write a two-column CSV plus a plotting-script stub for one figure kind."""
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; "
                          f"choose from {sorted(PLOT_KINDS)}")
    xcol, ycol = PLOT_KINDS[kind]
    csv_name = f"{stem}_{kind}.csv"
    script_name = f"{stem}_{kind}_plot.py"
    with open(csv_name, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([xcol, ycol, "fill"])
        for row in rows:
            y = getattr(row, ycol)
            if y is None:
                raise ConfigError(f"plot kind {kind} needs column {ycol}; "
                                  "enable it in [output]")
            writer.writerow([getattr(row, xcol), y, row.fill])
    with open(script_name, "w") as fh:
        fh.write(_PLOT_STUB.format(csv_name=csv_name, xcol=xcol, ycol=ycol,
                                   png_name=f"{stem}_{kind}.png"))
    return csv_name, script_name


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="casgrat",
        description="sphere-grating Casimir free energy sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="execute a config file")
    runp.add_argument("config", help="path to the INI run description")
    runp.add_argument("--sweep-override", metavar="VAR=V1,V2,...",
                      help="replace the sweep variable and values")
    runp.add_argument("--tol", type=float, help="override [numerics] tol")
    runp.add_argument("--threads", type=int, help="worker threads")
    runp.add_argument("--deterministic", action="store_true",
                      help="force the deterministic reduction order")
    runp.add_argument("--cache-dir", help="override [cache] dir")
    runp.add_argument("--emit-plot", metavar="KIND",
                      help=f"also write plot data: {sorted(PLOT_KINDS)}")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.sweep_override:
            var, _, vals = args.sweep_override.partition("=")
            cfg.sweep_variable = var.strip()
            cfg.sweep_values = [float(v) for v in vals.split(",") if v]
        if args.tol is not None:
            cfg.tol = args.tol
        if args.threads is not None:
            cfg.threads = args.threads
        if args.deterministic:
            cfg.deterministic = True
        if args.cache_dir is not None:
            cfg.cache_dir = args.cache_dir
        cfg.validate()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        rows, status = run(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    for row in rows:
        if row.error:
            print(f"point failed: {row.error}", file=sys.stderr)
    if args.emit_plot:
        try:
            emit_plot_data(rows, args.emit_plot,
                           str(Path(cfg.output_path).with_suffix("")))
        except ConfigError as exc:
            print(f"plot error: {exc}", file=sys.stderr)
            return 2
    return status


if __name__ == "__main__":
    sys.exit(main())
