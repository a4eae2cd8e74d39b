"""Command-line front end.

Subcommands ``solve``, ``sweep``, ``svd``, ``pkscan`` and ``fieldmap`` read
a YAML config (see :mod:`activecloak.config`) and write their tables into
the output directory.  Every CSV starts with ``#`` comment lines carrying
the schema version, the seed and the resolved config as JSON.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (the
solve failed, or every cell of a study failed).
"""

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .config import FORMATS, ConfigError, RunConfig, load_config
from .experiments import (
    SWEEP_COLUMNS,
    SweepSpec,
    discretize,
    lemma_check,
    operator_for,
    pk_scan,
    run_sweep,
    solve_setup,
    svd_study,
)
from .fields import evaluate_field
from .regularize import MorozovError, consistency_warning

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("activecloak")


class NumericalFailure(RuntimeError):
    pass


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class Writer:
    """Writes the files of one run and remembers their names."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = cfg.output_dir
        self.files = []
        os.makedirs(self.out, exist_ok=True)

    def wants(self, fmt):
        return fmt in self.cfg.formats

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)

    def csv(self, name, table, columns, rows, notes=()):
        if not self.wants("csv"):
            return
        with open(self.path(name), "w", newline="") as fh:
            fh.write(f"# activecloak table={table} schema={SCHEMA_VERSION}\n")
            fh.write(f"# seed={self.cfg.setup.seed}\n")
            for note in notes:
                fh.write(f"# {note}\n")
            fh.write(f"# config={self.cfg.to_json()}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(v) for v in row])

    def json(self, name, payload):
        if not self.wants("json"):
            return
        record = {
            "schema": SCHEMA_VERSION,
            "command": self.command,
            "version": __version__,
            "seed": self.cfg.setup.seed,
            "config": self.cfg.resolved(),
        }
        record.update(payload)
        with open(self.path(name), "w") as fh:
            json.dump(_jsonable(record), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def svg(self, name, render, *args, **kwargs):
        if not self.wants("svg"):
            return
        render(*args, path=self.path(name), **kwargs)

    def manifest(self, timings, extra=None):
        payload = {"timings": timings, "files": list(self.files), "formats": list(self.cfg.formats)}
        payload.update(extra or {})
        self.json("manifest.json", payload)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- subcommands -------------------------------------------------------------

def cmd_solve(cfg: RunConfig, threads: int = 1):
    if cfg.sweep is not None:
        raise ConfigError("sweep", "solve takes no sweep block; run the sweep subcommand instead")
    setup = cfg.setup
    t0 = time.perf_counter()
    try:
        res = solve_setup(setup)
    except MorozovError as exc:
        raise NumericalFailure(str(exc)) from None
    t_solve = time.perf_counter() - t0
    lemma = lemma_check(setup, res)
    A, _ = operator_for(setup)
    sol = res.noisy
    warn = consistency_warning(res.f1_norm, setup.geometry.R, setup.delta)
    if warn:
        log.warning(warn)

    out = Writer(cfg, "solve")
    out.json("solution.json", {
        "solution": sol.summary(),
        "clean_solution": res.clean.summary(),
        "sensitivity": {
            "absolute": res.abs_sensitivity,
            "relative": res.rel_sensitivity,
            "stability_ratio": res.stability_ratio,
        },
        "f1_norm": res.f1_norm,
        "near_operator_norm": res.near_norm,
        "lemma": lemma.as_dict(),
        "consistency_warning": warn,
    })
    out.csv("phi.csv", "phi", ["tau", "phi_re", "phi_im"],
            zip(A.tau, sol.phi_alpha.real, sol.phi_alpha.imag),
            notes=[f"alpha={sol.alpha!r}"])
    if out.wants("svg"):
        from .plotting import density_plot

        out.svg("phi.svg", density_plot, A.tau, sol.phi_alpha)
    out.manifest({"solve_s": t_solve, "total_s": time.perf_counter() - t0})
    print(f"alpha = {sol.alpha:.6g}  near_rel = {sol.near_rel:.4g}  far_avg = {sol.far_avg:.3g}  "
          f"newton_iters = {sol.newton_iters}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, threads: int = 1):
    if cfg.sweep is None:
        raise ConfigError("sweep", "missing block; the sweep subcommand needs axes and grids")
    sw = cfg.sweep
    spec = SweepSpec(cfg.setup, sw.axis1, sw.grid1, sw.axis2, sw.grid2)
    t0 = time.perf_counter()
    cells = run_sweep(spec, threads=threads)
    elapsed = time.perf_counter() - t0

    out = Writer(cfg, "sweep")
    out.csv("sweep.csv", "sweep", SWEEP_COLUMNS,
            ([getattr(c, col) for col in SWEEP_COLUMNS] for c in cells),
            notes=[f"value1={sw.axis1} value2={sw.axis2}"])
    if out.wants("svg"):
        from .plotting import sweep_map

        shape = (len(sw.grid1), len(sw.grid2))
        for stat in ("near_rel", "far_avg", "phi_norm", "alpha", "rel_sensitivity"):
            grid = np.full(shape, np.nan)
            for c in cells:
                grid[c.i, c.j] = getattr(c, stat)
            out.svg(f"sweep_{stat}.svg", sweep_map, sw.grid1, sw.grid2, grid, sw.axis1, sw.axis2, stat)
    counts = {s: sum(c.status == s for c in cells) for s in ("ok", "unconverged", "failed")}
    out.manifest({"total_s": elapsed, "per_cell_s": elapsed / len(cells)}, {"cells": counts})
    print(f"{len(cells)} cells: {counts['ok']} ok, {counts['unconverged']} unconverged, {counts['failed']} failed")
    if counts["failed"] == len(cells):
        raise NumericalFailure("every sweep cell failed")
    return EXIT_OK


def _value_tag(v):
    return f"{v:g}"


def cmd_svd(cfg: RunConfig, threads: int = 1):
    sv = cfg.svd
    t0 = time.perf_counter()
    study = svd_study(cfg.setup, sv.d_grid, sv.k_grid, sv.count, threads=threads)
    elapsed = time.perf_counter() - t0

    out = Writer(cfg, "svd")
    for d, s in study.spectra.items():
        out.csv(f"spectrum_d{_value_tag(d)}.csv", "spectrum", ["index", "sigma"],
                zip(range(1, len(s) + 1), s), notes=[f"d={d!r} k={cfg.setup.k!r}"])
    out.csv("sigma_surface.csv", "sigma_surface", ["d", "k", "sigma1", "gap_1_6"], study.surface)
    if out.wants("svg"):
        from .plotting import spectra_plot, surface_plot

        out.svg("spectra.svg", spectra_plot, study.spectra)
        d_vals, k_vals = list(sv.d_grid), list(sv.k_grid)
        sigma1 = np.array([row[2] for row in study.surface]).reshape(len(d_vals), len(k_vals))
        out.svg("sigma_surface.svg", surface_plot, d_vals, k_vals, sigma1, label="sigma_1")
    out.manifest({"total_s": elapsed})
    return EXIT_OK


def cmd_pkscan(cfg: RunConfig, threads: int = 1):
    pk = cfg.pkscan
    t0 = time.perf_counter()
    rows = pk_scan(cfg.setup, pk.k_grid, epsilon=pk.epsilon, window=pk.alpha_window,
                   per_decade=pk.per_decade, threads=threads)
    elapsed = time.perf_counter() - t0

    out = Writer(cfg, "pkscan")
    out.csv("pk_table.csv", "pk_table", ["k", "neg_pk", "morozov_alpha", "alpha_clean", "flagged", "status"],
            ([r.k, r.neg_pk, r.morozov_alpha, r.alpha_clean, r.flagged, r.status] for r in rows))
    if out.wants("svg"):
        from .plotting import pk_plot

        out.svg("pk_table.svg", pk_plot, [r.k for r in rows], [r.neg_pk for r in rows],
                [r.morozov_alpha for r in rows])
    out.manifest({"total_s": elapsed})
    for r in rows:
        print(f"k = {r.k:6g}  -p_k = {r.neg_pk:7.3f}  alpha = {r.morozov_alpha:.5g}"
              + ("  (flagged)" if r.flagged else ""))
    if all(r.status != "ok" for r in rows):
        raise NumericalFailure("Morozov failed for every wavenumber")
    return EXIT_OK


def field_grid(cfg: RunConfig):
    """Grid axes, the kept points and their flat indices for the field map."""
    fm = cfg.fieldmap
    x = np.linspace(fm.extent[0], fm.extent[1], fm.resolution[0])
    y = np.linspace(fm.extent[2], fm.extent[3], fm.resolution[1])
    X, Y = np.meshgrid(x, y)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    band = np.abs(np.hypot(pts[:, 0], pts[:, 1]) - cfg.setup.geometry.a)
    keep = np.flatnonzero(band >= fm.exclusion)
    return x, y, pts[keep], keep


def cmd_fieldmap(cfg: RunConfig, threads: int = 1):
    setup = cfg.setup
    fm = cfg.fieldmap
    t0 = time.perf_counter()
    disc = discretize(setup.geometry, setup.n_a, setup.n_arc1, setup.n_R)
    if fm.density == "zero":
        h = np.zeros(setup.n_a, dtype=complex)
        alpha = None
    else:
        try:
            sol = solve_setup(setup).noisy
        except MorozovError as exc:
            raise NumericalFailure(str(exc)) from None
        h, alpha = sol.h_alpha, sol.alpha
    x, y, pts, keep = field_grid(cfg)
    u = evaluate_field(h, disc.antenna, pts, setup.k, min_distance=fm.exclusion, threads=threads)
    elapsed = time.perf_counter() - t0

    out = Writer(cfg, "fieldmap")
    out.csv("field.csv", "field", ["x", "y", "u_re", "u_im", "u_abs"],
            zip(pts[:, 0], pts[:, 1], u.real, u.imag, np.abs(u)),
            notes=[f"density={fm.density} alpha={alpha!r}"])
    if out.wants("svg"):
        from .plotting import field_heatmap

        mag = np.full(len(x) * len(y), np.nan)
        mag[keep] = np.abs(u)
        out.svg("field.svg", field_heatmap, x, y, mag.reshape(len(y), len(x)),
                antenna_radius=setup.geometry.a)
    out.manifest({"total_s": elapsed}, {"points": int(len(pts)), "excluded": int(len(x) * len(y) - len(pts))})
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "svd": cmd_svd,
    "pkscan": cmd_pkscan,
    "fieldmap": cmd_fieldmap,
}


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="activecloak", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=f"run {name}")
        p.add_argument("--config", metavar="PATH", help="YAML config; omitted means the baseline problem")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=_u64, metavar="U64", help="noise seed (overrides noise.seed)")
        p.add_argument("--threads", type=_positive_int, default=1, metavar="N", help="worker threads")
        p.add_argument("--format", action="append", choices=FORMATS, dest="formats",
                       help="output format, repeatable (overrides output.formats)")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.setup = replace(cfg.setup, seed=args.seed)
    if args.out is not None:
        cfg.output_dir = args.out
    if args.formats:
        cfg.formats = tuple(dict.fromkeys(args.formats))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
