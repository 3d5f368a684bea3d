"""Command-line entry point: ``radproj <subcommand> ...``.

Exit codes: 0 success, 1 failed verification, 2 configuration or input
error, 3 refused for exceeding a numerical budget.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .analysis import energy_direct, energy_fourier
from .config import load_config
from .dimension import box_dimension, cap_counting_dimension, cube_for
from .errors import BudgetError, ConfigError, ProjectionError, RadprojError
from .experiments import (
    BOUND_COLUMNS,
    bound_table,
    exceptional_sweep,
    run_pipeline,
    write_sweep,
)
from .io import csv_text, json_text, read_measure, write_csv, write_measure
from .measures import frostman_fit, geometric_radii
from .oracles import verify_suite
from .projections import DEFAULT_EXCLUSION, cap_grid, radial_pushforward, worst_capset
from .tubes import good_bad_partition


def _config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "out_dir", None):
        cfg.output.dir = Path(args.out_dir)
    return cfg


def cmd_generate(args):
    cfg = _config(args)
    mu = cfg.build_E() if args.which == "E" else cfg.build_F()
    out = Path(args.out) if args.out else cfg.output.path(f"{args.which}.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_measure(mu, out)
    print(out)


def cmd_project(args):
    mu = read_measure(args.measure)
    grid = cap_grid(mu.dim, args.k)
    hist = radial_pushforward(mu, np.array(args.viewpoint), grid, args.rho0)
    nz = np.flatnonzero(hist.masses)
    centers = grid.centers[nz]
    header = ["cap_index", *[f"center_{j}" for j in range(mu.dim)], "mass"]
    rows = ([int(i), *c.tolist(), float(m)] for i, c, m in zip(nz, centers, hist.masses[nz]))
    text = csv_text(header, rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.tau is not None:
        caps, mass = worst_capset(hist, args.tau)
        sys.stderr.write(json_text({"k": args.k, "tau": args.tau, "caps": caps.caps, "mass": mass}))


def cmd_dimfit(args):
    mu = read_measure(args.measure)
    if args.method == "box":
        origin, side = cube_for(mu.locations)
        fit = box_dimension(mu.locations, args.window, origin, side)
        report = {"method": "box", "slope": fit.slope, "residual": fit.residual,
                  "reliable": fit.reliable, "counts": fit.counts}
    elif args.method == "caps":
        if args.viewpoint is None:
            raise ConfigError("--viewpoint is required for --method caps")
        fit = cap_counting_dimension(mu, np.array(args.viewpoint), args.window, args.mass_fraction,
                                     args.rho0)
        report = {"method": "caps", "slope": fit.slope, "residual": fit.residual,
                  "reliable": fit.reliable, "counts": fit.counts}
    else:
        k0, k1 = args.window
        radii = geometric_radii(2.0**-k0, 0.5, k1 - k0 + 1)
        fit = frostman_fit(mu, radii)
        report = {"method": "frostman", "exponent": fit.exponent, "constant": fit.constant(),
                  "per_radius_sup": fit.per_radius_sup, "below_resolution": fit.below_resolution}
    sys.stdout.write(json_text(report))


def cmd_energy(args):
    mu = read_measure(args.measure)
    rows = []
    for K in args.K:
        direct = energy_direct(mu, args.s, diagonal_cutoff=1.0 / K)
        fourier = energy_fourier(mu, args.s, K)
        rows.append({"K": K, "direct": direct, "fourier": fourier, "ratio": fourier / direct})
    sys.stdout.write(json_text({"s": args.s, "reports": rows}))


def cmd_goodbad(args):
    E, F = read_measure(args.E), read_measure(args.F)
    part = good_bad_partition(E, F, np.array(args.viewpoint), args.k, args.s, args.rho0)
    if args.out:
        write_csv(args.out, ["atom", "tube_mass", "good"],
                  ([i, float(m), m < part.threshold] for i, m in enumerate(part.tube_masses)))
    sys.stdout.write(json_text({
        "k": part.k, "s": part.s, "threshold": part.threshold,
        "good_atoms": len(part.good), "bad_atoms": len(part.bad),
        "good_mass": float(E.weights[part.good].sum()), "bad_mass": float(E.weights[part.bad].sum()),
    }))


def cmd_sweep(args):
    cfg = _config(args)
    result = exceptional_sweep(cfg)
    for p in write_sweep(result, cfg):
        print(p)


def cmd_bounds(args):
    rows = bound_table(args.d, args.dimE, args.tau)
    text = csv_text(BOUND_COLUMNS, ([r[c] for c in BOUND_COLUMNS] for r in rows))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_pipeline(args):
    cfg = _config(args)
    run_pipeline(cfg)
    out = cfg.output
    for name in ("goal.csv", "dual_goal.csv", "pipeline.json"):
        if out.path(name).exists():
            print(out.path(name))


def cmd_verify(args):
    seed = 0 if args.seed is None else args.seed
    ok = True
    for name, passed, detail in verify_suite(seed, args.instances):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radproj", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub = ap.add_subparsers(dest="command", required=True)

    def config_cmd(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True)
        p.add_argument("--out-dir", default=None)
        p.set_defaults(func=func)
        return p

    p = config_cmd("generate", cmd_generate, "build a measure from a config and write it")
    p.add_argument("--which", choices=["E", "F"], default="E")
    p.add_argument("--out", default=None)

    p = sub.add_parser("project", help="radial histogram of a measure file (CSV)")
    p.add_argument("--measure", required=True)
    p.add_argument("--viewpoint", type=float, nargs="+", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--rho0", type=float, default=DEFAULT_EXCLUSION)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("dimfit", help="box, cap-counting or Frostman exponent fit")
    p.add_argument("--measure", required=True)
    p.add_argument("--method", choices=["box", "caps", "frostman"], default="box")
    p.add_argument("--window", type=int, nargs=2, default=[2, 6])
    p.add_argument("--viewpoint", type=float, nargs="+", default=None)
    p.add_argument("--mass-fraction", type=float, default=0.99)
    p.add_argument("--rho0", type=float, default=DEFAULT_EXCLUSION)
    p.set_defaults(func=cmd_dimfit)

    p = sub.add_parser("energy", help="Riesz energy, direct and Fourier")
    p.add_argument("--measure", required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--K", type=float, nargs="+", default=[16.0, 32.0])
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("goodbad", help="Good/Bad split of E from one viewpoint")
    p.add_argument("--E", required=True)
    p.add_argument("--F", required=True)
    p.add_argument("--viewpoint", type=float, nargs="+", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--rho0", type=float, default=DEFAULT_EXCLUSION)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_goodbad)

    config_cmd("sweep", cmd_sweep, "exceptional-set sweep over the viewpoint lattice")

    p = sub.add_parser("bounds", help="bound table for a grid of (dimE, tau)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--dimE", type=float, nargs="+", required=True)
    p.add_argument("--tau", type=float, nargs="+", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bounds)

    config_cmd("pipeline", cmd_pipeline, "goal check, dual bound and dual-stage goal check")

    p = sub.add_parser("verify", help="compare against brute-force oracles")
    p.add_argument("--instances", type=int, default=50)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
    except BudgetError as exc:
        print(f"budget refused: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ProjectionError) as exc:
        stage = getattr(exc, "stage", None)
        print(f"error{f' in stage {stage}' if stage else ''}: {exc}", file=sys.stderr)
        return 2
    except RadprojError as exc:
        stage = getattr(exc, "stage", None)
        print(f"error{f' in stage {stage}' if stage else ''}: {exc}", file=sys.stderr)
        return 1
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
