"""Command-line driver: configured runs and the canonical experiments.

Results go to ``--out`` as CSV (and ESRI ASCII snapshots for ``run``);
one-line summaries go to stdout, progress to stderr at the level named by
the ``PSWE_LOG`` environment variable (default WARNING).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .io import (ConfigError, RasterError, build_run, load_config, output_times, write_series, write_snapshot,
                 write_state_dump)
from .riemann import DamBreak, RiemannIC, exact_dambreak, l1_error, run_riemann_1d
from .timestep import SolverError, cell_energy_total, run, total_mass

log = logging.getLogger("pswe")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", type=Path, default=d(None), help="run configuration (INI)")
    p.add_argument("--out", type=Path, default=d(Path("pswe-out")), help="output directory")
    p.add_argument("--workers", type=_positive_int, default=d(1), help="kernel threads")
    p.add_argument("--seed", type=_seed, default=d(None), help="seed for randomized inputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pswe", description=__doc__.splitlines()[0])
    _add_globals(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sub.add_parser("run", parents=[common], help="run a configured simulation (needs --config)")

    p = sub.add_parser("riemann", parents=[common], help="1-D dam break against the exact solution")
    p.add_argument("--hl", type=float, default=9.0, help="depth left of the dam")
    p.add_argument("--hr", type=float, default=1.0, help="depth right of the dam")
    p.add_argument("--cells", type=_positive_int, default=400)
    p.add_argument("--t-end", type=float, default=0.4)
    p.add_argument("--viscosity", choices=("off", "upwind", "bounded"), default="bounded")
    p.add_argument("--friction", action="store_true", help="switch on the drag terms")

    p = sub.add_parser("lake-test", parents=[common], help="lake at rest must stay exactly at rest")
    p.add_argument("--cells", type=_positive_int, default=32)
    p.add_argument("--steps", type=_positive_int, default=1000)
    p.add_argument("--mesh", choices=("rect", "hex"), default="rect")
    p.add_argument("--singular", action="store_true", help="partially wet bowl instead of random terrain")

    p = sub.add_parser("uniform-test", parents=[common], help="steady uniform flow on an inclined plane")
    p.add_argument("--cells", type=_positive_int, default=64)
    p.add_argument("--slope", type=float, default=0.01)
    p.add_argument("--theta", type=float, default=0.7)
    p.add_argument("--h", type=float, default=0.5)
    p.add_argument("--alpha-p", type=float, default=0.1)
    p.add_argument("--alpha-s", type=float, default=0.02)
    p.add_argument("--steps", type=_positive_int, default=39)

    p = sub.add_parser("drain", parents=[common], help="drainage of a film from a synthetic valley")
    p.add_argument("--theta", type=float, required=True, help="uniform porosity in (0, 1]")
    p.add_argument("--cells", type=_positive_int, default=64)
    p.add_argument("--spacing", type=float, default=10.0)
    p.add_argument("--h0", type=float, default=0.05)
    p.add_argument("--alpha-p", type=float, default=0.1)
    p.add_argument("--alpha-s", type=float, default=0.01)
    p.add_argument("--t-end", type=float, default=1800.0)
    p.add_argument("--dt-out", type=float, default=60.0)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("PSWE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    handler = {"run": cmd_run, "riemann": cmd_riemann, "lake-test": cmd_lake_test,
               "uniform-test": cmd_uniform_test, "drain": cmd_drain}[args.command]
    try:
        return handler(args)
    except (ConfigError, RasterError) as exc:
        print(f"pswe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"pswe: solver aborted: {exc}", file=sys.stderr)
        if exc.state is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            dump = args.out / "last_state.csv"
            write_state_dump(exc.state, dump)
            print(f"pswe: last valid state (t={exc.state.t!r}) written to {dump}", file=sys.stderr)
        return EXIT_SOLVER


# -- subcommands ------------------------------------------------------------

def cmd_run(args) -> int:
    if args.config is None:
        raise ConfigError("the run command needs --config")
    cfg = load_config(args.config)
    setup = build_run(cfg, workers=args.workers)
    out = cfg["output"]
    t_end = out["t_end"]
    snap_times = set(output_times(t_end, out["dt_out"]).tolist())
    series_times = set(output_times(t_end, out["series_dt"] or out["dt_out"]).tolist())
    mesh, terrain, g = setup.mesh, setup.terrain, setup.model.g
    args.out.mkdir(parents=True, exist_ok=True)
    volume0 = float(np.sum(mesh.area * setup.state.h))
    rows, step_rows = [], []
    counter = {"step": 0}

    def on_step(state, report):
        counter["step"] += 1
        step_rows.append((report.t, report.dt, report.mass, report.energy, report.max_speed, report.clamped_mass))

    def on_output(state):
        if out["snapshots"] and state.t in snap_times:
            write_snapshot(state, terrain, mesh, args.out / "snapshots", counter["step"], g)
        if state.t in series_times:
            volume = float(np.sum(mesh.area * state.h))
            rows.append((float(state.t), volume / volume0 if volume0 > 0 else float("nan"),
                         cell_energy_total(state, mesh, terrain, g), total_mass(state, mesh, terrain)))
            log.info("t=%g steps=%d mass=%g", state.t, counter["step"], rows[-1][3])

    try:
        final, reports = run(setup.state, setup.model, setup.policy, t_end,
                             output_times=sorted(snap_times | series_times), on_output=on_output, on_step=on_step)
    finally:
        write_series(args.out / "series.csv", ["t", "q", "energy", "mass"], rows)
        write_series(args.out / "steps.csv", ["t", "dt", "mass", "energy", "max_speed", "clamped_mass"], step_rows)
    print(f"run: {len(reports)} steps to t={final.t!r}; outputs in {args.out}")
    return EXIT_OK


def cmd_riemann(args) -> int:
    ic = RiemannIC(h_l=args.hl, h_r=args.hr)
    viscosity = False if args.viscosity == "off" else args.viscosity
    DamBreak(args.hl, args.hr).check()
    profile = run_riemann_1d(ic, args.cells, args.t_end, args.friction, viscosity=viscosity, workers=args.workers)
    exact = exact_dambreak(args.hl, args.hr, profile.x, args.t_end, x0=ic.x0)
    err = l1_error(profile, exact[0])
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"riemann_{args.cells}.csv"
    profile.to_csv(path, exact)
    print(f"L1 error = {err!r} ({args.cells} cells, t={args.t_end!r}); profile written to {path}")
    return EXIT_OK


def cmd_lake_test(args) -> int:
    if args.singular:
        res = experiments.singular_lake_experiment(args.cells, args.steps, kind=args.mesh, workers=args.workers)
    else:
        res = experiments.lake_experiment(args.cells, args.steps, args.seed or 0, args.mesh, args.workers)
    worst = max(res.max_dh, res.max_dv)
    print(f"max |dstate/step| = {worst:g} over {res.steps} steps ({res.seconds:.2f} s)")
    return EXIT_OK if worst == 0 else EXIT_FAILED


def cmd_uniform_test(args) -> int:
    res = experiments.uniform_flow_experiment(args.cells, args.slope, args.theta, args.h, args.alpha_p,
                                              args.alpha_s, args.steps, args.workers)
    print(f"max relative change per step = {res.max_relative_change:.3e}; "
          f"velocity error = {res.velocity_error:.3e}; v = {res.velocity.tolist()}")
    return EXIT_OK if max(res.max_relative_change, res.velocity_error) < 1e-10 else EXIT_FAILED


def cmd_drain(args) -> int:
    if not 0 < args.theta <= 1:
        raise ConfigError("--theta must lie in (0, 1]")
    res = experiments.drain_experiment(args.theta, args.cells, args.spacing, args.h0, args.alpha_p, args.alpha_s,
                                       args.t_end, args.dt_out, args.workers, seed=args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"drain_theta{args.theta:g}.csv"
    write_series(path, ["t", "q", "mass"], zip(res.times, res.q, res.mass))
    print(f"q(t_end) = {float(res.q[-1])!r} after {res.steps} steps; series written to {path}")
    return EXIT_OK
