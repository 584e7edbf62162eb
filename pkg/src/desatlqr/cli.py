"""Command-line front end: ``desatlqr design | simulate | plot | verify``.

Exit status: 0 success, 1 verification failed, 2 invalid configuration or
incompatible inputs, 3 solver or simulation failure, 4 file or I/O error.
Log verbosity is read from ``DESATLQR_LOG_LEVEL`` (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import (
    CompatibilityError,
    ConfigError,
    DesatError,
    DomainError,
    FileFormatError,
)
from .lqr_core import (
    GainSchedule,
    controllability_gramian_rank,
    feedback_gain,
    monodromy,
    periodic_riccati,
    riccati_residuals,
    solve_dare,
    spectral_radius,
    verify_schedule,
)
from .sim_engine import Trajectory, run

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4

log = logging.getLogger("desatlqr")


def _setup_logging():
    level = os.environ.get("DESATLQR_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _out_dir(args, cfg: RunConfig = None):
    d = args.out or (cfg.out_dir if cfg is not None else None) or "."
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def design(cfg: RunConfig):
    """Build the plant and solve for the gain schedule; returns ``(plant, schedule, report)``."""
    plant = cfg.build_plant()
    constant = cfg.env.magnetic_inclination == 0.0
    if constant:
        # constant field: one DARE serves every sample
        P = solve_dare(plant.A, plant.B[0], plant.Q, plant.R)
        K = feedback_gain(P, plant.A, plant.B[0], plant.R)
        Ps, Ks = [P] * plant.p, [K] * plant.p
        res = riccati_residuals(plant, Ps)
        info = {"method": "dare", "residual_max": float(np.max(res)),
                "monodromy_radius": spectral_radius(monodromy(plant, Ks)), "p": plant.p}
        schedule = GainSchedule(P=tuple(Ps), K=tuple(Ks), ts=plant.ts, x_bar=cfg.x_bar, info=info)
    else:
        schedule = periodic_riccati(plant, x_bar=cfg.x_bar)
    rank, cond = controllability_gramian_rank(plant)
    report = {
        "path": "constant-B DARE fast path" if constant else "periodic Riccati (periodic Schur)",
        "p": plant.p,
        "ts": plant.ts,
        "orbital_period": cfg.env.period,
        "orbital_rate": cfg.env.rate,
        "discretization": plant.method,
        "riccati_residual_max": schedule.info["residual_max"],
        "monodromy_spectral_radius": schedule.info["monodromy_radius"],
        "gramian_rank": rank,
        "gramian_condition": cond,
        "P_min_eigenvalue": float(min(np.linalg.eigvalsh(x)[0] for x in schedule.P)),
        "P_max_eigenvalue": float(max(np.linalg.eigvalsh(x)[-1] for x in schedule.P)),
        "fallback_samples": schedule.info.get("fallback", []),
    }
    return plant, schedule, report


def check_compatible(schedule: GainSchedule, cfg: RunConfig):
    bad = {}
    if schedule.p != cfg.p:
        bad["p"] = (schedule.p, cfg.p)
    ts = cfg.sample_time
    if abs(schedule.ts - ts) > 1e-9 * ts:
        bad["ts"] = (schedule.ts, ts)
    if bad:
        raise CompatibilityError(bad)


def cmd_design(args):
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    _, schedule, report = design(cfg)
    schedule.to_json(out / "schedule.json")
    with open(out / "design_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"design: {report['path']}")
    print(f"  p = {report['p']}, ts = {report['ts']:.6f} s")
    print(f"  max Riccati residual      {report['riccati_residual_max']:.3e}")
    print(f"  monodromy spectral radius {report['monodromy_spectral_radius']:.6f}")
    print(f"  reachability Gramian rank {report['gramian_rank']} (cond {report['gramian_condition']:.3e})")
    print(f"  wrote {out / 'schedule.json'} and {out / 'design_report.json'}")
    return EXIT_OK


def _load_schedule(path):
    try:
        return GainSchedule.from_json(str(path))
    except DomainError as exc:
        raise FileFormatError(f"{path}: {exc}") from None


def cmd_simulate(args):
    cfg = load_config(args.config)
    schedule = _load_schedule(args.schedule)
    check_compatible(schedule, cfg)
    sim = cfg.sim
    if args.mode is not None:
        sim.mode = args.mode
    if args.seed is not None:
        sim.seed = args.seed
    if np.any(cfg.x_bar != 0):
        schedule = schedule.with_bias(cfg.x_bar)
    plant = cfg.build_plant() if sim.mode == "linear" else None
    traj = run(sim, schedule, plant=plant, params=cfg.params, env=cfg.env)
    out = _out_dir(args, cfg)
    path = out / "trajectory.csv"
    traj.to_csv(path)
    print(f"simulate: {sim.mode}, {len(traj)} samples written to {path}")
    return EXIT_OK


def cmd_plot(args):
    from .plotting import write_plots

    traj = Trajectory.from_csv(args.csv)
    out = _out_dir(args)
    for p in write_plots(traj, out):
        print(f"plot: wrote {p}")
    return EXIT_OK


def cmd_verify(args):
    cfg = load_config(args.config)
    schedule = _load_schedule(args.schedule)
    check_compatible(schedule, cfg)
    plant = cfg.build_plant()
    checks = verify_schedule(plant, schedule, oracle=not args.no_oracle)
    ok = True
    for name, (passed, value) in checks.items():
        ok &= bool(passed)
        shown = f"{value:.3e}" if isinstance(value, float) else str(value)
        print(f"{'PASS' if passed else 'FAIL'} {name}: {shown}")
    print("verify: " + ("all invariants hold" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def build_parser():
    ap = argparse.ArgumentParser(prog="desatlqr", description="Periodic LQR attitude control and wheel desaturation.")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="compute a gain schedule")
    d.add_argument("--config", required=True)
    d.add_argument("--out")
    d.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="run a closed-loop simulation")
    s.add_argument("--config", required=True)
    s.add_argument("--schedule", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--mode", choices=("linear", "nonlinear"))
    s.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plot", help="write SVG charts of a trajectory CSV")
    p.add_argument("csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)

    v = sub.add_parser("verify", help="recheck a stored schedule")
    v.add_argument("--config", required=True)
    v.add_argument("--schedule", required=True)
    v.add_argument("--no-oracle", action="store_true", help="skip the value-iteration cross-check")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CompatibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DesatError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
