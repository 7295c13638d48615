"""Command-line entry point.

Exit status: 0 on success, 2 on invalid input, 3 when a reproduction run misses
a reference tolerance.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys

from . import config as cfg
from . import experiments, fluid, simulation, stability
from .errors import PollingError
from .model import derive_quantities

EXIT_OK, EXIT_INVALID, EXIT_REPRO = 0, 2, 3


def _load(path: str) -> cfg.LoadedConfig:
    if not os.path.exists(path) and path in cfg.bundled_names():
        loaded = cfg.load_bundled(path)
    else:
        loaded = cfg.load_config(path)
    for w in loaded.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return loaded


def _floats(text: str) -> list:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_stability(args) -> int:
    loaded = _load(args.config)
    v = stability.check(loaded.params)
    rec = stability.verdict_record(v)
    for k, x in rec.items():
        print(f"{k}={x:.12g}" if isinstance(x, float) else f"{k}={x}")
    if loaded.params.discipline.is_limited:
        d = derive_quantities(loaded.params)
        rates = stability.divergence_rates(d, loaded.params.limits)
        print("divergence_bounds=" + ",".join(f"{r:.6g}" for r in rates))
    return EXIT_OK


def cmd_simulate(args) -> int:
    loaded = _load(args.config)
    rs = loaded.run
    cycles = args.cycles if args.cycles is not None else rs.cycles
    warmup = rs.warmup_cycles if args.cycles is None else cycles // 100
    seed = args.seed if args.seed is not None else rs.seed
    est, rec = simulation.run(loaded.params, cycles, warmup, seed)
    fields = {
        "p": est.p, "p_halfwidth": est.p_halfwidth,
        "u4": est.u4, "u4_halfwidth": est.u4_halfwidth,
        "r4": est.r4, "r4_halfwidth": est.r4_halfwidth,
        "f1": est.f[0], "f2": est.f[1], "f3": est.f[2],
        "mean_q1": est.mean_queue[0], "mean_q2": est.mean_queue[1], "mean_q3": est.mean_queue[2],
        "cycles": est.cycles, "elapsed": est.elapsed,
    }
    for k, x in fields.items():
        print(f"{k}={x:.6g}" if isinstance(x, float) else f"{k}={x}")
    out = args.out or rs.out
    if out:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(fields)
            w.writerow([f"{x:.6g}" if isinstance(x, float) else x for x in fields.values()])
    if args.trace or rs.emit_trace:
        path = args.trace or (os.path.splitext(out)[0] + ".trace.csv" if out else "trace.csv")
        simulation.write_trace(loaded.params, seed, args.trace_events, path)
    return EXIT_OK


def cmd_fluid(args) -> int:
    loaded = _load(args.config)
    q0 = _floats(args.q0)
    if len(q0) != 3:
        raise argparse.ArgumentTypeError("--q0 needs three comma-separated values")
    d = derive_quantities(loaded.params)
    traj = fluid.integrate(d, loaded.params.limits, q0, args.t_end)
    fluid.write_trajectory(traj, args.out)
    print(f"reason={traj.reason} t_final={traj.t_final:.6g} segments={len(traj.segments)}")
    return EXIT_OK


def cmd_repro(args) -> int:
    rows = _floats(args.rows) if args.rows else None
    report = experiments.repro(args.scenario, cycles=args.cycles, seed=args.seed, rows=rows, workers=args.workers)
    print(report.text())
    return EXIT_OK if report.passed else EXIT_REPRO


def cmd_sweep(args) -> int:
    loaded = _load(args.config)
    text = experiments.sweep(loaded, args.axis, _floats(args.values), mode=args.mode,
                             cycles=args.cycles, workers=args.workers)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adaptive-polling", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    st = sub.add_parser("stability", help="closed-form stability verdicts")
    st_sub = st.add_subparsers(dest="action", required=True)
    chk = st_sub.add_parser("check")
    chk.add_argument("--config", required=True)
    chk.set_defaults(func=cmd_stability)

    sim = sub.add_parser("simulate", help="run the discrete-event simulation")
    sim.add_argument("--config", required=True)
    sim.add_argument("--cycles", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out")
    sim.add_argument("--trace", help="write an event trace CSV here")
    sim.add_argument("--trace-events", type=int, default=10_000)
    sim.set_defaults(func=cmd_simulate)

    fl = sub.add_parser("fluid", help="fluid model trajectories")
    fl_sub = fl.add_subparsers(dest="action", required=True)
    integ = fl_sub.add_parser("integrate")
    integ.add_argument("--config", required=True)
    integ.add_argument("--q0", required=True)
    integ.add_argument("--t-end", type=float, required=True)
    integ.add_argument("--out", required=True)
    integ.set_defaults(func=cmd_fluid)

    rp = sub.add_parser("repro", help="compare a reference scenario with published values")
    rp.add_argument("scenario")
    rp.add_argument("--cycles", type=int)
    rp.add_argument("--seed", type=int)
    rp.add_argument("--rows", help="table1 only: comma-separated Weibull shapes")
    rp.add_argument("--workers", type=int, default=1)
    rp.set_defaults(func=cmd_repro)

    sw = sub.add_parser("sweep", help="vary one numeric config field")
    sw.add_argument("--config", required=True)
    sw.add_argument("--axis", required=True)
    sw.add_argument("--values", required=True)
    sw.add_argument("--mode", choices=("simulate", "stability"), default="simulate")
    sw.add_argument("--cycles", type=int)
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (PollingError, OSError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
