"""Command-line front end.

    lotloc simulate --config C --out-log L [--out-map M]
    lotloc localize --log L --map M --config C --out-trace T
    lotloc eval --trace T [--summary] [--post-convergence]
    lotloc fit --points P [--config C]

Global flags: --seed (overrides the config seed), --quiet. Exit codes:
0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from lotloc.config import ConfigError, RunConfig, apply_overrides, load_config
from lotloc.landmarks import save_map
from lotloc.lshape import fit_rectangle, DegenerateCluster
from lotloc.pipeline import (
    ErrorTrace,
    build_map,
    build_world,
    read_trace,
    run_localization,
    simulate_records,
    write_trace,
)
from lotloc.segmentation import segment
from lotloc.sensorlog import read_log, write_log


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config = apply_overrides(config, {"seed": str(args.seed)})
    return config


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    world = build_world(config)
    records = simulate_records(config, world)
    write_log(records, args.out_log)
    if not args.quiet:
        print(f"wrote {len(records)} records to {args.out_log}")
    if args.out_map:
        save_map(build_map(config, world), args.out_map)
        if not args.quiet:
            print(f"wrote landmark map to {args.out_map}")
    return 0


def _cmd_localize(args: argparse.Namespace) -> int:
    config = _load_config(args)
    from lotloc.landmarks import load_map

    lot_map = load_map(args.map)
    records = read_log(args.log)
    trace = run_localization(records, lot_map, config)
    write_trace(trace, args.out_trace)
    if not args.quiet:
        print(f"wrote {len(trace)} estimates to {args.out_trace}")
    return 0


def _print_summary(trace: ErrorTrace, post_convergence: bool) -> None:
    summary = trace.summary(post_convergence=post_convergence)
    t_conv = trace.convergence_time()
    scope = "post-convergence" if post_convergence else "whole drive"
    print(f"summary ({scope}, {summary.n_records} estimates)")
    print(f"{'direction':<14}{'mean abs':>12}{'max abs':>12}")
    rows = [
        ("longitudinal", summary.mean_abs_lon, summary.max_abs_lon, "m"),
        ("lateral", summary.mean_abs_lat, summary.max_abs_lat, "m"),
        ("orientation", summary.mean_abs_psi_deg, summary.max_abs_psi_deg, "deg"),
    ]
    for name, mean, peak, unit in rows:
        print(f"{name:<14}{mean:>10.4f} {unit:<1}{peak:>10.4f} {unit}")
    if t_conv is None:
        print("convergence    never (position error did not settle below 0.2 m)")
    else:
        print(f"convergence    {t_conv:.2f} s")


def _cmd_eval(args: argparse.Namespace) -> int:
    trace = read_trace(args.trace)
    if not args.summary:
        print("t,e_lon,e_lat,e_psi_deg")
        for r in trace.records:
            print(f"{r.t!r},{r.e_lon!r},{r.e_lat!r},{r.e_psi_deg!r}")
    _print_summary(trace, args.post_convergence)
    return 0


def _cmd_fit(args: argparse.Namespace) -> int:
    config = _load_config(args)
    xy = []
    with open(args.points, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{args.points}:{line_no}: expected 'x,y'")
            xy.append((float(parts[0]), float(parts[1])))
    points = np.asarray(xy, dtype=float).reshape(-1, 2)
    ranges = np.sqrt(points[:, 0] ** 2 + points[:, 1] ** 2)
    clusters, outliers = segment(points, ranges, config.segmentation)
    if not args.quiet:
        print(f"{points.shape[0]} points -> {len(clusters)} clusters, {len(outliers)} outliers")
    n_rect = 0
    for i, cluster in enumerate(clusters):
        try:
            rect = fit_rectangle(cluster, config.lshape)
        except DegenerateCluster:
            print(f"cluster {i}: degenerate (collinear), skipped")
            continue
        n_rect += 1
        le1, le2 = rect.edge_lengths()
        corners = " ".join(f"({c.x:.3f},{c.y:.3f})" for c in rect.corners)
        print(
            f"rectangle {n_rect}: theta*={math.degrees(rect.theta_star):.2f} deg "
            f"edges={le1:.3f}x{le2:.3f} m score={rect.score:.1f} corners: {corners}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lotloc", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--quiet", action="store_true", help="suppress progress chatter")
    common.add_argument("--config", default=None, help="key = value configuration file")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a sensor log (and map)")
    p.add_argument("--out-log", required=True)
    p.add_argument("--out-map", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("localize", parents=[common], help="replay a log through the pipeline")
    p.add_argument("--log", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--out-trace", required=True)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("eval", parents=[common], help="summarize an error trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--summary", action="store_true", help="print only the summary table")
    p.add_argument("--post-convergence", action="store_true",
                   help="exclude the initial transient from the means")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("fit", parents=[common], help="segment + fit rectangles on a point file")
    p.add_argument("--points", required=True, help="file with one 'x,y' line per point")
    p.set_defaults(func=_cmd_fit)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures: missing files, bad logs, divergence
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
