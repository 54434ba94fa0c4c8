"""Command-line entry point: generate, explore, bench-frontier and compare."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .bench import bench_frontier, linear_fit, median_table, write_bench
from .config import ConfigError, MissionConfig, Mode
from .mission import (compare_modes, run_mission, write_decisions, write_gp_log, write_metrics,
                      write_summary)
from .sim import WorldKind, WorldModel, generate_world


def _extent(text: str) -> tuple:
    parts = text.lower().replace(",", "x").split("x")
    try:
        vals = [float(p) for p in parts if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad extent {text!r}; use e.g. 20 or 20x20") from None
    if len(vals) == 1:
        vals *= 2
    if len(vals) != 2 or min(vals) <= 0:
        raise argparse.ArgumentTypeError(f"bad extent {text!r}; use e.g. 20 or 20x20")
    return tuple(vals)


def _int_list(text: str) -> list:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _load_config(path) -> MissionConfig:
    return MissionConfig.from_file(path) if path else MissionConfig()


def cmd_generate(args) -> int:
    world = generate_world(WorldKind(args.kind), args.extent, seed=args.seed, height=args.height,
                           resolution=args.resolution)
    world.write(args.out)
    print(f"wrote {args.kind} world ({len(world.primitives)} primitives, {world.shape} voxels) to {args.out}")
    return 0


def cmd_explore(args) -> int:
    cfg = _load_config(args.config)
    overrides = {}
    if args.world:
        overrides["world.file"] = args.world
    if args.mode:
        overrides["mission.mode"] = args.mode
    if args.seed is not None:
        overrides["mission.seed"] = args.seed
        overrides["world.seed"] = args.seed
    cfg = MissionConfig({**cfg.values, **overrides})
    world = WorldModel.read(args.world, cfg["map.resolution"]) if args.world else None
    result = run_mission(cfg, world)
    write_metrics(args.metrics, result)
    if args.decisions:
        write_decisions(args.decisions, result)
    if args.gp_log:
        write_gp_log(args.gp_log, result)
    t = f"{result.sim_time_to_threshold:.1f} s" if result.success else "not reached"
    print(f"mode={cfg.mode.value} success={result.success} time_to_threshold={t} "
          f"coverage={100 * result.final_coverage:.1f}% updates={result.n_updates} "
          f"frontiers={result.final_frontiers} end={result.termination}")
    return 0


def cmd_bench(args) -> int:
    rows = bench_frontier(args.sizes, args.cfactors, args.base_changed, args.reps, args.seed)
    write_bench(args.out, rows)
    med = median_table(rows)
    base = int(round(args.base_changed * args.cfactors[0]))
    xs = [n for n in args.sizes if (n, base) in med]
    for (n, c), v in sorted(med.items()):
        print(f"|F|={n:>7d} changed={c:>6d} median t_frontier={v:10.1f} us")
    if len(set(xs)) >= 2:
        a, b, r2 = linear_fit(xs, [med[(n, base)] for n in xs])
        print(f"linear fit: {a:.4f} us/frontier + {b:.1f} us, R^2={r2:.4f}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    rows, per_seed = compare_modes(cfg, args.seeds)
    write_summary(args.out, rows)
    for r in rows:
        print(f"{r['mode']:>12s} {r['metric']:>24s} mean={r['mean']:.4g} std={r['std']:.3g} n={r['n']}")
    a = per_seed[Mode.ASYMP]
    b = per_seed[Mode.ASYMP_BAYES]
    deltas = [(y.sim_time_to_threshold or y.sim_time) - (x.sim_time_to_threshold or x.sim_time)
              for x, y in zip(a, b)]
    print(f"per-seed time delta (bayes - asymp): {np.round(deltas, 1).tolist()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="asymp-explore", description="Headless 3D frontier exploration.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a seeded world file")
    g.add_argument("--kind", choices=[k.value for k in WorldKind], required=True)
    g.add_argument("--extent", type=_extent, default=(20.0, 20.0), help="meters, e.g. 20 or 20x20")
    g.add_argument("--height", type=float, default=4.0)
    g.add_argument("--resolution", type=float, default=0.4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("explore", help="run one mission and write per-update metrics")
    e.add_argument("--world", help="world file; default generates one from the config")
    e.add_argument("--config", help="key = value config file")
    e.add_argument("--mode", choices=[m.value for m in Mode])
    e.add_argument("--seed", type=int)
    e.add_argument("--metrics", required=True, help="output CSV")
    e.add_argument("--decisions", help="optional per-decision CSV")
    e.add_argument("--gp-log", help="optional GP sample CSV")
    e.set_defaults(func=cmd_explore)

    b = sub.add_parser("bench-frontier", help="frontier-maintenance cost sweep")
    b.add_argument("--sizes", type=_int_list, default=[1_000, 10_000, 100_000])
    b.add_argument("--cfactors", type=_float_list, default=[1.0, 10.0])
    b.add_argument("--base-changed", type=int, default=2_000)
    b.add_argument("--reps", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("compare", help="both modes over N seeds")
    c.add_argument("--config", help="key = value config file")
    c.add_argument("--seeds", type=int, default=20)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
