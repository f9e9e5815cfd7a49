"""Command line: plan, run, suite, render and track.

Exit codes: 0 success, 1 usage or I/O error, 2 algorithmic failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .assembly_tree import tree_to_json
from .assignment import InfeasibleDispatch
from .continuous_nav import TrackConfig, simulate_track, trace_waypoints
from .experiments import (bar_chart, results_csv, run_suite, summarize, summary_csv,
                          write_render)
from .extension import landmarks_to_json
from .navigation import Trace
from .strategies import KINDS, PlanFailure, Strategy, execute, plan
from .world import WorldError, generate_suite, load_world

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sapoa", description="Parallel self-assembly planning on grid maps.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, map_required=True):
        sp.add_argument("--map", required=map_required, help="map text file")
        sp.add_argument("--strategy", default="sapoa", help=f"one of {', '.join(KINDS)}")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="out", help="output directory")

    common(sub.add_parser("plan", help="assembly tree, landmarks and dispatch"))
    common(sub.add_parser("run", help="plan and simulate; writes trace.json"))
    sp = sub.add_parser("suite", help="seeded runs over a map directory or the built-in suite")
    sp.add_argument("--maps-dir", help="directory of *.txt maps (default: generated 25-map suite)")
    sp.add_argument("--runs", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--strategy", action="append",
                    help="restrict to a strategy (repeatable; default all)")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--timing", action="store_true", help="fill the wall_time_ms column")
    sp.add_argument("--out", default="out")
    sp = sub.add_parser("render", help="SVG frames of a run")
    common(sp)
    sp.add_argument("--trace", help="existing trace.json (default: run the map first)")
    sp.add_argument("--animate", action="store_true", help="one animated SVG instead of frames")
    sp.add_argument("--cell-size", type=int, default=16, help="pixels per cell")
    sp = sub.add_parser("track", help="continuous tracking of one group's path from a trace")
    common(sp)
    sp.add_argument("--trace", help="existing trace.json (default: run the map first)")
    sp.add_argument("--group", type=int, help="group id to follow (default: lowest robot group)")
    sp.add_argument("--cell-size", type=float, default=0.25, help="meters per cell")
    sp.add_argument("--gains-scale", type=float, default=TrackConfig.gains_scale)
    return p


def _strategy(name: str) -> Strategy:
    try:
        return Strategy(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(path: str):
    try:
        return load_world(path)
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read map {path}: {exc}") from None
    except WorldError as exc:
        raise UsageError(f"invalid map {path}: {exc}") from None


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _dump(data) -> str:
    return json.dumps(data, sort_keys=True, indent=1) + "\n"


def _plan_or_fail(world, strategy, seed):
    try:
        return plan(world, strategy, seed)
    except PlanFailure as exc:
        print(f"error: extension failed at level {exc.level}", file=sys.stderr)
    except InfeasibleDispatch as exc:
        print(f"error: {exc}", file=sys.stderr)
    return None


def cmd_plan(args) -> int:
    world, strategy = _load(args.map), _strategy(args.strategy)
    p = _plan_or_fail(world, strategy, args.seed)
    if p is None:
        return EXIT_FAIL
    out = Path(args.out)
    if p.tree is not None:
        _write(out, "tree.json", _dump(tree_to_json(p.tree)))
        _write(out, "landmarks.json", _dump(landmarks_to_json(p.landmarks)))
    _write(out, "assignment.json", _dump({
        "mapping": list(p.assignment.mapping),
        "total_cost": p.assignment.total_cost,
        "columns": [list(c) for c in p.columns],
        "extension_steps": p.extension_steps,
    }))
    print(f"planned {world.name}: {len(world.robots)} robots, "
          f"{p.extension_steps} extension steps")
    return EXIT_OK


def _run(world, strategy, seed) -> Optional[Trace]:
    p = _plan_or_fail(world, strategy, seed)
    return None if p is None else execute(world, p)


def cmd_run(args) -> int:
    world, strategy = _load(args.map), _strategy(args.strategy)
    trace = _run(world, strategy, args.seed)
    if trace is None:
        return EXIT_FAIL
    _write(Path(args.out), "trace.json", trace.dumps() + "\n")
    print(f"{world.name}: {trace.outcome}"
          + (f" in {trace.makespan} ticks" if trace.success else ""))
    return EXIT_OK if trace.success else EXIT_FAIL


def cmd_suite(args) -> int:
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    kinds = args.strategy or list(KINDS)
    for k in kinds:
        _strategy(k)
    if args.maps_dir:
        d = Path(args.maps_dir)
        if not d.is_dir():
            raise UsageError(f"no such directory: {d}")
        files = sorted(d.glob("*.txt"))
        if not files:
            raise UsageError(f"no maps in {d}")
        worlds = [_load(str(f)) for f in files]
    else:
        worlds = generate_suite(0)
    records = run_suite(worlds, kinds, args.runs, args.seed, timing=args.timing,
                        workers=args.workers)
    summaries = summarize(records)
    out = Path(args.out)
    _write(out, "results.csv", results_csv(records))
    _write(out, "summary.csv", summary_csv(summaries))
    _write(out, "success_rate.svg", bar_chart(summaries, "success_rate"))
    print(summary_csv(summaries), end="")
    return EXIT_OK


def _trace_for(args, world) -> Optional[Trace]:
    if args.trace:
        try:
            return Trace.from_json(json.loads(Path(args.trace).read_text(encoding="utf-8")))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read trace {args.trace}: {exc}") from None
    return _run(world, _strategy(args.strategy), args.seed)


def cmd_render(args) -> int:
    world = _load(args.map)
    trace = _trace_for(args, world)
    if trace is None:
        return EXIT_FAIL
    if args.cell_size < 1:
        raise UsageError("--cell-size must be a positive pixel count")
    try:
        paths = write_render(trace, world, args.out, args.strategy, args.seed,
                             animate=args.animate, cell_px=args.cell_size)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"wrote {len(paths)} SVG file(s) to {args.out}")
    return EXIT_OK


def cmd_track(args) -> int:
    world = _load(args.map)
    trace = _trace_for(args, world)
    if trace is None:
        return EXIT_FAIL
    gid = args.group if args.group is not None else min(trace.steps[0])
    try:
        config = TrackConfig(cell_size=args.cell_size, gains_scale=args.gains_scale)
        waypoints = trace_waypoints(trace, gid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    except KeyError:
        raise UsageError(f"group {gid} does not appear in the trace") from None
    try:
        ct = simulate_track(waypoints, config=config)
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _write(Path(args.out), "track.json", ct.dumps() + "\n")
    worst = max(abs(s["d_lat"]) for s in ct.samples)
    print(f"tracked group {gid} over {len(waypoints)} waypoints; max lateral error {worst:.3f} m")
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "run": cmd_run, "suite": cmd_suite, "render": cmd_render,
            "track": cmd_track}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
