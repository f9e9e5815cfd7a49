"""Benchmark harness: seeded runs over a map suite, per-category summaries, SVG output."""
from __future__ import annotations

import csv
import hashlib
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .assignment import InfeasibleDispatch
from .navigation import SUCCESS, Trace, TraceViolation, validate_trace
from .strategies import KINDS, PlanFailure, Strategy, execute, plan
from .world import World

RESULT_COLUMNS = ("map", "category", "strategy", "seed", "outcome", "extension_steps",
                  "makespan", "total_moves", "wall_time_ms")
SUMMARY_COLUMNS = ("category", "strategy", "success_rate", "mean_extension_steps", "mean_makespan")

FAIL_EXTENSION = "fail:extension"
FAIL_DISPATCH = "fail:dispatch"
FAIL_INVALID = "fail:invalid"


@dataclass(frozen=True)
class RunRecord:
    map_name: str
    category: Optional[int]
    strategy: str
    seed: int
    outcome: str
    extension_steps: Optional[int] = None
    makespan: Optional[int] = None
    total_moves: Optional[int] = None
    wall_time_ms: Optional[float] = None

    def __post_init__(self):
        if self.outcome != SUCCESS and (self.makespan is not None or self.total_moves is not None):
            raise ValueError("failed runs carry no step counts")

    @property
    def success(self) -> bool:
        return self.outcome == SUCCESS


@dataclass(frozen=True)
class CategorySummary:
    category: Optional[int]
    strategy: str
    runs: int
    success_rate: float
    mean_extension_steps: Optional[float]
    mean_makespan: Optional[float]
    mean_total_moves: Optional[float] = None


def derive_seed(base_seed: int, map_name: str, strategy: str, run_index: int) -> int:
    """Order-independent per-run seed: ``base_seed`` xor a hash of the run's identity."""
    digest = hashlib.sha256(f"{map_name}|{strategy}|{run_index}".encode()).digest()
    return (int.from_bytes(digest[:4], "big") ^ base_seed) & 0xFFFFFFFF


def run_one(world: World, strategy, seed: int, timing: bool = False
            ) -> tuple[RunRecord, Optional[Trace]]:
    """Plan and simulate one run; the trace is re-validated before it counts."""
    if isinstance(strategy, str):
        strategy = Strategy(strategy)
    t0 = time.perf_counter()
    trace = None
    steps = None
    try:
        p = plan(world, strategy, seed)
        steps = p.extension_steps
        trace = execute(world, p)
        try:
            validate_trace(trace, world)
            outcome = trace.outcome
        except TraceViolation:
            outcome = FAIL_INVALID
    except PlanFailure:
        outcome = FAIL_EXTENSION
    except InfeasibleDispatch:
        outcome = FAIL_DISPATCH
    ok = outcome == SUCCESS
    wall = round((time.perf_counter() - t0) * 1000.0, 3) if timing else None
    rec = RunRecord(world.name, world.category, strategy.kind, seed, outcome, steps,
                    trace.makespan if ok else None, trace.total_moves if ok else None, wall)
    return rec, trace


def _job(args) -> RunRecord:
    world, kind, seed, timing = args
    return run_one(world, kind, seed, timing)[0]


def run_suite(worlds: Sequence[World], strategies: Iterable[str] = KINDS, runs_per_map: int = 20,
              base_seed: int = 0, timing: bool = False, workers: int = 1) -> list:
    """One record per (map, strategy, run), in that nesting order.

    Seeds come from :func:`derive_seed`, so results do not depend on the
    order in which runs execute; ``workers > 1`` spreads them over
    processes.
    """
    if runs_per_map < 1:
        raise ValueError("runs_per_map must be at least 1")
    strategies = list(strategies)
    for kind in strategies:
        Strategy(kind)
    jobs = [(w, kind, derive_seed(base_seed, w.name, kind, i), timing)
            for w in worlds for kind in strategies for i in range(runs_per_map)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_job, jobs, chunksize=8))
    return [_job(j) for j in jobs]


def _mean(values: list) -> Optional[float]:
    return sum(values) / len(values) if values else None


def summarize(records: Sequence[RunRecord]) -> list:
    """Per (category, strategy) aggregates; step means use successful runs only."""
    if not records:
        raise ValueError("no records to summarize")
    order = {k: i for i, k in enumerate(KINDS)}
    cells: dict = {}
    for r in records:
        cells.setdefault((r.category, r.strategy), []).append(r)
    out = []
    for (cat, kind), recs in sorted(cells.items(),
                                    key=lambda kv: (kv[0][0] is None, kv[0][0] or 0,
                                                    order.get(kv[0][1], len(order)), kv[0][1])):
        good = [r for r in recs if r.success]
        out.append(CategorySummary(
            cat, kind, len(recs), len(good) / len(recs),
            _mean([r.extension_steps for r in good if r.extension_steps is not None]),
            _mean([r.makespan for r in good]),
            _mean([r.total_moves for r in good]),
        ))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def results_csv(records: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in records:
        w.writerow([r.map_name, _fmt(r.category), r.strategy, r.seed, r.outcome,
                    _fmt(r.extension_steps), _fmt(r.makespan), _fmt(r.total_moves),
                    _fmt(r.wall_time_ms)])
    return buf.getvalue()


def summary_csv(summaries: Sequence[CategorySummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in summaries:
        w.writerow([_fmt(s.category), s.strategy, _fmt(float(s.success_rate)),
                    _fmt(s.mean_extension_steps), _fmt(s.mean_makespan)])
    return buf.getvalue()


def read_results(text: str) -> list:
    """Parse a results.csv back into records."""
    def opt(v, cast):
        return cast(v) if v != "" else None

    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(RunRecord(row["map"], opt(row["category"], int), row["strategy"],
                             int(row["seed"]), row["outcome"],
                             opt(row["extension_steps"], int), opt(row["makespan"], int),
                             opt(row["total_moves"], int), opt(row["wall_time_ms"], float)))
    return out


# --- SVG rendering -----------------------------------------------------------

OBSTACLE_FILL = "#808080"
ROBOT_FILL = "#2ca02c"
TARGET_FILL = "#d62728"


def _check_trace(trace: Trace, world: World) -> None:
    if not trace.steps:
        raise ValueError("malformed trace: no steps")
    for t, step in enumerate(trace.steps):
        if not isinstance(step, dict):
            raise ValueError(f"malformed trace: step {t} is not a group mapping")
        for gid, cells in step.items():
            for c in cells:
                if len(c) != 2 or not all(isinstance(v, int) for v in c):
                    raise ValueError(f"malformed trace: bad cell {c!r} at tick {t}")
                if not world.in_bounds(c):
                    raise ValueError(f"malformed trace: cell {c} out of bounds at tick {t}")


def _rect(cls: str, c, px: int, fill: str, inset: int = 0, stroke: bool = False) -> str:
    x, y = c[0] * px + inset, c[1] * px + inset
    size = px - 2 * inset
    extra = f' fill-opacity="0" stroke="{fill}" stroke-width="2"' if stroke else f' fill="{fill}"'
    return f'<rect class="{cls}" x="{x}" y="{y}" width="{size}" height="{size}"{extra}/>'


def _static_layer(world: World, px: int) -> list:
    cells = sorted(world.obstacles, key=lambda c: (c[1], c[0]))
    parts = [_rect("obstacle", c, px, OBSTACLE_FILL) for c in cells]
    parts += [_rect("target", c, px, TARGET_FILL, 1, stroke=True)
              for c in sorted(world.targets, key=lambda c: (c[1], c[0]))]
    return parts


def _robot_layer(step: dict, px: int) -> list:
    parts = []
    for gid in sorted(step):
        cells = sorted(step[gid], key=lambda c: (c[1], c[0]))
        parts.append(f'<g class="group" data-id="{gid}">'
                     + "".join(_rect("robot", c, px, ROBOT_FILL, 2) for c in cells) + "</g>")
    return parts


def _svg(world: World, px: int, body: list, title: str) -> str:
    w, h = world.width * px, world.height * px
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
            f'viewBox="0 0 {w} {h}">\n<title>{title}</title>\n'
            f'<rect class="background" x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def render_trace(trace: Trace, world: World, cell_px: int = 16, animate: bool = False,
                 frame_seconds: float = 0.25):
    """SVG frames of a trace: one document per tick, or one animated document.

    Obstacles are gray, robots green and targets red outlines.  Output is a
    pure function of the inputs.
    """
    _check_trace(trace, world)
    static = _static_layer(world, cell_px)
    name = world.name or "map"
    if not animate:
        return [_svg(world, cell_px, static + _robot_layer(step, cell_px), f"{name} tick {t}")
                for t, step in enumerate(trace.steps)]
    last = len(trace.steps) - 1
    body = list(static)
    for t, step in enumerate(trace.steps):
        begin = f"{t * frame_seconds:g}s"
        if t == last:
            timing = f'<set attributeName="visibility" to="visible" begin="{begin}" fill="freeze"/>'
        else:
            timing = (f'<set attributeName="visibility" to="visible" begin="{begin}" '
                      f'dur="{frame_seconds:g}s"/>')
        body.append(f'<g class="frame" data-tick="{t}" visibility="hidden">{timing}'
                    + "".join(_robot_layer(step, cell_px)) + "</g>")
    return _svg(world, cell_px, body, f"{name} animation")


def frame_name(map_name: str, strategy: str, seed: int, tick: Optional[int] = None) -> str:
    if tick is None:
        return f"{map_name}_{strategy}_{seed}.svg"
    return f"{map_name}_{strategy}_{seed}_{tick:04}.svg"


def write_render(trace: Trace, world: World, out_dir, strategy: str, seed: int,
                 animate: bool = False, cell_px: int = 16) -> list:
    """Write rendered SVG file(s) into ``out_dir``; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = world.name or "map"
    doc = render_trace(trace, world, cell_px, animate)
    if animate:
        path = out_dir / frame_name(name, strategy, seed)
        path.write_text(doc, encoding="utf-8")
        return [path]
    paths = []
    for t, frame in enumerate(doc):
        path = out_dir / frame_name(name, strategy, seed, t)
        path.write_text(frame, encoding="utf-8")
        paths.append(path)
    return paths


def bar_chart(summaries: Sequence[CategorySummary], metric: str = "success_rate",
              width: int = 640, height: int = 320) -> str:
    """Grouped bars of one summary metric: categories along x, one bar per strategy."""
    if metric not in {f.name for f in fields(CategorySummary)}:
        raise ValueError(f"unknown metric {metric!r}")
    cats = sorted({s.category for s in summaries if s.category is not None})
    kinds = [k for k in KINDS if any(s.strategy == k for s in summaries)]
    value = {(s.category, s.strategy): getattr(s, metric) for s in summaries}
    top = max([v for v in value.values() if v is not None] + [1e-9])
    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"]
    pad, base = 40, height - 30
    slot = (width - 2 * pad) / max(1, len(cats))
    bar = slot / (len(kinds) + 1)
    parts = []
    for i, cat in enumerate(cats):
        x0 = pad + i * slot
        parts.append(f'<text x="{x0 + slot / 2:.1f}" y="{height - 10}" '
                     f'text-anchor="middle" font-size="12">{cat}</text>')
        for j, kind in enumerate(kinds):
            v = value.get((cat, kind)) or 0.0
            h = (base - pad) * v / top
            parts.append(f'<rect class="bar" data-strategy="{kind}" x="{x0 + j * bar:.1f}" '
                         f'y="{base - h:.1f}" width="{bar * 0.9:.1f}" height="{h:.1f}" '
                         f'fill="{palette[j % len(palette)]}"/>')
    for j, kind in enumerate(kinds):
        parts.append(f'<text x="{pad + j * 110}" y="20" font-size="12" '
                     f'fill="{palette[j % len(palette)]}">{kind}</text>')
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
            f'<title>{metric}</title>\n' + "\n".join(parts) + "\n</svg>\n")
