"""SAPOA and its comparison strategies behind one planning interface."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .assembly_tree import AssemblyNode, build_tree
from .assignment import Assignment, cost_matrix, hungarian
from .extension import ExtensionConfig, ExtensionFailure, LandmarkRecord, extend_targets
from .navigation import SimConfig, Trace, run
from .world import World, anchor, cell_key, chebyshev, translate

SAPOA = "sapoa"
SAPOA_NOP = "sapoa-nop"
SAPOA_ADS = "sapoa-ads"
APAA = "apaa"
NAIVE = "naive"
KINDS = (SAPOA, SAPOA_NOP, SAPOA_ADS, APAA, NAIVE)
LABELS = {SAPOA: "SAPOA", SAPOA_NOP: "SAPOAnop", SAPOA_ADS: "SAPOAads", APAA: "APAA", NAIVE: "Naive"}


class PlanFailure(RuntimeError):
    """Planning could not produce dispatch targets (extension gave up)."""

    def __init__(self, message: str, level: Optional[int] = None, iterations: int = 0):
        super().__init__(message)
        self.level = level
        self.iterations = iterations


@dataclass
class Strategy:
    kind: str = SAPOA
    params: dict = field(default_factory=dict)  # ExtensionConfig / SimConfig overrides

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; choose from {', '.join(KINDS)}")

    @property
    def separation_units(self) -> int:
        return self.params.get("separation_units", 2 if self.kind == SAPOA_ADS else 4)

    def extension_config(self, seed: int) -> ExtensionConfig:
        return ExtensionConfig(separation_units=self.separation_units,
                               max_iterations=self.params.get("max_iterations"),
                               rng_seed=seed, paired=self.kind != SAPOA_NOP)

    def sim_config(self) -> SimConfig:
        cfg = SimConfig(clearance_units=0 if self.kind == SAPOA_ADS else 2,
                        naive=self.kind == NAIVE)
        for k in ("wait_steps", "max_ticks", "stall_ticks", "visibility", "clearance_units"):
            if k in self.params:
                setattr(cfg, k, self.params[k])
        return cfg


@dataclass
class Plan:
    strategy: Strategy
    tree: Optional[AssemblyNode]
    landmarks: Optional[list]
    assignment: Assignment
    extension_steps: int
    columns: list  # expanded target cell of each dispatch column


def leaf_landmarks(tree: AssemblyNode, records: list) -> list:
    """Expanded cell of every leaf (in ``tree.leaves()`` order) from the deepest record."""
    if not records:
        return [next(iter(leaf.targets)) for leaf in tree.leaves()]
    last = records[-1].as_dict()
    return [next(iter(last[leaf.id])) for leaf in tree.leaves()]


def _round(v: float) -> int:
    return math.floor(v + 0.5)


def _centroid(cells) -> tuple[float, float]:
    cells = list(cells)
    return (sum(c[0] for c in cells) / len(cells), sum(c[1] for c in cells) / len(cells))


def linear_scale(tree: AssemblyNode, min_units: int = 4) -> int:
    """Smallest integer factor spreading all leaves at least ``min_units`` apart."""
    pts = [next(iter(l.targets)) for l in tree.leaves()]
    cx, cy = _centroid(tree.targets)
    need = min_units // 2 + 1
    for k in range(1, 64):
        mapped = [(_round(cx + k * (x - cx)), _round(cy + k * (y - cy))) for x, y in pts]
        if all(chebyshev(a, b) >= need for i, a in enumerate(mapped) for b in mapped[i + 1:]):
            return k
    raise ValueError("no scale factor separates the leaves")


def _snap(cells: frozenset, world: World, taken: set) -> frozenset:
    """Nearest translation (Manhattan, then (iy, ix)) that is free of obstacles and ``taken``."""
    def free(c):
        return all(world.in_bounds(p) and p not in world.obstacles and p not in taken for p in c)

    if free(cells):
        return cells
    for r in range(1, world.width + world.height):
        cands = []
        for dx in range(-r, r + 1):
            for dy in {r - abs(dx), -(r - abs(dx))}:
                moved = translate(cells, dx, dy)
                if free(moved):
                    cands.append(moved)
        if cands:
            return min(cands, key=lambda c: cell_key(anchor(c)))
    raise ValueError("no free placement to snap to")


def apaa_landmarks(tree: AssemblyNode, world: World) -> list:
    """One-step linear expansion about the target centroid.

    Every group is translated by ``(k - 1)`` times its centroid offset.  Only
    the expanded leaf points are corrected: those on obstacles snap to the
    closest free cell.  Larger groups keep their mapped placement even when
    it runs into an obstacle, since the mapping is blind to the map.
    """
    k = linear_scale(tree)
    cx, cy = _centroid(tree.targets)
    nodes = list(tree.walk())
    leaves = {n.id for n in nodes if n.is_leaf}

    def mapped(n):
        gx, gy = _centroid(n.targets)
        return translate(n.targets, _round((k - 1) * (gx - cx)), _round((k - 1) * (gy - cy)))

    points = {n.id: mapped(n) for n in nodes if n.is_leaf and n.parent is not None}
    bad = [gid for gid, cells in points.items()
           if any(not world.in_bounds(c) or c in world.obstacles for c in cells)]
    taken = set().union(*(c for gid, c in points.items() if gid not in bad)) if points else set()
    for gid in sorted(bad):
        points[gid] = _snap(points[gid], world, taken)
        taken |= points[gid]
    records = []
    for level in range(tree.depth):
        placed = {}
        for n in nodes:
            if n.parent is None or n.level > level + 1:
                continue
            if n.id in leaves:
                placed[n.id] = points[n.id]
            elif n.level == level + 1:
                placed[n.id] = mapped(n)
        records.append(LandmarkRecord(level, sorted(placed.items())))
    return records


def plan(world: World, strategy, seed: int = 0) -> Plan:
    """Build the dispatch plan of ``strategy`` for ``world``.

    Raises :class:`PlanFailure` when target extension fails and
    :class:`~sapoa.assignment.InfeasibleDispatch` when no robot-to-target
    matching avoids unreachable targets.
    """
    if isinstance(strategy, str):
        strategy = Strategy(strategy)
    if strategy.kind == NAIVE:
        cols = list(world.targets)
        asg = hungarian(cost_matrix(world.robots, cols, world))
        return Plan(strategy, None, None, asg, 0, cols)
    tree = build_tree(world.targets)
    steps = 0
    if strategy.kind == APAA:
        records = apaa_landmarks(tree, world)
    else:
        try:
            records, steps = extend_targets(tree, world, strategy.extension_config(seed))
        except ExtensionFailure as exc:
            raise PlanFailure(str(exc), exc.level, exc.iterations) from exc
    cols = leaf_landmarks(tree, records)
    asg = hungarian(cost_matrix(world.robots, cols, world))
    return Plan(strategy, tree, records, asg, steps, cols)


def execute(world: World, p: Plan) -> Trace:
    """Run the navigation stage for a plan."""
    return run(world, p.landmarks or [], p.assignment, p.strategy.sim_config(), tree=p.tree)
