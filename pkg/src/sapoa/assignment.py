"""Footprint-aware shortest paths and optimal robot-to-target dispatch."""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .world import MOVES, Cell, World, clearance_radius

STAY: Cell = (0, 0)
UNREACHABLE = -1


class InfeasibleDispatch(ValueError):
    pass


@dataclass
class FootprintPath:
    waypoints: list
    moves: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.moves)

    @property
    def length(self) -> int:
        return len(self.moves)


def dilate(cells: Iterable[Cell], radius: int) -> set:
    """Chebyshev dilation of a cell set."""
    cells = set(cells)
    if radius <= 0:
        return cells
    r = range(-radius, radius + 1)
    return {(x + dx, y + dy) for x, y in cells for dx in r for dy in r}


def placement_cells(footprint: Iterable[Cell], ref: Cell) -> frozenset:
    return frozenset((ref[0] + fx, ref[1] + fy) for fx, fy in footprint)


def _auto_bounds(footprint, start, goal, blocked) -> tuple[int, int, int, int]:
    pts = list(blocked) + [start, goal]
    pts += [(start[0] + fx, start[1] + fy) for fx, fy in footprint]
    pts += [(goal[0] + fx, goal[1] + fy) for fx, fy in footprint]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    pad = 2 + max(max(abs(f[0]), abs(f[1])) for f in footprint)
    return min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad


def astar(footprint: Iterable[Cell], start: Cell, goal: Cell, blocked: Iterable[Cell],
          clearance_units: int = 0, bounds: Optional[tuple] = None) -> Optional[FootprintPath]:
    """Shortest translate-only path of a rigid footprint.

    ``footprint`` holds cell offsets relative to the reference cell that is
    moved from ``start`` to ``goal``.  Every placement keeps at least
    ``clearance_units`` from ``blocked``.  ``bounds`` is ``(width, height)``
    of the grid or an inclusive ``(x0, y0, x1, y1)`` box; by default a box
    padded around everything involved.
    """
    footprint = list(footprint) or [(0, 0)]
    forbidden = dilate(blocked, clearance_radius(clearance_units))
    if bounds is None:
        x0, y0, x1, y1 = _auto_bounds(footprint, start, goal, forbidden)
    elif len(bounds) == 2:
        x0, y0, x1, y1 = 0, 0, bounds[0] - 1, bounds[1] - 1
    else:
        x0, y0, x1, y1 = bounds

    def ok(p):
        for fx, fy in footprint:
            c = (p[0] + fx, p[1] + fy)
            if not (x0 <= c[0] <= x1 and y0 <= c[1] <= y1) or c in forbidden:
                return False
        return True

    if not ok(start):
        raise ValueError("start placement collides")
    if not ok(goal):
        return None

    def h(p):
        return abs(p[0] - goal[0]) + abs(p[1] - goal[1])

    g = {start: 0}
    parent = {start: None}
    heap = [(h(start), start[1], start[0], start)]
    closed = set()
    while heap:
        _f, _iy, _ix, p = heapq.heappop(heap)
        if p in closed:
            continue
        if p == goal:
            break
        closed.add(p)
        for dx, dy in MOVES:
            q = (p[0] + dx, p[1] + dy)
            if q in closed:
                continue
            ng = g[p] + 1
            if ng < g.get(q, 1 << 60) and ok(q):
                g[q] = ng
                parent[q] = p
                heapq.heappush(heap, (ng + h(q), q[1], q[0], q))
    else:
        return None
    if goal not in parent:
        return None
    pts = [goal]
    while parent[pts[-1]] is not None:
        pts.append(parent[pts[-1]])
    pts.reverse()
    moves = [(b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:])]
    return FootprintPath(pts, moves)


# --- grid distance fields (shared with navigation) -----------------------------

def placement_mask(footprint: Iterable[Cell], blocked: np.ndarray) -> np.ndarray:
    """``mask[iy, ix]`` is True where the footprint anchored at (ix, iy) fits."""
    h, w = blocked.shape
    ok = np.ones((h, w), dtype=bool)
    for fx, fy in footprint:
        shifted = np.ones((h, w), dtype=bool)
        ys = slice(max(0, -fy), min(h, h - fy))
        xs = slice(max(0, -fx), min(w, w - fx))
        ys_src = slice(ys.start + fy, ys.stop + fy)
        xs_src = slice(xs.start + fx, xs.stop + fx)
        if ys.start < ys.stop and xs.start < xs.stop:
            shifted[ys, xs] = blocked[ys_src, xs_src]
        ok &= ~shifted
    return ok


def distance_field(free: np.ndarray, goals: Iterable[Cell]) -> list:
    """Breadth-first step counts to the nearest goal over a free mask.

    Returns a flat list indexed ``iy * width + ix``; unreachable entries are
    ``UNREACHABLE``.
    """
    h, w = free.shape
    flat = free.ravel().tolist()
    dist = [UNREACHABLE] * (h * w)
    queue = deque()
    for gx, gy in goals:
        if 0 <= gx < w and 0 <= gy < h:
            i = gy * w + gx
            if flat[i] and dist[i] == UNREACHABLE:
                dist[i] = 0
                queue.append(i)
    while queue:
        i = queue.popleft()
        d = dist[i] + 1
        x = i % w
        if x + 1 < w and flat[i + 1] and dist[i + 1] == UNREACHABLE:
            dist[i + 1] = d
            queue.append(i + 1)
        if x > 0 and flat[i - 1] and dist[i - 1] == UNREACHABLE:
            dist[i - 1] = d
            queue.append(i - 1)
        j = i + w
        if j < h * w and flat[j] and dist[j] == UNREACHABLE:
            dist[j] = d
            queue.append(j)
        j = i - w
        if j >= 0 and flat[j] and dist[j] == UNREACHABLE:
            dist[j] = d
            queue.append(j)
    return dist


# --- dispatch --------------------------------------------------------------

@dataclass
class CostMatrix:
    entries: np.ndarray  # int, UNREACHABLE where no path

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def to_csv(self) -> str:
        return "".join(",".join(str(int(v)) for v in row) + "\n" for row in self.entries)


@dataclass
class Assignment:
    mapping: tuple  # mapping[i] = column assigned to robot i
    total_cost: int


def cost_matrix(robots: Sequence[Cell], targets: Sequence[Cell], world: World) -> CostMatrix:
    """Single-robot shortest path lengths around obstacles (other robots ignored)."""
    if len(robots) != len(targets):
        raise ValueError("robots and targets differ in number")
    free = ~world.obstacle_grid()
    out = np.full((len(robots), len(targets)), UNREACHABLE, dtype=np.int64)
    for j, t in enumerate(targets):
        if not world.in_bounds(t) or not free[t[1], t[0]]:
            continue
        field_ = distance_field(free, [t])
        for i, r in enumerate(robots):
            out[i, j] = field_[r[1] * world.width + r[0]]
    return CostMatrix(out)


def _as_array(matrix) -> np.ndarray:
    if isinstance(matrix, CostMatrix):
        matrix = matrix.entries
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("cost matrix must be square")
    return a


def hungarian(matrix) -> Assignment:
    """Minimum-cost permutation; lexicographically smallest mapping among ties.

    Entries equal to ``UNREACHABLE`` (negative) are forbidden.
    """
    a = _as_array(matrix)
    n = a.shape[0]
    if n == 0:
        return Assignment((), 0)
    reachable = a >= 0
    big = int(a[reachable].sum()) + 1 if reachable.any() else 1
    work = np.where(reachable, a, big).astype(np.int64)

    def solve(cost):
        r, c = linear_sum_assignment(cost)
        return int(cost[r, c].sum())

    best = solve(work)
    if best >= big:
        raise InfeasibleDispatch("infeasible dispatch: no permutation avoids unreachable entries")
    # fix rows one at a time to the smallest column that keeps the optimum
    mapping = []
    rows = list(range(n))
    cols = list(range(n))
    acc = 0
    for i in range(n):
        for j in sorted(cols):
            if work[i, j] >= big:
                continue
            rest_r = [r for r in rows if r != i]
            rest_c = [c for c in cols if c != j]
            rest = solve(work[np.ix_(rest_r, rest_c)]) if rest_r else 0
            if acc + work[i, j] + rest == best:
                mapping.append(j)
                acc += int(work[i, j])
                rows.remove(i)
                cols.remove(j)
                break
    return Assignment(tuple(mapping), best)
