"""Grid world model: cells, groups, map text format and the benchmark suite.

A cell is an ``(ix, iy)`` tuple; ``iy`` is the row index, counted from the
first line of a map file.  Distances between groups are expressed in
*units*, where one cell is two units.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

Cell = tuple[int, int]

FREE, OBSTACLE, ROBOT, TARGET, BOTH = ".", "#", "R", "T", "X"
GLYPHS = {FREE, OBSTACLE, ROBOT, TARGET, BOTH}

UNITS_PER_CELL = 2
# obstacle band (cells) around the target bounding box used for categories
NEAR_CELLS = 6
LATTICE = 3  # robot start spacing (cells between lattice slots)
MOVES: tuple[Cell, ...] = ((1, 0), (-1, 0), (0, 1), (0, -1))


class WorldError(ValueError):
    """Raised for malformed or inconsistent maps."""


def cell_key(c: Cell) -> tuple[int, int]:
    """Canonical ordering key: row first, then column."""
    return (c[1], c[0])


def sorted_cells(cells: Iterable[Cell]) -> list[Cell]:
    return sorted(cells, key=cell_key)


def translate(cells: Iterable[Cell], dx: int, dy: int) -> frozenset:
    return frozenset((x + dx, y + dy) for x, y in cells)


def anchor(cells: Iterable[Cell]) -> Cell:
    """Smallest cell under ``cell_key``; rigid translations preserve it."""
    return min(cells, key=cell_key)


def offset_between(src: Iterable[Cell], dst: Iterable[Cell]) -> Cell:
    a, b = anchor(src), anchor(dst)
    return (b[0] - a[0], b[1] - a[1])


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


@dataclass(frozen=True)
class Group:
    id: int
    cells: frozenset
    partner_id: Optional[int] = None


def connected_components(cells: Iterable[Cell]) -> list[set]:
    """Split ``cells`` into 4-connected components.

    Components are ordered by their smallest ``(iy, ix)`` member.
    """
    remaining = set(cells)
    out = []
    for start in sorted_cells(remaining):
        if start not in remaining:
            continue
        comp = {start}
        remaining.discard(start)
        queue = deque([start])
        while queue:
            x, y = queue.popleft()
            for dx, dy in MOVES:
                n = (x + dx, y + dy)
                if n in remaining:
                    remaining.discard(n)
                    comp.add(n)
                    queue.append(n)
        out.append(comp)
    return out


def is_connected(cells: Iterable[Cell]) -> bool:
    return len(connected_components(cells)) == 1


def cell_distance(a: Iterable[Cell], b: Iterable[Cell]) -> int:
    """Minimum Chebyshev distance between two cell sets."""
    return min(chebyshev(p, q) for p in a for q in b)


def group_gap_units(a: Iterable[Cell], b: Iterable[Cell]) -> int:
    """Empty-cell gap between two groups, in units (1 cell = 2 units).

    Zero means the groups touch, by a side or a corner.
    """
    a, b = set(a), set(b)
    if not a or not b:
        raise ValueError("groups must be nonempty")
    if a & b:
        raise ValueError("groups overlap")
    return UNITS_PER_CELL * (cell_distance(a, b) - 1)


def clearance_radius(units: int) -> int:
    """Chebyshev radius (cells) that must stay free to keep a gap of ``units``."""
    return -(-units // UNITS_PER_CELL)


@dataclass(frozen=True)
class World:
    width: int
    height: int
    obstacles: frozenset
    robots: tuple
    targets: tuple
    category: Optional[int] = None
    name: str = ""
    seed: Optional[int] = None

    def __post_init__(self):
        self.validate()

    @property
    def n(self) -> int:
        return len(self.robots)

    @property
    def m(self) -> int:
        return len(self.obstacles)

    def in_bounds(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def validate(self) -> None:
        for c in (*self.obstacles, *self.robots, *self.targets):
            if not self.in_bounds(c):
                raise WorldError(f"cell {c} out of bounds")
        if len(self.robots) != len(self.targets):
            raise WorldError(
                f"count mismatch: {len(self.robots)} robots, {len(self.targets)} targets")
        if not self.targets:
            raise WorldError("map has no targets")
        if len(set(self.robots)) != len(self.robots) or len(set(self.targets)) != len(self.targets):
            raise WorldError("duplicate robot or target cell")
        if self.obstacles & (set(self.robots) | set(self.targets)):
            raise WorldError("robot or target on an obstacle")
        if not is_connected(self.targets):
            raise WorldError("targets are not connected")
        if self.category is not None and not 1 <= self.category <= 5:
            raise WorldError(f"category must be in 1..5, got {self.category}")

    def obstacle_grid(self) -> np.ndarray:
        grid = np.zeros((self.height, self.width), dtype=bool)
        for x, y in self.obstacles:
            grid[y, x] = True
        return grid

    def structurally_equal(self, other: "World") -> bool:
        return (self.width, self.height, self.obstacles, self.robots, self.targets) == (
            other.width, other.height, other.obstacles, other.robots, other.targets)


def parse_world(text: str, category: Optional[int] = None, name: str = "",
                seed: Optional[int] = None) -> World:
    """Parse the map text format.

    Glyphs: ``.`` free, ``#`` obstacle, ``R`` robot start, ``T`` target and
    ``X`` for a cell that is both a robot start and a target.  Robots and
    targets are ordered row-major.
    """
    rows = [r.rstrip("\r") for r in text.split("\n")]
    while rows and rows[-1].strip() == "":
        rows.pop()
    if not rows:
        raise WorldError("empty map")
    width = len(rows[0])
    obstacles, robots, targets = set(), [], []
    for iy, row in enumerate(rows):
        if len(row) != width:
            raise WorldError(f"row {iy} has length {len(row)}, expected {width}")
        for ix, ch in enumerate(row):
            if ch not in GLYPHS:
                raise WorldError(f"unknown glyph {ch!r} at ({ix}, {iy})")
            if ch == OBSTACLE:
                obstacles.add((ix, iy))
            if ch in (ROBOT, BOTH):
                robots.append((ix, iy))
            if ch in (TARGET, BOTH):
                targets.append((ix, iy))
    return World(width, len(rows), frozenset(obstacles), tuple(robots), tuple(targets),
                 category=category, name=name, seed=seed)


def serialize_world(world: World) -> str:
    grid = [[FREE] * world.width for _ in range(world.height)]
    for x, y in world.obstacles:
        grid[y][x] = OBSTACLE
    for x, y in world.targets:
        grid[y][x] = TARGET
    for x, y in world.robots:
        grid[y][x] = BOTH if grid[y][x] == TARGET else ROBOT
    return "".join("".join(row) + "\n" for row in grid)


def sidecar(world: World) -> dict:
    return {"name": world.name, "category": world.category, "seed": world.seed}


def load_world(path) -> World:
    """Read a map file plus its optional ``.json`` sidecar."""
    path = Path(path)
    meta = {}
    side = path.with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
    return parse_world(path.read_text(encoding="utf-8"),
                       category=meta.get("category"),
                       name=meta.get("name") or path.stem,
                       seed=meta.get("seed"))


def save_world(world: World, path) -> None:
    path = Path(path)
    path.write_text(serialize_world(world), encoding="utf-8")
    path.with_suffix(".json").write_text(json.dumps(sidecar(world), sort_keys=True) + "\n",
                                         encoding="utf-8")


# --- benchmark suite -------------------------------------------------------

SUITE_SIZE = 36
SIDES = ("left", "right", "top", "bottom")
STYLES = {1: "platform", 2: "windmill", 3: "channel", 4: "threewalls", 5: "fourwalls"}


def target_bbox(targets: Iterable[Cell]) -> tuple[int, int, int, int]:
    xs = [c[0] for c in targets]
    ys = [c[1] for c in targets]
    return min(xs), min(ys), max(xs), max(ys)


def side_band(side: str, bbox, near: int = NEAR_CELLS) -> tuple[int, int, int, int]:
    """Inclusive (x0, y0, x1, y1) band next to one side of ``bbox``."""
    x0, y0, x1, y1 = bbox
    return {
        "left": (x0 - near, y0, x0 - 1, y1),
        "right": (x1 + 1, y0, x1 + near, y1),
        "top": (x0, y0 - near, x1, y0 - 1),
        "bottom": (x0, y1 + 1, x1, y1 + near),
    }[side]


def obstacle_sides(world: World, near: int = NEAR_CELLS) -> list[str]:
    """Sides of the target region that have an obstacle within ``near`` cells."""
    bbox = target_bbox(world.targets)
    out = []
    for side in SIDES:
        bx0, by0, bx1, by1 = side_band(side, bbox, near)
        if any(bx0 <= x <= bx1 and by0 <= y <= by1 for x, y in world.obstacles):
            out.append(side)
    return out


def classify_category(world: World) -> int:
    return len(obstacle_sides(world)) + 1


def _shape_library(rng: np.random.Generator) -> list[list[Cell]]:
    """Candidate connected target shapes, 4 to 16 cells, origin at (0, 0)."""
    shapes = []
    for w, h in ((2, 2), (3, 2), (4, 2), (3, 3), (4, 3), (4, 4), (5, 2), (6, 2), (8, 2)):
        shapes.append([(x, y) for x in range(w) for y in range(h)])
    for n in (4, 5, 6, 7, 8):
        shapes.append([(x, 0) for x in range(n)])
    # staggered bridges
    shapes.append([(0, 0), (1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (4, 1)])
    shapes.append([(x, 0) for x in range(5)] + [(x, 1) for x in range(3, 8)])
    # L, T, plus, U, windmill-like
    shapes.append([(0, y) for y in range(4)] + [(1, 3), (2, 3), (3, 3)])
    shapes.append([(x, 0) for x in range(5)] + [(2, 1), (2, 2), (2, 3)])
    shapes.append([(1, 0), (0, 1), (1, 1), (2, 1), (1, 2)])
    shapes.append([(2, y) for y in range(5)] + [(x, 2) for x in (0, 1, 3, 4)])
    shapes.append([(0, y) for y in range(3)] + [(1, 2), (2, 2)] + [(3, y) for y in range(3)])
    shapes.append([(1, 0), (1, 1), (0, 1), (2, 1), (2, 2), (3, 2), (2, 3), (1, 3), (0, 3)])
    return shapes


def _wall_cells(side: str, bbox, dist: int, margin: int, thickness: int) -> set:
    x0, y0, x1, y1 = bbox
    cells = set()
    for t in range(thickness):
        if side == "left":
            x = x0 - dist - t
            cells |= {(x, y) for y in range(y0 - margin, y1 + margin + 1)}
        elif side == "right":
            x = x1 + dist + t
            cells |= {(x, y) for y in range(y0 - margin, y1 + margin + 1)}
        elif side == "top":
            y = y0 - dist - t
            cells |= {(x, y) for x in range(x0 - margin, x1 + margin + 1)}
        else:
            y = y1 + dist + t
            cells |= {(x, y) for x in range(x0 - margin, x1 + margin + 1)}
    return cells


def _robot_block(rng: np.random.Generator, n: int, region, blocked: set) -> list[Cell]:
    """Pick ``n`` random slots of a ``LATTICE``-spaced grid inside ``region``.

    Slots touching ``blocked`` (even diagonally) are skipped.
    """
    rx0, ry0, rx1, ry1 = region
    slots = [(x, y) for y in range(ry0, ry1 + 1, LATTICE) for x in range(rx0, rx1 + 1, LATTICE)
             if all((x + dx, y + dy) not in blocked for dx in (-1, 0, 1) for dy in (-1, 0, 1))]
    if len(slots) < n:
        raise WorldError("not enough room for robots")
    idx = rng.permutation(len(slots))
    return sorted((slots[i] for i in idx[:n]), key=cell_key)


def generate_map(category: int, index: int, rng: np.random.Generator,
                 size: int = SUITE_SIZE) -> World:
    """Build one map with obstacles on exactly ``category - 1`` sides of the targets."""
    shapes = _shape_library(rng)
    for _attempt in range(200):
        shape = shapes[int(rng.integers(len(shapes)))]
        if rng.random() < 0.5:
            shape = [(y, x) for x, y in shape]
        w = max(c[0] for c in shape) + 1
        h = max(c[1] for c in shape) + 1
        ox = int(rng.integers(size // 2 - w // 2 - 3, size // 2 - w // 2 + 4))
        oy = int(rng.integers(size // 2 - h // 2 - 3, size // 2 - h // 2 + 4))
        targets = [(x + ox, y + oy) for x, y in shape]
        bbox = target_bbox(targets)
        n_sides = category - 1
        if n_sides == 2:
            # channel: two opposite walls
            pair = [("left", "right"), ("top", "bottom")][int(rng.integers(2))]
            sides = list(pair)
        else:
            sides = list(rng.permutation(SIDES)[:n_sides])
        obstacles = set()
        for side in sides:
            dist = 2
            margin = int(rng.integers(1, 3)) if category < 5 else 0
            thickness = int(rng.integers(1, 3))
            obstacles |= _wall_cells(side, bbox, dist, margin, thickness)
        obstacles = {c for c in obstacles if 0 <= c[0] < size and 0 <= c[1] < size}
        free_sides = [s for s in SIDES if s not in sides] or list(SIDES)
        start_side = free_sides[int(rng.integers(len(free_sides)))]
        x0, y0, x1, y1 = bbox
        reach = 8 + int(rng.integers(0, 4))
        region = {
            "left": (max(0, x0 - reach - 7), max(0, y0 - 4), max(0, x0 - reach), min(size - 1, y1 + 4)),
            "right": (min(size - 1, x1 + reach), max(0, y0 - 4), min(size - 1, x1 + reach + 7), min(size - 1, y1 + 4)),
            "top": (max(0, x0 - 4), max(0, y0 - reach - 7), min(size - 1, x1 + 4), max(0, y0 - reach)),
            "bottom": (max(0, x0 - 4), min(size - 1, y1 + reach), min(size - 1, x1 + 4), min(size - 1, y1 + reach + 7)),
        }[start_side]
        blocked = obstacles | set(targets)
        try:
            robots = _robot_block(rng, len(targets), region, blocked)
        except WorldError:
            continue
        try:
            world = World(size, size, frozenset(obstacles), tuple(robots),
                          tuple(sorted_cells(targets)), category=category,
                          name=f"cat{category}_{STYLES[category]}_{index}")
        except WorldError:
            continue
        if classify_category(world) != category:
            continue
        if not 4 <= world.n <= 16:
            continue
        return world
    raise WorldError(f"could not generate a category {category} map")


def generate_suite(seed: int = 0) -> list[World]:
    """25 maps of 36x36 cells, five per category; deterministic in ``seed``."""
    suite = []
    for category in range(1, 6):
        for index in range(5):
            rng = np.random.default_rng([seed, category, index])
            world = generate_map(category, index, rng)
            suite.append(World(world.width, world.height, world.obstacles, world.robots,
                               world.targets, category=category, name=world.name, seed=seed))
    return suite


# --- small demonstration maps ----------------------------------------------

EXEMPLAR_SIZE = 24


def _block(x0: int, y0: int, x1: int, y1: int) -> set:
    return {(x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)}


def exemplar_maps() -> list[World]:
    """Five 24x24 maps with four robots and a 2x2 target, one per category.

    In order: a lone platform far from the targets, a long dock on one
    side, a broken bridge on two opposite sides, a three-sided boat dock,
    and four reefs around the targets.
    """
    targets = ((11, 11), (12, 11), (11, 12), (12, 12))
    robots = ((3, 20), (19, 20), (7, 21), (15, 21))
    layouts = [
        ("platform", _block(1, 2, 4, 4)),
        ("long_dock", _block(8, 4, 9, 15)),
        ("broken_bridge", _block(8, 7, 9, 16) | _block(14, 7, 15, 9) | _block(14, 11, 15, 16)),
        ("boat_dock", _block(8, 6, 9, 14) | _block(14, 6, 15, 14) | _block(8, 6, 15, 8)),
        ("four_reefs", _block(8, 10, 9, 12) | _block(14, 11, 15, 13) | _block(10, 7, 12, 8)
         | _block(11, 15, 13, 16)),
    ]
    return [World(EXEMPLAR_SIZE, EXEMPLAR_SIZE, frozenset(obst), robots, targets,
                  category=i + 1, name=f"exemplar{i + 1}_{name}")
            for i, (name, obst) in enumerate(layouts)]
