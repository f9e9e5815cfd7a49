"""Target extension: level-by-level separation and exploration of target pairs.

Each internal tree node at the current level becomes a pair of subgroups.
Separation pushes the subgroups apart along the axis of the cut that made
them; when that is stuck, exploration translates the whole pair one cell
in a random free direction.  Once every pair of the level is separated the
positions of all groups are saved as that level's landmarks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembly_tree import AssemblyNode
from .world import MOVES, Cell, World, clearance_radius, offset_between, sorted_cells, translate

AXIS_STEP = {"x": (1, 0), "y": (0, 1)}


class ExtensionFailure(RuntimeError):
    def __init__(self, level: int, iterations: int):
        super().__init__(f"extension failed at level {level} after {iterations} iterations")
        self.level = level
        self.iterations = iterations


@dataclass
class ExtensionConfig:
    separation_units: int = 4
    max_iterations: Optional[int] = None  # default: 10 * width * height
    rng_seed: int = 0
    paired: bool = True  # False: no separation, groups explore on their own

    def __post_init__(self):
        if self.separation_units < 2:
            raise ValueError("separation_units must be at least 2")
        if self.max_iterations is not None and self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")


@dataclass
class LandmarkRecord:
    level: int
    entries: list  # [(group_id, frozenset cells)], ordered by group id

    def cells_of(self, group_id: int) -> frozenset:
        for gid, cells in self.entries:
            if gid == group_id:
                return cells
        raise KeyError(group_id)

    def as_dict(self) -> dict:
        return dict(self.entries)


@dataclass
class TargetPair:
    """Two subgroups cut from one node; ``right`` is None for a leaf at the level."""
    left: int  # group ids
    right: Optional[int]
    axis: Optional[str]
    separated: bool = False

    @property
    def members(self) -> tuple:
        return (self.left,) if self.right is None else (self.left, self.right)


class MapState:
    """Mutable placement of target groups on a world during extension."""

    def __init__(self, world: World, groups: Optional[dict] = None, separation_units: int = 4):
        self.world = world
        self.groups: dict[int, frozenset] = dict(groups or {})
        self.separation_units = separation_units
        self.radius = clearance_radius(separation_units)
        self._owner: dict[Cell, int] = {}
        for gid, cells in self.groups.items():
            for c in cells:
                self._owner[c] = gid

    def set(self, gid: int, cells: frozenset) -> None:
        for c in self.groups.get(gid, ()):
            if self._owner.get(c) == gid:
                del self._owner[c]
        self.groups[gid] = cells
        for c in cells:
            self._owner[c] = gid

    def remove(self, gid: int) -> None:
        for c in self.groups.pop(gid):
            if self._owner.get(c) == gid:
                del self._owner[c]

    def gap_ok(self, a: int, b: int) -> bool:
        """True when groups ``a`` and ``b`` are at least ``separation_units`` apart."""
        r = self.radius
        other = self.groups[b]
        for x, y in self.groups[a]:
            for dx in range(-r, r + 1):
                for dy in range(-r, r + 1):
                    if (x + dx, y + dy) in other:
                        return False
        return True

    def fits(self, cells, movers: tuple = (), partners: tuple = ()) -> bool:
        """Placement is in bounds, off obstacles, and clear of every other group.

        ``movers`` (the groups being moved) are ignored; ``partners`` must
        merely not be overlapped.
        """
        w = self.world
        r = self.radius
        owner = self._owner
        for c in cells:
            if not (0 <= c[0] < w.width and 0 <= c[1] < w.height) or c in w.obstacles:
                return False
        for x, y in cells:
            for dx in range(-r, r + 1):
                for dy in range(-r, r + 1):
                    g = owner.get((x + dx, y + dy))
                    if g is None or g in movers:
                        continue
                    if g in partners:
                        if dx == 0 and dy == 0:
                            return False
                        continue
                    return False
        return True


    def crowded(self, members: tuple) -> bool:
        """Some obstacle or non-member group lies no more than ``separation_units`` away."""
        reach = self.separation_units // 2 + 1
        w = self.world
        owner = self._owner
        for gid in members:
            for x, y in self.groups[gid]:
                for dx in range(-reach, reach + 1):
                    for dy in range(-reach, reach + 1):
                        c = (x + dx, y + dy)
                        if c in w.obstacles:
                            return True
                        g = owner.get(c)
                        if g is not None and g not in members:
                            return True
        return False


def _moved(cells: frozenset, step: Cell, sign: int) -> frozenset:
    return translate(cells, sign * step[0], sign * step[1])


def separate(pair: TargetPair, state: MapState) -> TargetPair:
    """Push the two subgroups one cell apart along the pair's axis, where free."""
    if pair.right is None:
        pair.separated = True
        return pair
    if pair.separated or state.gap_ok(pair.left, pair.right):
        pair.separated = True
        return pair
    step = AXIS_STEP[pair.axis]
    for gid, sign in ((pair.left, -1), (pair.right, 1)):
        dest = _moved(state.groups[gid], step, sign)
        partner = pair.right if gid == pair.left else pair.left
        if state.fits(dest, movers=(gid,), partners=(partner,)):
            state.set(gid, dest)
    pair.separated = state.gap_ok(pair.left, pair.right)
    return pair


def _explore_unit(members: tuple, state: MapState, rng: np.random.Generator,
                  partners: tuple = ()) -> bool:
    """Translate ``members`` together one cell in a random admissible direction."""
    options = []
    for dx, dy in MOVES:
        dests = [translate(state.groups[g], dx, dy) for g in members]
        if all(state.fits(d, movers=members, partners=partners) for d in dests):
            options.append(dests)
    if not options:
        return False
    choice = options[int(rng.integers(len(options)))]
    for g, d in zip(members, choice):
        state.set(g, d)
    return True


def explore(pairs: list, state: MapState, rng: np.random.Generator,
            paired: bool = True) -> list:
    """Random one-cell moves for every pair (or group, when unpaired).

    Unseparated pairs always move; separated ones move only while something
    is still within the separation distance, which frees room for the
    pairs that are stuck.  Randomness is consumed in pair order, left
    before right when unpaired.
    """
    for pair in pairs:
        if pair.right is None:
            if state.crowded(pair.members):
                _explore_unit(pair.members, state, rng)
            continue
        both = (pair.left, pair.right)
        if paired:
            if not pair.separated or state.crowded(both):
                _explore_unit(both, state, rng)
        else:
            for gid in both:
                if not pair.separated or state.crowded((gid,)):
                    other = pair.right if gid == pair.left else pair.left
                    _explore_unit((gid,), state, rng, partners=(other,))
        pair.separated = state.gap_ok(pair.left, pair.right)
    return pairs


def extend_targets(tree: AssemblyNode, world: World, config: Optional[ExtensionConfig] = None
                   ) -> tuple[list, int]:
    """Expand the target structure level by level.

    Returns ``(records, iterations)``: one :class:`LandmarkRecord` per level
    containing every group present after that level separated, and the total
    number of loop iterations.  Raises :class:`ExtensionFailure` when a level
    exceeds ``config.max_iterations``.
    """
    config = config or ExtensionConfig()
    cap = config.max_iterations or 10 * world.width * world.height
    rng = np.random.default_rng(config.rng_seed)
    state = MapState(world, {tree.id: tree.targets}, config.separation_units)
    records, total = [], 0
    for level in range(tree.depth):
        pairs = []
        for node in tree.nodes_at(level):
            if node.is_leaf:
                # leaves of this level take part in exploration on their own
                if node.parent is not None:
                    pairs.append(TargetPair(node.id, None, None, True))
                continue
            off = offset_between(node.targets, state.groups[node.id])
            state.remove(node.id)
            for child in node.children:
                state.set(child.id, translate(child.targets, *off))
            pairs.append(TargetPair(node.l_child.id, node.r_child.id, node.axis))
        for pair in pairs:
            pair.separated = pair.right is None or state.gap_ok(pair.left, pair.right)
        iterations = 0
        while not all(p.separated for p in pairs):
            iterations += 1
            if iterations > cap:
                raise ExtensionFailure(level, iterations)
            if config.paired:
                for pair in pairs:
                    separate(pair, state)
            if not all(p.separated for p in pairs):
                explore(pairs, state, rng, paired=config.paired)
        total += iterations
        entries = [(gid, state.groups[gid]) for gid in sorted(state.groups)]
        records.append(LandmarkRecord(level, entries))
    return records, total


def landmarks_to_json(records: list) -> list:
    return [
        [{"group_id": gid, "cells": [list(c) for c in sorted_cells(cells)]}
         for gid, cells in rec.entries]
        for rec in records
    ]


def landmarks_from_json(data: list) -> list:
    return [
        LandmarkRecord(level, [(e["group_id"], frozenset(tuple(c) for c in e["cells"]))
                               for e in entries])
        for level, entries in enumerate(data)
    ]


def dump_landmarks(records: list) -> str:
    return json.dumps(landmarks_to_json(records), sort_keys=True)
