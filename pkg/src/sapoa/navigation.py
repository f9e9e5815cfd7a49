"""Synchronous grid simulation of the navigation and docking stage.

The run starts with every robot on its dispatched leaf landmark (or, on
request, drives them there first).  Docking then replays the extension
backwards one tree level at a time: the partners of the deepest level
head for their docking placements inside the parent's landmark while the
other groups return to the places they held before that level was
extended.  Partners dock when one of them is one move away and the other
already sits in its own docking placement.

All groups propose a unit move per tick; conflicts are resolved in
priority order (lower group id first) and at most one dock happens per
tick.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly_tree import AssemblyNode
from .assignment import distance_field, placement_mask
from .world import (MOVES, Cell, Group, World, anchor, clearance_radius, connected_components,
                    offset_between, sorted_cells, translate)

SUCCESS = "success"


@dataclass
class SimConfig:
    clearance_units: int = 2   # gap kept between groups that are not docking
    naive: bool = False        # dock on any contact, no pairs or landmarks
    wait_steps: int = 3
    max_ticks: Optional[int] = None  # default 20 * (width + height)
    stall_ticks: int = 50
    visibility: int = 5        # cells; other groups seen when replanning
    # drive robots from their start cells to the leaf landmarks inside the
    # simulation; by default the run begins once dispatch is complete
    simulate_dispatch: bool = False


@dataclass
class Trace:
    steps: list                # [{gid: frozenset cells}] per tick, tick 0 first
    dock_events: list          # [(tick, a, b, merged)]
    makespan: Optional[int]
    total_moves: Optional[int]
    outcome: str
    meta: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.outcome == SUCCESS

    def to_json(self) -> dict:
        return {
            "meta": self.meta,
            "steps": [{"tick": t, "groups": [{"id": gid, "cells": [list(c) for c in sorted_cells(cells)]}
                                             for gid, cells in sorted(step.items())]}
                      for t, step in enumerate(self.steps)],
            "dock_events": [list(e) for e in self.dock_events],
            "outcome": self.outcome,
            "makespan": self.makespan,
            "total_moves": self.total_moves,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, data: dict) -> "Trace":
        steps = [{g["id"]: frozenset(tuple(c) for c in g["cells"]) for g in s["groups"]}
                 for s in sorted(data["steps"], key=lambda s: s["tick"])]
        return cls(steps, [tuple(e) for e in data["dock_events"]], data.get("makespan"),
                   data.get("total_moves"), data["outcome"], data.get("meta", {}))


# --- docking predicates ----------------------------------------------------

def one_step_from(cells: frozenset, goal: frozenset) -> bool:
    return any(translate(cells, dx, dy) == goal for dx, dy in MOVES)


def check_dock(g_i: Group, g_j: Group, goals: dict) -> bool:
    """Docking conditions for partners ``g_i`` and ``g_j``.

    ``g_i`` is one move away from covering its goal and ``g_j`` already
    covers its own goal.  ``goals`` maps group id to docking cells.
    """
    return (one_step_from(g_i.cells, goals[g_i.id])
            and g_j.cells == goals[g_j.id])


# --- simulation state ------------------------------------------------------

class _G:
    __slots__ = ("gid", "cells", "node", "members", "phase", "wait", "plan", "plan_key",
                 "footprint", "goal", "detour")

    def __init__(self, gid, cells, node=None, robots=None, phase="dispatch", goal=None):
        self.gid = gid
        self.cells = frozenset(cells)
        self.node = node
        self.phase = phase
        self.wait = 0
        self.detour = False  # replan around neighbours once the wait is over
        self.plan = None
        self.plan_key = None
        self.goal = goal  # naive mode: target cells, None once no translation reaches them
        a = anchor(self.cells)
        self.footprint = frozenset((x - a[0], y - a[1]) for x, y in self.cells)
        # robot index -> offset from the anchor cell
        self.members = {r: (c[0] - a[0], c[1] - a[1]) for r, c in (robots or {}).items()}

    @property
    def ref(self) -> Cell:
        return anchor(self.cells)


class SimState:
    """Everything a run mutates: groups, tick counter, dock log, caches."""

    def __init__(self, world: World, config: SimConfig, tree: Optional[AssemblyNode],
                 landmarks: list, robot_goals: list):
        self.world = world
        self.config = config
        self.tree = tree
        self.tick = 0
        self.dock_log: list = []
        self.radius = clearance_radius(config.clearance_units)
        self.obstacles = world.obstacle_grid()
        self._masks: dict = {}
        self._fields: dict = {}
        self.groups: dict[int, _G] = {}
        self.landmark: dict[int, frozenset] = {}
        self.goal: dict[int, frozenset] = {}
        self.partner: dict[int, int] = {}
        self.nodes: dict[int, AssemblyNode] = {}
        self.records: list = []
        self.stage = 0
        if tree is not None:
            self._index_tree(tree, landmarks)
        self.robot_target = list(robot_goals) if config.naive else []
        for i, start in enumerate(world.robots):
            if config.naive:
                gid = i
                g = _G(gid, [start], None, {i: start}, "pair", goal=frozenset([robot_goals[i]]))
            else:
                gid = robot_goals[i]  # leaf node id
                if not config.simulate_dispatch:
                    (start,) = self.records[-1][gid] if self.records else self.landmark[gid]
                g = _G(gid, [start], self.nodes[gid], {i: start}, "dispatch")
            self.groups[gid] = g
        self.next_id = max(self.groups) + 1 if config.naive else len(self.nodes)

    def _index_tree(self, tree: AssemblyNode, landmarks: list) -> None:
        by_level = [rec.as_dict() for rec in landmarks]
        self.records = by_level
        for n in tree.walk():
            self.nodes[n.id] = n
            self.landmark[n.id] = tree.targets if n.parent is None else by_level[n.level - 1][n.id]
        for n in tree.walk():
            if n.parent is not None:
                p = n.parent
                off = offset_between(p.targets, self.landmark[p.id])
                self.goal[n.id] = translate(n.targets, *off)
                self.partner[n.id] = n.partner().id

    # --- geometry helpers ----------------------------------------------

    @staticmethod
    def robot_cells(g: _G) -> dict:
        a = g.ref
        return {r: (a[0] + ox, a[1] + oy) for r, (ox, oy) in g.members.items()}

    def in_bounds(self, cells) -> bool:
        w, h = self.world.width, self.world.height
        return all(0 <= x < w and 0 <= y < h for x, y in cells)

    def obstacle_free(self, cells) -> bool:
        obs = self.world.obstacles
        return self.in_bounds(cells) and not any(c in obs for c in cells)

    def static_mask(self, footprint: frozenset) -> np.ndarray:
        m = self._masks.get(footprint)
        if m is None:
            m = placement_mask(footprint, self.obstacles)
            self._masks[footprint] = m
        return m

    def static_field(self, footprint: frozenset, objective: frozenset) -> list:
        key = (footprint, objective)
        f = self._fields.get(key)
        if f is None:
            f = distance_field(self.static_mask(footprint), objective)
            self._fields[key] = f
        return f

    # --- roles -----------------------------------------------------------

    def objective(self, g: _G) -> Optional[frozenset]:
        """Anchor placements the group is heading for, or None to hold still."""
        if self.config.naive:
            if g.goal is None or g.cells == g.goal:
                return None
            return frozenset([anchor(g.goal)])
        if g.phase == "dispatch":
            return frozenset([anchor(self.station(g.gid))])
        if g.phase != "pair":
            return None
        goal = self.goal[g.gid]
        if g.cells == goal:
            return None
        mate = self.groups[self.partner[g.gid]]
        if g.gid < mate.gid or mate.cells == self.goal[mate.gid]:
            return frozenset([anchor(goal)])
        approach = self.approach_placements(g.gid)
        if g.cells in approach:
            return None
        return frozenset(anchor(c) for c in approach) or frozenset([anchor(goal)])

    def approach_placements(self, gid: int) -> list:
        """One-move-from-goal placements that do not touch the partner's goal by a side."""
        goal = self.goal[gid]
        mate_goal = self.goal[self.partner[gid]]
        side = {(x + dx, y + dy) for x, y in mate_goal for dx, dy in MOVES}
        out = []
        for dx, dy in MOVES:
            cells = translate(goal, dx, dy)
            if not self.obstacle_free(cells) or cells & mate_goal:
                continue
            if self.radius > 0 and cells & side:
                continue
            out.append(cells)
        return out

    def station(self, gid: int) -> frozenset:
        """Placement a group not currently docking should hold.

        Stage ``s`` replays the extension of tree level ``s - 1`` backwards:
        pairs on level ``s`` dock from their landmarks into their parent's
        landmark while every shallower group returns to where it stood
        before that extension level (the level ``s - 2`` record).
        """
        node = self.nodes[gid]
        if node.level >= self.stage or self.stage < 2:
            return self.landmark[gid]
        rec = self.records[self.stage - 2]
        return rec.get(gid, self.landmark[gid])

    def update_phases(self) -> bool:
        """Advance dispatch/landmark/pair phases; True when anything changed."""
        if self.config.naive:
            return False
        changed = False
        stage = max(g.node.level for g in self.groups.values())
        if stage != self.stage:
            self.stage = stage
            changed = True
        for g in self.groups.values():
            if g.phase in ("dispatch", "landmark"):
                phase = "landmark" if g.cells == self.station(g.gid) else "dispatch"
                if phase != g.phase:
                    g.phase = phase
                    g.plan = None
                    changed = True
        for g in self.groups.values():
            if g.phase == "landmark" and g.gid in self.partner and g.node.level == stage:
                mate = self.groups.get(self.partner[g.gid])
                if mate is not None and mate.phase in ("landmark", "pair"):
                    g.phase = mate.phase = "pair"
                    g.plan = mate.plan = None
                    changed = True
        return changed

    # --- validity --------------------------------------------------------

    def _contacts(self, gid: int, cells, occ: dict) -> dict:
        """Other groups near ``cells``: gid -> [overlap, side_contact, min chebyshev]."""
        r = max(self.radius, 1)
        out = {}
        for x, y in cells:
            for dx in range(-r, r + 1):
                for dy in range(-r, r + 1):
                    h = occ.get((x + dx, y + dy))
                    if h is None or h == gid:
                        continue
                    d = max(abs(dx), abs(dy))
                    rec = out.get(h)
                    if rec is None:
                        rec = out[h] = [False, False, d]
                    if d == 0:
                        rec[0] = True
                    elif abs(dx) + abs(dy) == 1:
                        rec[1] = True
                    rec[2] = min(rec[2], d)
        return out

    def near_goal(self, gid: int, cells: frozenset) -> bool:
        goal = self.goal[gid]
        return cells == goal or one_step_from(cells, goal)

    def judge(self, gid: int, cells: frozenset, occ: dict, moved: set = frozenset()):
        """Classify a placement: ``(ok, blockers, dock_with)``."""
        if not self.obstacle_free(cells):
            return False, set(), None
        contacts = self._contacts(gid, cells, occ)
        blockers, dock = set(), None
        naive = self.config.naive
        mate = None if naive else self.partner.get(gid)
        for h, (overlap, side, dist) in contacts.items():
            if overlap:
                blockers.add(h)
                continue
            if naive:
                goal = self.groups[gid].goal
                if goal is not None and (cells == goal or one_step_from(cells, goal)):
                    # final approach: attach to whatever it touches
                    if side and (dock is None or h < dock):
                        dock = h
                elif dist <= self.radius:
                    blockers.add(h)
                continue
            violation = dist <= self.radius
            if h == mate and self.groups[gid].phase == "pair":
                hg = self.groups[h]
                mate_cells = hg.cells
                if cells == self.goal[gid] and mate_cells == self.goal[h] and h not in moved:
                    dock = h
                # partners on their docking approach may close the gap
                continue
            if violation or (side and self.radius > 0):
                blockers.add(h)
        return not blockers, blockers, dock

    # --- planning --------------------------------------------------------

    def _visible(self, g: _G) -> list:
        xs = [c[0] for c in g.cells]
        ys = [c[1] for c in g.cells]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        v = self.config.visibility
        out = []
        for h in self.groups.values():
            if h.gid == g.gid:
                continue
            if any(x0 - v <= x <= x1 + v and y0 - v <= y <= y1 + v for x, y in h.cells):
                out.append(h)
        return out

    def dynamic_field(self, g: _G, objective: frozenset) -> list:
        blocked = self.obstacles.copy()
        r = self.radius
        h_, w_ = blocked.shape
        visible = self._visible(g)
        for h in visible:
            for x, y in h.cells:
                blocked[max(0, y - r):y + r + 1, max(0, x - r):x + r + 1] = True
        mask = placement_mask(g.footprint, blocked)
        goal = g.goal if self.config.naive else self.goal.get(g.gid)
        if g.phase == "pair" and goal is not None:
            occ = {c: h.gid for h in visible for c in h.cells}
            special = [goal] + [translate(goal, dx, dy) for dx, dy in MOVES]
            special += [translate(g.footprint, *p) for p in objective]
            for cells in special:
                a = anchor(cells)
                if 0 <= a[0] < w_ and 0 <= a[1] < h_:
                    ok, _b, _d = self.judge(g.gid, cells, occ)
                    mask[a[1], a[0]] = ok
        return distance_field(mask, objective)

    def descend(self, field_: list, p: Cell) -> Optional[Cell]:
        w, h = self.world.width, self.world.height
        d = field_[p[1] * w + p[0]]
        if d <= 0:
            return None
        for dx, dy in MOVES:
            x, y = p[0] + dx, p[1] + dy
            if 0 <= x < w and 0 <= y < h and field_[y * w + x] == d - 1:
                return (dx, dy)
        return None

    def potential(self) -> int:
        total = 0
        for g in self.groups.values():
            obj = self.objective(g)
            if obj is None:
                continue
            d = self.static_field(g.footprint, obj)[g.ref[1] * self.world.width + g.ref[0]]
            total += d if d >= 0 else 10 * (self.world.width + self.world.height)
        return total

    def occupancy(self) -> dict:
        return {c: g.gid for g in self.groups.values() for c in g.cells}


def resolve_collisions(proposed: dict, state: SimState) -> dict:
    """Turn proposed unit moves into safe moves.

    ``proposed`` maps group id to ``(dx, dy)`` or ``None`` (stay).  A group
    stopped by another replans around it (the other keeps going); when two
    groups block each other the lower-priority one replans and the other
    waits ``wait_steps`` ticks.  Moves are then applied in priority order
    and any that would still collide, break clearance or cause a second
    dock in the tick are dropped.  The result maps group id to
    ``(move, dock_partner)``.
    """
    occ = state.occupancy()
    groups = state.groups
    blocked_by = {}
    for gid, mv in proposed.items():
        if mv is None:
            continue
        g = groups[gid]
        ok, blockers, _dock = state.judge(gid, translate(g.cells, *mv), occ)
        if not ok:
            blocked_by[gid] = blockers
    adjusted = dict(proposed)
    for gid, blockers in blocked_by.items():
        g = groups[gid]
        mutual = [h for h in blockers if gid in blocked_by.get(h, ())]
        if mutual and all(gid < h for h in mutual):
            g.wait = state.config.wait_steps
            g.detour = True
            adjusted[gid] = None
            continue
        obj = state.objective(g)
        if obj is None:
            adjusted[gid] = None
            continue
        g.plan = state.dynamic_field(g, obj)
        g.plan_key = obj
        adjusted[gid] = state.descend(g.plan, g.ref)

    result = {}
    moved = set()
    docked = False
    claim = dict(occ)
    for gid in sorted(adjusted):
        mv = adjusted[gid]
        if mv is None:
            continue
        g = groups[gid]
        cells = translate(g.cells, *mv)
        ok, _blockers, dock = state.judge(gid, cells, claim, moved)
        if not ok or (dock is not None and docked):
            g.plan = None
            continue
        if dock is not None:
            docked = True
        result[gid] = (mv, dock)
        moved.add(gid)
        for c in cells:
            claim[c] = gid
    return result


def _merge(state: SimState, a: _G, b: _G) -> _G:
    cells = a.cells | b.cells
    robots = {**state.robot_cells(a), **state.robot_cells(b)}
    if state.config.naive:
        gid = state.next_id
        state.next_id += 1
        offs = {(state.robot_target[r][0] - c[0], state.robot_target[r][1] - c[1])
                for r, c in robots.items()}
        goal = translate(cells, *offs.pop()) if len(offs) == 1 else None
        merged = _G(gid, cells, None, robots, "pair", goal=goal)
    else:
        parent = a.node.parent
        merged = _G(parent.id, cells, parent, robots, "landmark")
    del state.groups[a.gid]
    del state.groups[b.gid]
    state.groups[merged.gid] = merged
    return merged


def _resting_dock(state: SimState):
    """Partners that both sit in their docking placements but have not docked yet.

    In naive mode any two side-touching groups qualify.
    """
    if state.config.naive:
        occ = state.occupancy()
        for gid in sorted(state.groups):
            for h, (_o, side, _d) in sorted(state._contacts(gid, state.groups[gid].cells, occ).items()):
                if side:
                    return (gid, h)
        return None
    for gid in sorted(state.groups):
        g = state.groups[gid]
        mate = state.partner.get(gid)
        if g.phase != "pair" or mate not in state.groups or gid > mate:
            continue
        if g.cells == state.goal[gid] and state.groups[mate].cells == state.goal[mate]:
            return (gid, mate)
    return None


def _finished(state: SimState) -> bool:
    groups = list(state.groups.values())
    if len(groups) != 1:
        return False
    return groups[0].cells == frozenset(state.world.targets)


def run(world: World, landmarks: list, assignment, config: Optional[SimConfig] = None,
        tree: Optional[AssemblyNode] = None) -> Trace:
    """Simulate navigation until the structure is assembled or the run fails.

    ``assignment.mapping[i]`` is the dispatch column of robot ``i``.  With a
    tree, columns index ``tree.leaves()``; in naive mode they index
    ``world.targets``.
    """
    config = config or SimConfig()
    if config.naive:
        goals = [world.targets[j] for j in assignment.mapping]
    else:
        if tree is None:
            raise ValueError("paired navigation needs the assembly tree")
        leaves = tree.leaves()
        goals = [leaves[j].id for j in assignment.mapping]
    state = SimState(world, config, tree, landmarks, goals)
    max_ticks = config.max_ticks or 20 * (world.width + world.height)
    steps = [{gid: g.cells for gid, g in state.groups.items()}]
    total_moves = 0
    meta = {
        "map": world.name,
        "clearance_units": config.clearance_units,
        "naive": config.naive,
        "partners": sorted([a, b] for a, b in state.partner.items() if a < b),
    }
    state.update_phases()
    best, since = state.potential(), 0
    outcome = None
    if _finished(state):
        outcome = SUCCESS
    while outcome is None:
        if state.tick >= max_ticks:
            outcome = "fail:timeout"
            break
        state.tick += 1
        proposed = {}
        for gid in sorted(state.groups):
            g = state.groups[gid]
            if g.wait > 0:
                g.wait -= 1
                continue
            obj = state.objective(g)
            if obj is None:
                g.plan = None
                continue
            mv = None
            if g.detour:
                g.detour = False
                g.plan, g.plan_key = state.dynamic_field(g, obj), obj
            if g.plan is not None and g.plan_key == obj:
                mv = state.descend(g.plan, g.ref)
            if mv is None:
                # detours are short-lived; fall back to the obstacle-only field
                g.plan = None
                mv = state.descend(state.static_field(g.footprint, obj), g.ref)
            if mv is not None:
                proposed[gid] = mv
        moves = resolve_collisions(proposed, state)
        dock_pair = None
        for gid, (mv, dock) in moves.items():
            g = state.groups[gid]
            g.cells = translate(g.cells, *mv)
            total_moves += len(g.cells)
            if dock is not None:
                dock_pair = (gid, dock)
        changed = False
        if dock_pair is None:
            dock_pair = _resting_dock(state)
        if dock_pair is not None:
            a, b = (state.groups[i] for i in dock_pair)
            merged = _merge(state, a, b)
            state.dock_log.append((state.tick, min(a.gid, b.gid), max(a.gid, b.gid), merged.gid))
            changed = True
        changed = state.update_phases() or changed
        steps.append({gid: g.cells for gid, g in state.groups.items()})
        if _finished(state):
            outcome = SUCCESS
            break
        pot = state.potential()
        if changed:
            best, since = pot, 0
        elif pot < best:
            best, since = pot, 0
        else:
            since += 1
            if since >= config.stall_ticks:
                outcome = "fail:stuck"
    ok = outcome == SUCCESS
    return Trace(steps, list(state.dock_log), state.tick if ok else None,
                 total_moves if ok else None, outcome, meta)


# --- independent trace validation -----------------------------------------

class TraceViolation(AssertionError):
    pass


def validate_trace(trace: Trace, world: World) -> None:
    """Re-check a trace against the safety and structure invariants.

    Raises :class:`TraceViolation` describing the first problem found.
    """
    if not trace.steps:
        raise TraceViolation("empty trace")
    clearance = trace.meta.get("clearance_units", 2)
    naive = trace.meta.get("naive", False)
    partners = {frozenset(p) for p in trace.meta.get("partners", [])}
    r = clearance_radius(clearance)
    obstacles = world.obstacles
    docks = {e[0]: e for e in trace.dock_events}
    ticks = [e[0] for e in trace.dock_events]
    if any(b <= a for a, b in zip(ticks, ticks[1:])):
        raise TraceViolation("dock events are not strictly sequential")
    prev = None
    for t, step in enumerate(trace.steps):
        seen = {}
        for gid, cells in step.items():
            for c in cells:
                if not world.in_bounds(c):
                    raise TraceViolation(f"tick {t}: group {gid} out of bounds")
                if c in obstacles:
                    raise TraceViolation(f"tick {t}: group {gid} on obstacle {c}")
                if c in seen:
                    raise TraceViolation(f"tick {t}: groups {seen[c]} and {gid} overlap")
                seen[c] = gid
        if not naive and r > 0:
            items = sorted(step.items())
            for i, (ga, ca) in enumerate(items):
                for gb, cb in items[i + 1:]:
                    if frozenset((ga, gb)) in partners:
                        continue
                    if min(max(abs(p[0] - q[0]), abs(p[1] - q[1])) for p in ca for q in cb) <= r:
                        raise TraceViolation(f"tick {t}: groups {ga} and {gb} closer than clearance")
        if prev is not None:
            if len(step) > len(prev):
                raise TraceViolation(f"tick {t}: group count increased")
            expected = len(prev) - (1 if t in docks else 0)
            if len(step) != expected:
                raise TraceViolation(f"tick {t}: group count {len(step)} != {expected}")
            if t in docks:
                _t, a, b, m = docks[t]
            for gid, cells in step.items():
                if gid in prev:
                    src = prev[gid]
                    off = offset_between(src, cells)
                    if translate(src, *off) != cells or abs(off[0]) + abs(off[1]) > 1:
                        raise TraceViolation(f"tick {t}: group {gid} made an illegal move")
                elif t not in docks or gid != m:
                    raise TraceViolation(f"tick {t}: unexpected group {gid}")
        prev = step
    if trace.outcome == SUCCESS:
        final = set().union(*trace.steps[-1].values())
        if final != set(world.targets):
            raise TraceViolation("final cells differ from the targets")
        if len(connected_components(final)) != 1:
            raise TraceViolation("final structure is not connected")
        if trace.makespan != len(trace.steps) - 1:
            raise TraceViolation("makespan does not match the number of ticks")
    elif trace.makespan is not None or trace.total_moves is not None:
        raise TraceViolation("failed trace carries step counts")
