import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sapoa.assembly_tree import build_tree
from sapoa.extension import (ExtensionConfig, ExtensionFailure, MapState, TargetPair,
                             dump_landmarks, explore, extend_targets, landmarks_from_json,
                             landmarks_to_json, separate)
from sapoa.world import World, group_gap_units, offset_between, parse_world, translate


def empty_world(size=36, targets=((17, 17), (18, 17))):
    robots = tuple((x, 0) for x in range(len(targets)))
    return World(size, size, frozenset(), robots, tuple(targets))


def test_config_validation():
    with pytest.raises(ValueError):
        ExtensionConfig(separation_units=1)
    with pytest.raises(ValueError):
        ExtensionConfig(max_iterations=0)


def test_separate_adjacent_singletons():
    w = empty_world()
    state = MapState(w, {1: frozenset({(17, 17)}), 2: frozenset({(18, 17)})})
    pair = TargetPair(1, 2, "x")
    for _ in range(2):
        separate(pair, state)
    assert pair.separated
    assert group_gap_units(state.groups[1], state.groups[2]) == 4
    # both sides step away along the cut axis
    assert state.groups[1] == {(16, 17)} and state.groups[2] == {(19, 17)}


def test_separate_blocked_both_sides():
    w = parse_world("#TT#\n.RR.\n")
    state = MapState(w, {1: frozenset({(1, 0)}), 2: frozenset({(2, 0)})})
    pair = separate(TargetPair(1, 2, "x"), state)
    assert not pair.separated
    assert state.groups == {1: {(1, 0)}, 2: {(2, 0)}}


def test_separate_one_side_blocked_moves_other():
    w = parse_world("#TT...\nRR....\n")
    state = MapState(w, {1: frozenset({(1, 0)}), 2: frozenset({(2, 0)})})
    separate(TargetPair(1, 2, "x"), state)
    assert state.groups == {1: {(1, 0)}, 2: {(3, 0)}}


def test_separate_already_separated_unchanged():
    w = empty_world()
    groups = {1: frozenset({(10, 10)}), 2: frozenset({(20, 10)})}
    state = MapState(w, groups)
    pair = separate(TargetPair(1, 2, "x"), state)
    assert pair.separated and state.groups == groups


def test_explore_single_pair_moves_one_cell():
    w = empty_world()
    groups = {1: frozenset({(17, 17)}), 2: frozenset({(18, 17)})}
    state = MapState(w, groups)
    explore([TargetPair(1, 2, "x")], state, np.random.default_rng(0))
    off = offset_between(groups[1], state.groups[1])
    assert abs(off[0]) + abs(off[1]) == 1
    assert translate(groups[2], *off) == state.groups[2]


def test_explore_boxed_pair_stays():
    w = parse_world("####\n#TT#\n####\n....\n.RR.\n")
    groups = {1: frozenset({(1, 1)}), 2: frozenset({(2, 1)})}
    state = MapState(w, groups)
    explore([TargetPair(1, 2, "x")], state, np.random.default_rng(0))
    assert state.groups == groups


def test_explore_is_seed_deterministic():
    w = empty_world()

    def moves(seed):
        state = MapState(w, {1: frozenset({(17, 17)}), 2: frozenset({(18, 17)})})
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(20):
            explore([TargetPair(1, 2, "x")], state, rng)
            out.append(state.groups[1])
        return out

    assert moves(5) == moves(5)


def test_single_target_gives_no_records():
    w = World(5, 5, frozenset(), ((0, 0),), ((2, 2),))
    assert extend_targets(build_tree(w.targets), w) == ([], 0)


def test_sealed_targets_fail_at_level_zero():
    w = parse_world("#####\n##T##\n##T##\n#####\n.RR..\n")
    with pytest.raises(ExtensionFailure, match="extension failed at level 0") as info:
        extend_targets(build_tree(w.targets), w)
    assert info.value.level == 0
    assert info.value.iterations == 10 * w.width * w.height + 1


def _check_records(tree, world, records, units):
    nodes = {n.id: n for n in tree.walk()}
    assert len(records) == tree.depth
    for level, rec in enumerate(records):
        groups = rec.as_dict()
        expected = {n.id for n in nodes.values()
                    if n.level == level + 1 or (n.is_leaf and 0 < n.level <= level)}
        assert set(groups) == expected
        for gid, cells in groups.items():
            # rigid translate of the original target group, off obstacles
            off = offset_between(nodes[gid].targets, cells)
            assert translate(nodes[gid].targets, *off) == cells
            assert not cells & world.obstacles
            assert all(world.in_bounds(c) for c in cells)
        ids = sorted(groups)
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                assert not groups[a] & groups[b]
        for n in nodes.values():
            if n.level == level and not n.is_leaf:
                a, b = (c.id for c in n.children)
                assert group_gap_units(groups[a], groups[b]) >= units


def test_bridge_extension_invariants(suite):
    w = suite[0]
    tree = build_tree(w.targets)
    records, steps = extend_targets(tree, w, ExtensionConfig(rng_seed=3))
    assert steps >= tree.depth - 1
    _check_records(tree, w, records, 4)


@given(idx=st.integers(0, 24), seed=st.integers(0, 2**16), units=st.sampled_from([2, 4]))
def test_extension_invariants_on_suite(idx, seed, units, suite):
    w = suite[idx]
    tree = build_tree(w.targets)
    cfg = ExtensionConfig(separation_units=units, rng_seed=seed)
    try:
        records, _ = extend_targets(tree, w, cfg)
    except ExtensionFailure:
        return
    _check_records(tree, w, records, units)
    assert extend_targets(tree, w, cfg)[0] == records


def test_unpaired_mode_keeps_invariants(suite):
    w = suite[3]
    tree = build_tree(w.targets)
    records, _ = extend_targets(tree, w, ExtensionConfig(rng_seed=1, paired=False))
    _check_records(tree, w, records, 4)


def test_landmark_json_round_trip(suite):
    w = suite[5]
    records, _ = extend_targets(build_tree(w.targets), w, ExtensionConfig(rng_seed=2))
    data = json.loads(dump_landmarks(records))
    assert data == landmarks_to_json(records)
    assert all(set(e) == {"group_id", "cells"} for level in data for e in level)
    assert landmarks_from_json(data) == records
