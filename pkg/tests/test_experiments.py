import re

import pytest

from sapoa.experiments import (FAIL_EXTENSION, RESULT_COLUMNS, SUMMARY_COLUMNS, CategorySummary,
                               RunRecord, bar_chart, derive_seed, frame_name, read_results,
                               render_trace, results_csv, run_one, run_suite, summarize,
                               summary_csv, write_render)
from sapoa.navigation import SUCCESS, Trace
from sapoa.strategies import KINDS, SAPOA, SAPOA_ADS
from sapoa.world import parse_world

from conftest import grid_text


def _rec(outcome=SUCCESS, makespan=10, cat=1, kind=SAPOA, ext=3):
    ok = outcome == SUCCESS
    return RunRecord("m", cat, kind, 0, outcome, ext, makespan if ok else None,
                     makespan if ok else None)


def test_derive_seed_stable_and_distinct():
    a = derive_seed(0, "map", SAPOA, 0)
    assert a == derive_seed(0, "map", SAPOA, 0)
    assert a != derive_seed(0, "map", SAPOA, 1)
    assert derive_seed(5, "map", SAPOA, 0) == a ^ 5


def test_failed_record_carries_no_steps():
    with pytest.raises(ValueError):
        RunRecord("m", 1, SAPOA, 0, FAIL_EXTENSION, None, 12, None)


def test_summary_all_success():
    [s] = summarize([_rec(), _rec(makespan=20)])
    assert (s.success_rate, s.mean_makespan, s.runs) == (1.0, 15.0, 2)


def test_summary_excludes_failures_from_means():
    [s] = summarize([_rec(makespan=10), _rec(outcome=FAIL_EXTENSION, ext=500)])
    assert s.success_rate == 0.5
    assert s.mean_makespan == 10
    assert s.mean_extension_steps == 3


def test_summary_without_successes():
    [s] = summarize([_rec(outcome=FAIL_EXTENSION)])
    assert s.success_rate == 0.0 and s.mean_makespan is None
    assert summary_csv([s]).splitlines()[1] == "1,sapoa,0.0000,,"


def test_summary_ordering():
    recs = [_rec(cat=2, kind=SAPOA_ADS), _rec(cat=1, kind=SAPOA_ADS), _rec(cat=1, kind=SAPOA)]
    assert [(s.category, s.strategy) for s in summarize(recs)] == \
        [(1, SAPOA), (1, SAPOA_ADS), (2, SAPOA_ADS)]


def test_summarize_empty():
    with pytest.raises(ValueError):
        summarize([])


def test_suite_record_count_and_columns(suite):
    recs = run_suite(suite[:2], [SAPOA, SAPOA_ADS], runs_per_map=2)
    assert len(recs) == 2 * 2 * 2
    text = results_csv(recs)
    assert tuple(text.splitlines()[0].split(",")) == RESULT_COLUMNS
    assert read_results(text) == recs
    assert tuple(summary_csv(summarize(recs)).splitlines()[0].split(",")) == SUMMARY_COLUMNS
    # wall-clock time is only measured on request
    assert all(r.wall_time_ms is None for r in recs)


def test_suite_is_deterministic(suite):
    a = run_suite(suite[:3], KINDS, runs_per_map=1, base_seed=3)
    b = run_suite(suite[:3], KINDS, runs_per_map=1, base_seed=3)
    assert results_csv(a) == results_csv(b)
    assert summary_csv(summarize(a)) == summary_csv(summarize(b))


def test_parallel_matches_serial(suite):
    serial = run_suite(suite[:2], [SAPOA], runs_per_map=2, workers=1)
    parallel = run_suite(suite[:2], [SAPOA], runs_per_map=2, workers=2)
    assert results_csv(serial) == results_csv(parallel)


def test_bad_runs_per_map(suite):
    with pytest.raises(ValueError):
        run_suite(suite[:1], runs_per_map=0)


def test_run_one_trace_repeats(exemplars):
    r1, t1 = run_one(exemplars[0], SAPOA, 11)
    r2, t2 = run_one(exemplars[0], SAPOA, 11)
    assert r1 == r2 and t1.dumps() == t2.dumps()


def test_run_one_timing(exemplars):
    rec, _ = run_one(exemplars[0], SAPOA, 0, timing=True)
    assert rec.wall_time_ms is not None and rec.wall_time_ms >= 0


def test_run_one_extension_failure():
    sealed = parse_world(grid_text("#####", "#TT.#", "#####", "R.R.."), category=1, name="sealed")
    rec, trace = run_one(sealed, SAPOA, 0)
    assert rec.outcome == FAIL_EXTENSION and trace is None and rec.makespan is None


# --- rendering ---------------------------------------------------------------

LINE = grid_text("R......", ".......", "..TT...", ".......", ".....R.")


def _pair_trace():
    w = parse_world(LINE, name="line")
    rec, trace = run_one(w, SAPOA, 0)
    return w, rec, trace


def _rects(svg, cls):
    out = []
    for m in re.finditer(rf'<rect class="{cls}" x="(\d+)" y="(\d+)" width="(\d+)" height="(\d+)"', svg):
        out.append(tuple(int(v) for v in m.groups()))
    return out


def _overlap(a, b):
    return a[0] < b[0] + b[2] and b[0] < a[0] + a[2] and a[1] < b[1] + b[3] and b[1] < a[1] + a[3]


def test_frame_count_matches_ticks():
    w, rec, trace = _pair_trace()
    assert rec.success
    frames = render_trace(trace, w)
    assert len(frames) == trace.makespan + 1
    assert render_trace(trace, w) == frames
    assert trace.makespan > 0
    assert len(_rects(frames[0], "robot")) == 2
    assert len(_rects(frames[0], "target")) == 2


def test_robot_and_obstacle_rects_disjoint(exemplars):
    w = exemplars[2]
    rec, trace = run_one(w, SAPOA, 0)
    for svg in render_trace(trace, w):
        obs = _rects(svg, "obstacle")
        assert len(obs) == len(w.obstacles)
        for r in _rects(svg, "robot"):
            assert not any(_overlap(r, o) for o in obs)


def test_malformed_trace_rejected():
    w = parse_world(LINE)
    with pytest.raises(ValueError, match="malformed"):
        render_trace(Trace([], [], None, None, "x"), w)
    with pytest.raises(ValueError, match="out of bounds"):
        render_trace(Trace([{0: frozenset({(9, 9)})}], [], None, None, "x"), w)


def test_animated_render(tmp_path):
    w, rec, trace = _pair_trace()
    [path] = write_render(trace, w, tmp_path, SAPOA, 0, animate=True)
    assert path.name == frame_name("line", SAPOA, 0) == "line_sapoa_0.svg"
    text = path.read_text()
    assert text.count('class="frame"') == len(trace.steps)


def test_frame_files(tmp_path):
    w, rec, trace = _pair_trace()
    paths = write_render(trace, w, tmp_path, SAPOA, 4)
    assert [p.name for p in paths][:2] == ["line_sapoa_4_0000.svg", "line_sapoa_4_0001.svg"]


def test_bar_chart():
    s = [CategorySummary(1, SAPOA, 2, 1.0, 3.0, 10.0), CategorySummary(1, SAPOA_ADS, 2, 0.5, 3.0, 9.0)]
    svg = bar_chart(s)
    assert svg.count('class="bar"') == 2
    with pytest.raises(ValueError):
        bar_chart(s, "nonsense")
