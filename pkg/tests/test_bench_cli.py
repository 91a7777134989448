import random

import pytest
from hypothesis import given, strategies as st

from helpers import LINE3, V, inst
from marpf.bench import (
    CSV_HEADER,
    BenchConfig,
    CapacityExceeded,
    MetricsRow,
    RenderOnInvalidPlan,
    exp1_instance,
    exp2_instance,
    generate_instance,
    load_layout,
    render_plan,
    rows_to_csv,
    run_exp1,
    run_exp2,
)
from marpf.cli import main
from marpf.domain import Action, AgvState, GridMap, Instance, Plan
from marpf.formats import parse_instance, serialize_instance
from marpf.validator import count_empty_vertices, validate


def test_generator_is_deterministic():
    g = GridMap(6, 4)
    assert generate_instance(g, 8, 12, 2, 5) == generate_instance(g, 8, 12, 2, 5)
    assert generate_instance(g, 8, 12, 2, 5) != generate_instance(g, 8, 12, 2, 6)


def test_generator_sparse_exp2_shape():
    i = generate_instance(GridMap(6, 4), 8, 12, 2, 0)
    assert (i.M, i.N, len(i.targets)) == (8, 12, 2)
    assert count_empty_vertices(i) == 12


def test_full_grid_has_no_room_for_goals():
    with pytest.raises(CapacityExceeded):
        generate_instance(GridMap(6, 4), 2, 24, 1, 0)


@given(st.integers(0, 10**9))
def test_generator_never_overlaps(seed):
    rng = random.Random(seed)
    g = GridMap(rng.randint(1, 6), rng.randint(1, 4))
    n = g.n_vertices
    racks = rng.randint(1, n)
    targets = min(rng.randint(0, 2), racks, n - racks)
    i = generate_instance(g, rng.randint(1, n), racks, targets, seed)
    assert len({a.loc for a in i.agvs}) == i.M
    assert len({r.loc for r in i.racks}) == i.N
    assert not set(i.targets.values()) & {r.loc for r in i.racks}


def test_layouts_ship_with_the_package():
    blocked_corridor = load_layout("blocked_corridor")
    base = load_layout("exp1_base")
    assert (base.grid.size_x, base.grid.size_y, base.M, base.N, len(base.targets)) == (6, 4, 2, 6, 2)
    assert blocked_corridor.N == 4


def test_exp1_added_racks_avoid_goals():
    for k in range(7):
        i = exp1_instance(k, 11)
        assert i.N == 6 + k
        assert not set(i.targets.values()) & {r.loc for r in i.racks}
    assert count_empty_vertices(exp1_instance(6, 0)) == 12


def test_exp2_instances_keep_targets_fixed():
    a, b = exp2_instance(1), exp2_instance(2)
    assert a.targets == b.targets
    assert [r.loc for r in a.racks[:2]] == [r.loc for r in b.racks[:2]]
    assert a.N == 12 and a.M == 8
    assert exp2_instance(1, n_racks=18).N == 18


def test_render_two_identical_frames_for_a_stay():
    i = Instance(GridMap(2, 2), (AgvState("a", V(0, 0)),), (), {})
    p = Plan.from_actions(i, {"a": [Action.STAY]})
    frames = render_plan(i, p).split("\n\n")
    assert len(frames) == 2
    assert frames[0].splitlines()[1:] == frames[1].splitlines()[1:] == ["a.", ".."]


def test_render_line3_frames():
    i = inst(LINE3)
    p = Plan.from_actions(i, {"a0": [Action.MOVE_E, Action.LOAD, Action.MOVE_E]})
    frames = [f.splitlines()[1:] for f in render_plan(i, p).split("\n\n")]
    assert frames == [["aR*"], [".a*"], [".A*"], ["..A"]]
    for f in frames:
        assert len(f) == i.grid.size_y and all(len(row) == i.grid.size_x for row in f)


def test_render_svg_uses_rect_and_animate_only():
    i = inst(LINE3)
    p = Plan.from_actions(i, {"a0": [Action.MOVE_E, Action.LOAD, Action.MOVE_E]})
    svg = render_plan(i, p, "svg")
    import re
    tags = set(re.findall(r"<([a-z]+)", svg))
    assert tags == {"svg", "rect", "animate"}


def test_render_refuses_invalid_plan():
    i = inst(LINE3)
    with pytest.raises(RenderOnInvalidPlan):
        render_plan(i, Plan.from_actions(i, {"a0": [Action.MOVE_E]}))


def test_csv_header_and_missing_makespan():
    row = MetricsRow(0, 1, "ilp", None, 6, 2, False, None, 1.23456)
    text = rows_to_csv([row])
    assert text.splitlines() == [",".join(CSV_HEADER), "0,1,ilp,,6,2,0,,1.235"]


def test_small_exp1_rows_validate():
    rows = run_exp1(BenchConfig("exp1", trials=2, max_added=1, time_limit_s=60))
    assert len(rows) == 2 * 2 * 2
    for r in rows:
        assert r.success
        assert validate(r.instance, r.plan).ok


def test_small_exp2_rows():
    rows = run_exp2(BenchConfig("exp2", trials=1, taus=(4,), time_limit_s=300))
    assert [(r.mode, r.tau) for r in rows] == [("hybrid", 4), ("ilp", None)]
    assert rows[1].makespan <= rows[0].makespan


def test_bench_config_checks():
    with pytest.raises(ValueError):
        BenchConfig("exp3")
    with pytest.raises(ValueError):
        BenchConfig("exp1", trials=0)


# --- command line ------------------------------------------------------------


@pytest.fixture
def line3_file(tmp_path):
    p = tmp_path / "i.txt"
    p.write_text(LINE3)
    return p


@pytest.mark.parametrize("mode", ["ilp", "castar", "hybrid"])
def test_cli_solve_prints_plan_and_makespan(line3_file, capsys, mode):
    assert main(["solve", "--instance", str(line3_file), "--mode", mode]) == 0
    out = capsys.readouterr().out
    assert out.startswith("plan ")
    assert out.rstrip().endswith("makespan 3")


def test_cli_validate_detects_tampering(line3_file, tmp_path, capsys):
    plan = tmp_path / "p.txt"
    assert main(["solve", "--instance", str(line3_file), "--out", str(plan)]) == 0
    assert main(["validate", "--instance", str(line3_file), "--plan", str(plan)]) == 0
    plan.write_text(plan.read_text().replace("t=2 a0 MOVE E", "t=2 a0 STAY"))
    capsys.readouterr()
    assert main(["validate", "--instance", str(line3_file), "--plan", str(plan)]) == 1
    assert "GoalUnmet" in capsys.readouterr().out


def test_cli_render(line3_file, tmp_path, capsys):
    plan = tmp_path / "p.txt"
    main(["solve", "--instance", str(line3_file), "--out", str(plan)])
    capsys.readouterr()
    assert main(["render", "--instance", str(line3_file), "--plan", str(plan)]) == 0
    assert capsys.readouterr().out.startswith("t=0\naR*")


def test_cli_gen_roundtrips(tmp_path):
    out = tmp_path / "g.txt"
    assert main(["gen", "--seed", "3", "--agvs", "2", "--racks", "4", "--targets", "1",
                 "--grid", "4x3", "--out", str(out)]) == 0
    i = parse_instance(out.read_text())
    assert serialize_instance(i) == out.read_text()


def test_cli_exit_codes(tmp_path, line3_file):
    assert main(["solve"]) == 2
    assert main(["frobnicate"]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("grid 2 2\nagv a 9 9\n")
    assert main(["solve", "--instance", str(bad)]) == 3
    assert main(["solve", "--instance", str(tmp_path / "missing.txt")]) == 3
    blocked = tmp_path / "blocked_corridor.txt"
    blocked.write_text(serialize_instance(load_layout("blocked_corridor")))
    assert main(["solve", "--instance", str(blocked), "--mode", "castar"]) == 1
    assert main(["gen", "--racks", "24", "--targets", "1"]) == 3


def test_cli_bench_writes_csv(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["bench", "--experiment", "exp2", "--trials", "1", "--seed", "7", "--tau", "4",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 3
