import random

import pytest
from hypothesis import given, settings, strategies as st

from helpers import (
    CASES,
    INJECTORS,
    LINE3,
    ORACLE_MAKESPAN,
    SQUARE2,
    V,
    inst,
    random_small_instance,
    random_walk_plan,
    with_trajectories,
)
from marpf.domain import Action, AgvState, GridMap, Instance, Plan, RackState
from marpf.validator import (
    UNKNOWN,
    StateCapExceeded,
    count_empty_vertices,
    oracle_min_makespan,
    replay_lenient,
    validate,
)

LINE3_PLAN = {"a0": [Action.MOVE_E, Action.LOAD, Action.MOVE_E]}


def test_line3_optimal_plan_validates():
    i = inst(LINE3)
    rep = validate(i, Plan.from_actions(i, LINE3_PLAN))
    assert rep.ok and rep.makespan == 3
    assert rep.to_text() == "ok makespan=3\n"


def test_swapping_agvs_flagged():
    i = Instance(GridMap(2, 1), (AgvState("a", V(0, 0)), AgvState("b", V(1, 0))), (), {})
    p = Plan.from_actions(i, {"a": [Action.MOVE_E], "b": [Action.MOVE_W]})
    rep = validate(i, p)
    assert not rep.ok
    assert {(v.t, v.kind) for v in rep.violations} == {(0, "MotionConflict")}


def test_following_agvs_allowed():
    i = Instance(GridMap(3, 1), (AgvState("a", V(1, 0)), AgvState("b", V(0, 0))), (), {})
    p = Plan.from_actions(i, {"a": [Action.MOVE_E], "b": [Action.MOVE_E]})
    assert validate(i, p).ok


def test_rack_teleport_flagged():
    i = inst(LINE3)
    p = Plan.from_actions(i, {"a0": [Action.STAY]})
    moved = with_trajectories(p, rack_traj={"r0": (V(1, 0), V(2, 0))})
    assert "RackTeleport" in validate(i, moved).kinds()


def test_carrier_leaving_rack_behind_is_teleport():
    i = inst("grid 2 1\nagv a 0 0 carrying r\nrack r 0 0\n")
    p = Plan.from_actions(i, {"a": [Action.MOVE_E]})
    bad = with_trajectories(p, rack_traj={"r": (V(0, 0), V(0, 0))})
    assert "RackTeleport" in validate(i, bad).kinds()


def test_goal_unmet_reported():
    i = inst(LINE3)
    rep = validate(i, Plan.from_actions(i, {"a0": [Action.MOVE_E]}))
    assert rep.kinds() == {"GoalUnmet"}
    assert rep.makespan is None


def test_lenient_replay_reports_illegal_action():
    i = inst(LINE3)
    p = replay_lenient(i, {"a0": [Action.LOAD, Action.MOVE_E]})
    assert "IllegalAction" in validate(i, p).kinds()


def test_makespan_ignores_trailing_motion():
    i = inst(LINE3)
    acts = {"a0": [Action.MOVE_E, Action.LOAD, Action.MOVE_E, Action.UNLOAD, Action.MOVE_W]}
    assert validate(i, Plan.from_actions(i, acts)).makespan == 3


@pytest.mark.parametrize("name", sorted(CASES))
def test_oracle_frozen_values(name):
    assert oracle_min_makespan(inst(CASES[name])) == ORACLE_MAKESPAN[name]


def test_oracle_square2_is_three():
    assert oracle_min_makespan(inst(SQUARE2)) == 3


def test_oracle_target_home_is_zero():
    assert oracle_min_makespan(inst("grid 2 1\nagv a 0 0\nrack r 1 0\ntarget r 1 0\n")) == 0


def test_oracle_state_cap():
    i = inst("grid 6 4\nagv a 0 0\nagv b 1 0\nrack r 2 2\nrack s 3 3\ntarget r 5 3\n")
    with pytest.raises(StateCapExceeded):
        oracle_min_makespan(i, state_cap=100)
    assert oracle_min_makespan(i, state_cap=10, strict=False) is UNKNOWN


def test_count_empty_vertices():
    g = GridMap(6, 4)
    racks = tuple(RackState(f"r{k}", v) for k, v in enumerate(g.vertices()[:12]))
    assert count_empty_vertices(Instance(g, (AgvState("a", V(0, 0)),), racks, {})) == 12
    full = tuple(RackState(f"r{k}", v) for k, v in enumerate(g.vertices()))
    assert count_empty_vertices(Instance(g, (AgvState("a", V(0, 0)),), full, {})) == 0


@given(st.integers(0, 100_000), st.integers(1, 8))
def test_random_walks_are_valid_and_validation_is_pure(seed, steps):
    rng = random.Random(seed)
    i = random_small_instance(rng, max_agvs=3)
    p = random_walk_plan(i, steps, rng)
    r1 = validate(i, p, require_goals=False)
    assert r1.ok
    assert validate(i, p, require_goals=False) == r1


@pytest.mark.parametrize("kind", sorted(INJECTORS))
@given(seed=st.integers(0, 100_000))
def test_injected_conflicts_are_caught(kind, seed):
    rng = random.Random(seed)
    i = random_small_instance(rng, max_agvs=3)
    p = random_walk_plan(i, rng.randint(1, 6), rng)
    inject, expected = INJECTORS[kind]
    out = inject(p, rng, i)
    if out is None:
        return
    bad, _ = out
    assert expected in validate(i, bad, require_goals=False).kinds()


@given(st.integers(0, 100_000))
@settings(max_examples=25)
def test_adding_a_rack_never_shortens_the_optimum(seed):
    rng = random.Random(seed)
    i = random_small_instance(rng, max_x=3, max_y=3, max_racks=3)
    taken = {r.loc for r in i.racks} | set(i.targets.values())
    free = [v for v in i.grid.vertices() if v not in taken]
    if not free:
        return
    j = Instance(i.grid, i.agvs, i.racks + (RackState("extra", rng.choice(free)),), i.targets)
    a, b = oracle_min_makespan(i), oracle_min_makespan(j)
    if b is not None:
        assert a is not None and a <= b
