import random

import pytest
from hypothesis import assume, given, settings, strategies as st

from helpers import LINE3, V, inst, random_small_instance
from marpf.bench import exp1_instance, load_layout
from marpf.castar import (
    GlobalPath,
    NoPath,
    ReservationTable,
    extract_waypoints,
    plan_baseline,
    plan_global_rack_paths,
)
from marpf.domain import manhattan, motion_conflict
from marpf.validator import validate


def path_of(n):
    return GlobalPath("r", tuple(V(i, 0) for i in range(n)), float(n - 1))


def test_reservation_table_rest_and_motion():
    tab = ReservationTable()
    tab.reserve("a", [V(0, 0), V(1, 0)])
    assert not tab.is_free(V(1, 0), 5)
    assert tab.is_free(V(0, 0), 1)
    # swap against a's move
    assert not tab.move_ok(V(1, 0), V(0, 0), 0)
    # following a is fine
    assert tab.move_ok(V(-1, 0), V(0, 0), 0)
    assert not tab.can_rest(V(1, 0), 0)
    assert tab.move_ok(V(1, 0), V(0, 0), 0, ignore=("a",))
    tab.release("a")
    assert tab.is_free(V(1, 0), 5)


def test_waypoints_nine_vertices_tau_four():
    wp = extract_waypoints(path_of(9), 4)
    assert wp.points == (V(0, 0), V(4, 0), V(8, 0))


def test_waypoints_tau_one_is_every_vertex():
    assert extract_waypoints(path_of(5), 1).points == tuple(V(i, 0) for i in range(5))


def test_waypoints_short_path_only_goal():
    assert extract_waypoints(path_of(3), 4).points == (V(2, 0),)


def test_waypoints_five_vertices_tau_two():
    assert extract_waypoints(path_of(5), 2).points == (V(0, 0), V(2, 0), V(4, 0))


def test_waypoints_collapse_waits():
    p = GlobalPath("r", (V(0, 0), V(0, 0), V(1, 0)), 2.0)
    assert extract_waypoints(p, 1).points == (V(0, 0), V(1, 0))


@given(st.lists(st.sampled_from([(1, 0), (-1, 0), (0, 1), (0, -1), (0, 0)]), min_size=0, max_size=20),
       st.integers(1, 8), st.integers(-3, 3))
def test_waypoint_properties(steps, tau, shift):
    verts = [V(0, 0)]
    for dx, dy in steps:
        verts.append(V(verts[-1].x + dx, verts[-1].y + dy))
    p = GlobalPath("r", tuple(verts), 0.0)
    pts = extract_waypoints(p, tau).points
    assert pts[-1] == verts[-1]
    # subsequence of the path
    it = iter(verts)
    assert all(any(q == v for v in it) for q in pts)
    # translating the path translates the waypoints (no grid dependence)
    moved = GlobalPath("r", tuple(V(v.x + shift, v.y + shift) for v in verts), 0.0)
    assert extract_waypoints(moved, tau).points == tuple(V(q.x + shift, q.y + shift) for q in pts)


def test_tau_must_be_positive():
    with pytest.raises(ValueError):
        extract_waypoints(path_of(3), 0)


def test_global_path_straight_when_clear():
    i = inst("grid 4 1\nagv a 0 0\nrack r 0 0\ntarget r 3 0\n")
    (gp,) = plan_global_rack_paths(i, 3)
    assert gp.vertices == (V(0, 0), V(1, 0), V(2, 0), V(3, 0))
    assert gp.cost == 3


def test_global_path_tie_prefers_straight_route():
    # straight through one rack costs 1 + 3 = 4, the detour S,E,E,N also 4;
    # with equal f the higher g wins, which is the straight route's first step
    i = inst("grid 3 2\nagv a 0 0\nrack r 0 0\nrack o 1 0\ntarget r 2 0\n")
    (gp,) = plan_global_rack_paths(i, 3)
    assert gp.vertices == (V(0, 0), V(1, 0), V(2, 0))
    assert gp.cost == 4


def test_global_path_detours_when_kappa_large():
    i = inst("grid 3 2\nagv a 0 0\nrack r 0 0\nrack o 1 0\ntarget r 2 0\n")
    (gp,) = plan_global_rack_paths(i, 10)
    assert gp.vertices == (V(0, 0), V(0, 1), V(1, 1), V(2, 1), V(2, 0))
    assert gp.cost == 4


def test_kappa_must_exceed_one():
    with pytest.raises(ValueError):
        plan_global_rack_paths(inst(LINE3), 1.0)


@given(st.integers(0, 100_000), st.sampled_from([1.5, 3.0, 5.0]))
@settings(max_examples=40)
def test_global_paths_are_cooperative_and_costed(seed, kappa):
    i = random_small_instance(random.Random(seed), max_x=5, max_y=4, max_racks=6, max_targets=3)
    try:
        paths = plan_global_rack_paths(i, kappa)
    except NoPath:
        # e.g. a one-row corridor where targets must pass each other
        assume(False)
    for gp in paths:
        vs = gp.vertices
        assert vs[0] == i.start.rack(gp.rack_id).loc and vs[-1] == i.targets[gp.rack_id]
        assert all(manhattan(a, b) <= 1 for a, b in zip(vs, vs[1:]))
        occupied = {r.loc for r in i.racks if r.id != gp.rack_id}
        entries = sum(1 for a, b in zip(vs, vs[1:]) if a != b and b in occupied)
        assert gp.cost == pytest.approx(len(vs) - 1 + (kappa - 1) * entries)
    # pairwise: no two target paths meet
    for a in paths:
        for b in paths:
            if a.rack_id >= b.rack_id:
                continue
            n = max(len(a), len(b))
            pa = list(a.vertices) + [a.vertices[-1]] * (n - len(a))
            pb = list(b.vertices) + [b.vertices[-1]] * (n - len(b))
            assert all(pa[t] != pb[t] for t in range(n))
            assert not any(motion_conflict(pa[t], pa[t + 1], pb[t], pb[t + 1]) for t in range(n - 1))


def test_baseline_line3():
    rep = plan_baseline(inst(LINE3))
    assert rep.makespan == 3


def test_baseline_fails_on_blocked_corridor():
    with pytest.raises(NoPath):
        plan_baseline(load_layout("blocked_corridor"))


def test_baseline_succeeds_on_base_layout():
    i = load_layout("exp1_base")
    rep = plan_baseline(i)
    assert validate(i, rep.plan).ok
    lb = max(manhattan(i.start.rack(r).loc, g) for r, g in i.targets.items())
    assert rep.makespan >= lb


@given(st.integers(0, 100_000))
@settings(max_examples=40)
def test_baseline_output_is_valid_and_leaves_obstacles(seed):
    rng = random.Random(seed)
    i = random_small_instance(rng, max_x=5, max_y=4, max_agvs=3, max_racks=6, max_targets=2)
    try:
        rep = plan_baseline(i)
    except NoPath:
        return
    assert validate(i, rep.plan).ok
    for r in i.racks:
        if r.id not in i.targets:
            assert set(rep.plan.rack_traj[r.id]) == {r.loc}


def test_baseline_on_exp1_with_added_racks_is_valid_when_it_succeeds():
    for seed in range(10):
        i = exp1_instance(4, seed)
        try:
            rep = plan_baseline(i)
        except NoPath:
            continue
        assert validate(i, rep.plan).ok

