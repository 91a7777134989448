"""Shared builders for the test-suite."""

from __future__ import annotations

import random

from marpf.domain import AgvState, GridMap, Instance, Plan, RackState, Vertex, WorldState
from marpf.formats import parse_instance
from marpf.validator import successors

LINE3 = "grid 3 1\nagv a0 0 0\nrack r0 1 0\ntarget r0 2 0\n"
SQUARE2 = "grid 2 2\nagv a0 0 0\nrack r0 1 0\ntarget r0 1 1\n"
SWAP = "grid 3 2\nagv a0 0 0\nagv a1 2 0\nrack t0 0 0\nrack t1 2 0\ntarget t0 2 0\ntarget t1 0 0\n"
BLOCKED_LINE = "grid 3 1\nagv a0 0 0\nrack t0 0 0\nrack o0 1 0\ntarget t0 2 0\n"
TWO_AGV = "grid 4 2\nagv a0 0 0\nagv a1 3 1\nrack t0 1 0\nrack o0 2 0\nrack o1 2 1\ntarget t0 3 0\n"
LOADED_START = "grid 3 2\nagv a0 0 0 carrying t0\nrack t0 0 0\nrack o0 1 0\ntarget t0 2 0\n"

# optimal makespans computed by the breadth-first oracle (None = no plan exists)
ORACLE_MAKESPAN = {
    "LINE3": 3,
    "SQUARE2": 3,
    "SWAP": 5,
    "BLOCKED_LINE": None,
    "TWO_AGV": 6,
    "LOADED_START": 4,
}
CASES = {
    "LINE3": LINE3,
    "SQUARE2": SQUARE2,
    "SWAP": SWAP,
    "BLOCKED_LINE": BLOCKED_LINE,
    "TWO_AGV": TWO_AGV,
    "LOADED_START": LOADED_START,
}


def inst(text: str) -> Instance:
    return parse_instance(text)


def random_small_instance(rng: random.Random, max_x=4, max_y=3, max_agvs=2, max_racks=4,
                          max_targets=2) -> Instance:
    """Random instance with at least one free vertex and one target."""
    while True:
        sx, sy = rng.randint(1, max_x), rng.randint(1, max_y)
        n = sx * sy
        if n >= 2:
            break
    grid = GridMap(sx, sy)
    vs = grid.vertices()
    m = rng.randint(1, min(max_agvs, n))
    k = rng.randint(1, min(max_racks, n - 1))
    t = rng.randint(1, min(max_targets, k, n - k))
    agv_locs = rng.sample(vs, m)
    rack_locs = rng.sample(vs, k)
    free = [v for v in vs if v not in rack_locs]
    goals = rng.sample(free, t)
    return Instance(
        grid,
        tuple(AgvState(f"a{i}", v) for i, v in enumerate(agv_locs)),
        tuple(RackState(f"r{i}", v) for i, v in enumerate(rack_locs)),
        {f"r{i}": g for i, g in enumerate(goals)},
    )


def random_walk_plan(instance: Instance, steps: int, rng: random.Random) -> Plan:
    """A conflict-free plan built from random legal joint moves."""
    from marpf.domain import action_between

    state = instance.start
    states = [state]
    for _ in range(steps):
        nxt = successors(instance, state)
        # bias towards motion so plans are interesting
        moving = [s for s in nxt if s != state] or nxt
        state = rng.choice(moving)
        states.append(state)
    acts = {a.id: [] for a in instance.agvs}
    for s0, s1 in zip(states, states[1:]):
        for a0, a1 in zip(s0.agvs, s1.agvs):
            acts[a0.id].append(action_between(a0.loc, a0.loaded, a1.loc, a1.loaded))
    return Plan.from_states(instance, states, acts)


def with_trajectories(plan: Plan, agv_traj=None, rack_traj=None) -> Plan:
    return Plan(plan.horizon, plan.actions,
                agv_traj if agv_traj is not None else plan.agv_traj,
                rack_traj if rack_traj is not None else plan.rack_traj)


def world(instance: Instance) -> WorldState:
    return instance.start


V = Vertex


# ---------------------------------------------------------------------------
# plan mutations that inject exactly one known conflict class


def _copy_agv(plan: Plan):
    return {k: list(v) for k, v in plan.agv_traj.items()}


def _copy_rack(plan: Plan):
    return {k: list(v) for k, v in plan.rack_traj.items()}


def _freeze(d):
    return {k: tuple(v) for k, v in d.items()}


def inject_vertex(plan: Plan, rng: random.Random, instance: Instance):
    """Put a second AGV (or rack) on another one's vertex at some t."""
    use_racks = len(plan.rack_traj) >= 2 and (len(plan.agv_traj) < 2 or rng.random() < 0.5)
    t = rng.randint(0, plan.horizon)
    if use_racks:
        r = _copy_rack(plan)
        i, j = rng.sample(sorted(r), 2)
        r[j][t] = r[i][t]
        return with_trajectories(plan, rack_traj=_freeze(r)), t
    if len(plan.agv_traj) < 2:
        return None
    a = _copy_agv(plan)
    i, j = rng.sample(sorted(a), 2)
    a[j][t] = (a[i][t][0], a[j][t][1])
    return with_trajectories(plan, agv_traj=_freeze(a)), t


def _movers(traj_by_id, horizon, pos):
    out = []
    for k, tr in traj_by_id.items():
        for t in range(horizon):
            if pos(tr[t]) != pos(tr[t + 1]):
                out.append((k, t))
    return out


def _inject_motion(plan: Plan, rng: random.Random, instance: Instance, corner: bool):
    grid = instance.grid
    use_racks = rng.random() < 0.5
    if use_racks and len(plan.rack_traj) >= 2:
        trajs, pos = _copy_rack(plan), (lambda s: s)
    elif len(plan.agv_traj) >= 2:
        trajs, pos = _copy_agv(plan), (lambda s: s[0])
        use_racks = False
    else:
        return None
    movers = _movers(trajs, plan.horizon, pos)
    rng.shuffle(movers)
    for k, t in movers:
        u, w = pos(trajs[k][t]), pos(trajs[k][t + 1])
        d = (w.x - u.x, w.y - u.y)
        others = [o for o in sorted(trajs) if o != k]
        o = rng.choice(others)
        if corner:
            perp = [(d[1], d[0]), (-d[1], -d[0])]
            starts = [Vertex(u.x + e[0], u.y + e[1]) for e in perp]
            starts = [s for s in starts if s in grid]
            if not starts:
                continue
            b0, b1 = rng.choice(starts), u
        else:
            b0, b1 = w, u
        if use_racks:
            trajs[o][t], trajs[o][t + 1] = b0, b1
            return with_trajectories(plan, rack_traj=_freeze(trajs)), t
        trajs[o][t] = (b0, trajs[o][t][1])
        trajs[o][t + 1] = (b1, trajs[o][t + 1][1])
        return with_trajectories(plan, agv_traj=_freeze(trajs)), t
    return None


def inject_swap(plan, rng, instance):
    return _inject_motion(plan, rng, instance, corner=False)


def inject_corner(plan, rng, instance):
    return _inject_motion(plan, rng, instance, corner=True)


def inject_teleport(plan: Plan, rng: random.Random, instance: Instance):
    """Move a rack one step with nobody carrying it along."""
    if plan.horizon < 1:
        return None
    r = _copy_rack(plan)
    rid = rng.choice(sorted(r))
    t = rng.randrange(plan.horizon)
    v = r[rid][t]
    carried = [k for k, tr in plan.agv_traj.items() if tr[t] == (v, True) and tr[t + 1][1]]
    options = [u for u in instance.grid.vertices() if u != v and u != r[rid][t + 1]]
    if carried:
        # the carrier keeps its own move; the rack goes somewhere else
        options = [u for u in options if all(plan.agv_traj[k][t + 1][0] != u for k in carried)]
    if not options:
        return None
    r[rid][t + 1] = rng.choice(options)
    return with_trajectories(plan, rack_traj=_freeze(r)), t


INJECTORS = {
    "vertex": (inject_vertex, "VertexConflict"),
    "swap": (inject_swap, "MotionConflict"),
    "corner": (inject_corner, "MotionConflict"),
    "teleport": (inject_teleport, "RackTeleport"),
}
