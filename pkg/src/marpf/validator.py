"""Ground-truth plan checking and a brute-force optimal-makespan oracle.

Nothing in here touches the ILP: the validator replays trajectories against
the action semantics directly, and the oracle is a plain breadth-first search
over joint states. Both serve as independent references for the solvers.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .domain import (
    Action,
    IllegalAction,
    Instance,
    MarpfError,
    Plan,
    Vertex,
    WorldState,
    apply_actions,
    manhattan,
    motion_conflict,
)

VERTEX = "VertexConflict"
MOTION = "MotionConflict"
ILLEGAL = "IllegalAction"
TELEPORT = "RackTeleport"
GOAL = "GoalUnmet"


@dataclass(frozen=True)
class Violation:
    t: int
    kind: str
    entities: tuple[str, ...]
    detail: str = ""

    def __str__(self) -> str:
        who = ",".join(self.entities)
        return f"t={self.t} {self.kind} {who}" + (f" {self.detail}" if self.detail else "")


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    makespan: int | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def to_text(self) -> str:
        if self.ok:
            return f"ok makespan={self.makespan}\n"
        return "".join(f"{v}\n" for v in self.violations)


def compute_makespan(instance: Instance, plan: Plan) -> int | None:
    """Earliest ``t*`` with every target at its goal for all ``t >= t*``."""
    t_star = 0
    for rid, goal in instance.targets.items():
        traj = plan.rack_traj[rid]
        if traj[-1] != goal:
            return None
        t = len(traj) - 1
        while t > 0 and traj[t - 1] == goal:
            t -= 1
        t_star = max(t_star, t)
    return t_star


def validate(instance: Instance, plan: Plan, require_goals: bool = True) -> ValidationReport:
    """Check a plan against the grid semantics; violations are returned, never raised."""
    rep = ValidationReport()
    add = rep.violations.append
    H = plan.horizon
    agv_ids = [a.id for a in instance.agvs]
    rack_ids = [r.id for r in instance.racks]
    grid = instance.grid

    # shape and start state
    for a in instance.agvs:
        tr = plan.agv_traj.get(a.id)
        if tr is None or len(tr) != H + 1 or len(plan.actions.get(a.id, ())) != H:
            add(Violation(0, ILLEGAL, (a.id,), "trajectory/actions do not match horizon"))
            return rep
        if tr[0] != (a.loc, a.loaded):
            add(Violation(0, ILLEGAL, (a.id,), "does not start at its start state"))
    for r in instance.racks:
        tr = plan.rack_traj.get(r.id)
        if tr is None or len(tr) != H + 1:
            add(Violation(0, TELEPORT, (r.id,), "rack trajectory does not match horizon"))
            return rep
        if tr[0] != r.loc:
            add(Violation(0, TELEPORT, (r.id,), "does not start at its start vertex"))

    agv_pos = {k: [v for v, _ in plan.agv_traj[k]] for k in agv_ids}
    agv_load = {k: [l for _, l in plan.agv_traj[k]] for k in agv_ids}
    rack_pos = {k: list(plan.rack_traj[k]) for k in rack_ids}

    for t in range(H + 1):
        for k in agv_ids:
            if agv_pos[k][t] not in grid:
                add(Violation(t, ILLEGAL, (k,), f"off grid at {agv_pos[k][t]}"))
        for k in rack_ids:
            if rack_pos[k][t] not in grid:
                add(Violation(t, TELEPORT, (k,), f"off grid at {rack_pos[k][t]}"))

    # carrying relation per timestep: loaded AGV -> rack under it
    def rack_under(v: Vertex, t: int) -> str | None:
        for k in rack_ids:
            if rack_pos[k][t] == v:
                return k
        return None

    for t in range(H + 1):
        for k in agv_ids:
            if agv_load[k][t] and rack_under(agv_pos[k][t], t) is None:
                add(Violation(t, ILLEGAL, (k,), "loaded with no rack underneath"))

    # per-AGV action consistency
    for t in range(H):
        for k in agv_ids:
            act = plan.actions[k][t]
            v0, v1 = agv_pos[k][t], agv_pos[k][t + 1]
            l0, l1 = agv_load[k][t], agv_load[k][t + 1]
            if act is Action.LOAD:
                ok = v0 == v1 and not l0 and l1 and rack_under(v0, t) is not None
            elif act is Action.UNLOAD:
                ok = v0 == v1 and l0 and not l1
            elif act is Action.STAY:
                ok = v0 == v1 and l0 == l1
            else:
                dx, dy = act.delta
                ok = v1 == Vertex(v0.x + dx, v0.y + dy) and l0 == l1
            if not ok:
                add(Violation(t, ILLEGAL, (k,), f"{act.value} inconsistent with {v0},{int(l0)}->{v1},{int(l1)}"))

    # rack motion must be carried by an AGV making the identical move
    for t in range(H):
        for k in rack_ids:
            r0, r1 = rack_pos[k][t], rack_pos[k][t + 1]
            carriers = [
                a for a in agv_ids
                if agv_load[a][t] and agv_load[a][t + 1] and agv_pos[a][t] == r0
            ]
            if r0 == r1:
                if any(agv_pos[a][t + 1] != r0 for a in carriers):
                    add(Violation(t, TELEPORT, (k,), "carrier drove away without its rack"))
                continue
            if manhattan(r0, r1) != 1 or not any(agv_pos[a][t + 1] == r1 for a in carriers):
                add(Violation(t, TELEPORT, (k,), f"moved {r0}->{r1} without a loaded AGV"))

    _pairwise_conflicts(agv_pos, H, add)
    _pairwise_conflicts(rack_pos, H, add)

    if instance.targets:
        rep.makespan = compute_makespan(instance, plan)
        if rep.makespan is None and require_goals:
            for rid, g in instance.targets.items():
                if rack_pos[rid][-1] != g:
                    add(Violation(H, GOAL, (rid,), f"ends at {rack_pos[rid][-1]}, goal {g}"))
    else:
        rep.makespan = 0
    if not rep.ok:
        rep.makespan = None
    rep.violations.sort(key=lambda v: (v.t, v.kind, v.entities))
    return rep


def _pairwise_conflicts(pos: Mapping[str, Sequence[Vertex]], H: int, add) -> None:
    ids = list(pos)
    for i, j in itertools.combinations(ids, 2):
        a, b = pos[i], pos[j]
        for t in range(H + 1):
            if a[t] == b[t]:
                add(Violation(t, VERTEX, (i, j), f"both at {a[t]}"))
            if t < H and motion_conflict(a[t], a[t + 1], b[t], b[t + 1]):
                add(Violation(t, MOTION, (i, j), f"{a[t]}->{a[t + 1]} vs {b[t]}->{b[t + 1]}"))


def replay_lenient(instance: Instance, actions: Mapping[str, Sequence[Action]]) -> Plan:
    """Replay a possibly malformed action listing without raising.

    An AGV whose action is illegal keeps its previous state, so the validator
    later reports the mismatch as an IllegalAction.
    """
    horizon = max((len(v) for v in actions.values()), default=0)
    acts = {a.id: list(actions.get(a.id, [])) + [Action.STAY] * (horizon - len(actions.get(a.id, [])))
            for a in instance.agvs}
    state = instance.start
    states = [state]
    for t in range(horizon):
        step = {}
        for a in state.agvs:
            try:
                apply_actions(instance, {a.id: acts[a.id][t]}, WorldState((a,), state.racks))
                step[a.id] = acts[a.id][t]
            except IllegalAction:
                step[a.id] = Action.STAY
        state = apply_actions(instance, step, state)
        states.append(state)
    return Plan.from_states(instance, states, acts)


def count_empty_vertices(instance: Instance) -> int:
    return instance.grid.n_vertices - len({r.loc for r in instance.racks})


# ---------------------------------------------------------------------------
# oracle


class StateCapExceeded(MarpfError):
    pass


class Unknown:
    """Sentinel returned when the oracle refuses to answer."""

    def __repr__(self) -> str:
        return "Unknown"


UNKNOWN = Unknown()
INFEASIBLE = None
_AGV_ACTIONS = (Action.STAY, Action.MOVE_E, Action.MOVE_W, Action.MOVE_S, Action.MOVE_N,
                Action.LOAD, Action.UNLOAD)


def estimate_joint_states(instance: Instance) -> int:
    """Upper bound on reachable joint states (obstacle racks interchangeable)."""
    from math import comb, perm

    n = instance.grid.n_vertices
    k_t = len(instance.targets)
    k_o = instance.N - k_t
    agv = perm(n, instance.M) * 2 ** instance.M
    return agv * perm(n, k_t) * comb(n - k_t, k_o)


def oracle_min_makespan(instance: Instance, state_cap: int = 2_000_000, strict: bool = True):
    """Optimal makespan by breadth-first search over joint states.

    Returns an int, ``None`` when no plan exists, or ``UNKNOWN`` when the search
    hits ``state_cap`` and ``strict`` is false. With ``strict`` the estimate is
    checked up front and :class:`StateCapExceeded` is raised instead.
    """
    if strict and estimate_joint_states(instance) > state_cap:
        raise StateCapExceeded(f"estimated joint states exceed cap {state_cap}")
    target_ids = instance.target_ids()
    goals = tuple(instance.targets[r] for r in target_ids)
    obstacle_ids = [r.id for r in instance.racks if r.id not in instance.targets]

    # canonical key: agv (loc, loaded) tuple, target locs, sorted obstacle locs
    def key(state: WorldState):
        tl = tuple(state.rack(r).loc for r in target_ids)
        ol = tuple(sorted(state.rack(r).loc for r in obstacle_ids))
        return tuple((a.loc, a.loaded) for a in state.agvs), tl, ol

    def done(state: WorldState) -> bool:
        return all(state.rack(r).loc == g for r, g in zip(target_ids, goals))

    start = instance.start
    if done(start):
        return 0
    seen = {key(start)}
    frontier = deque([(start, 0)])
    while frontier:
        state, depth = frontier.popleft()
        for nxt in successors(instance, state):
            k = key(nxt)
            if k in seen:
                continue
            if done(nxt):
                return depth + 1
            seen.add(k)
            if len(seen) > state_cap:
                if strict:
                    raise StateCapExceeded(f"visited more than {state_cap} joint states")
                return UNKNOWN
            frontier.append((nxt, depth + 1))
    return INFEASIBLE


def successors(instance: Instance, state: WorldState) -> list[WorldState]:
    """All conflict-free successor snapshots of ``state``."""
    per_agv = []
    for a in state.agvs:
        opts = []
        for act in _AGV_ACTIONS:
            try:
                nxt = apply_actions(instance, {a.id: act}, WorldState((a,), state.racks))
            except IllegalAction:
                continue
            opts.append(act)
        per_agv.append(opts)
    out = []
    for combo in itertools.product(*per_agv):
        nxt = apply_actions(instance, combo, state)
        if joint_step_ok(state, nxt):
            out.append(nxt)
    return out


def joint_step_ok(s0: WorldState, s1: WorldState) -> bool:
    """No vertex or motion conflict among AGVs, nor among racks, over one step."""
    for group0, group1 in ((s0.agvs, s1.agvs), (s0.racks, s1.racks)):
        locs = [e.loc for e in group1]
        if len(set(locs)) != len(locs):
            return False
        for i, j in itertools.combinations(range(len(group0)), 2):
            if motion_conflict(group0[i].loc, group1[i].loc, group0[j].loc, group1[j].loc):
                return False
    return True
