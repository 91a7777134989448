"""Cooperative A* on the grid.

Two planners share the same space-time search:

* :func:`plan_baseline`, a prioritized AGV planner that conveys each target
  rack but treats every other rack as a fixed obstacle while loaded. It is
  the comparison method that cannot clear a blocked corridor.
* :func:`plan_global_rack_paths`, which pretends racks move by themselves and
  charges ``kappa`` for entering a cell another rack occupies. Its paths feed
  :func:`extract_waypoints` for the hybrid solver.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .backends import Status
from .domain import (
    DIRECTIONS,
    Action,
    Instance,
    MarpfError,
    Plan,
    Vertex,
    manhattan,
    motion_conflict,
    neighbors,
)
from .ilp_core import SolveReport
from .validator import validate


class NoPath(MarpfError):
    pass


class ReservationTable:
    """Committed space-time paths; each agent rests at its last vertex forever."""

    def __init__(self):
        self.paths: dict[str, list[Vertex]] = {}
        self.occupied: dict[tuple[Vertex, int], str] = {}
        self.motion: dict[tuple[tuple[Vertex, Vertex], int], str] = {}

    def reserve(self, agent: str, path: Sequence[Vertex]) -> None:
        self.release(agent)
        path = list(path)
        self.paths[agent] = path
        for t, v in enumerate(path):
            self.occupied[(v, t)] = agent
            if t + 1 < len(path):
                self.motion[((v, path[t + 1]), t)] = agent

    def release(self, agent: str) -> None:
        path = self.paths.pop(agent, None)
        if path is None:
            return
        for t, v in enumerate(path):
            self.occupied.pop((v, t), None)
            if t + 1 < len(path):
                self.motion.pop(((v, path[t + 1]), t), None)

    @property
    def horizon(self) -> int:
        return max((len(p) for p in self.paths.values()), default=1)

    def at(self, agent: str, t: int) -> Vertex:
        path = self.paths[agent]
        return path[min(t, len(path) - 1)]

    def is_free(self, v: Vertex, t: int, ignore: Iterable[str] = ()) -> bool:
        owner = self.occupied.get((v, t))
        if owner is not None and owner not in ignore:
            return False
        return not any(
            a not in ignore and len(p) - 1 < t and p[-1] == v for a, p in self.paths.items()
        )

    def move_ok(self, v: Vertex, u: Vertex, t: int, ignore: Iterable[str] = ()) -> bool:
        """Can an agent go ``v -> u`` during ``[t, t+1]`` without any conflict?"""
        if not self.is_free(u, t + 1, ignore):
            return False
        for a, p in self.paths.items():
            if a in ignore:
                continue
            b0 = p[min(t, len(p) - 1)]
            b1 = p[min(t + 1, len(p) - 1)]
            if motion_conflict(v, u, b0, b1):
                return False
        return True

    def can_rest(self, v: Vertex, t: int, ignore: Iterable[str] = ()) -> bool:
        """True if nobody else is at ``v`` at any time ``>= t``."""
        for a, p in self.paths.items():
            if a in ignore:
                continue
            if p[-1] == v or any(p[s] == v for s in range(t, len(p))):
                return False
        return True


_DIR_ORDER = {d: i for i, d in enumerate(DIRECTIONS)}


def _step_rank(v: Vertex, u: Vertex) -> int:
    return _DIR_ORDER.get((u.x - v.x, u.y - v.y), len(_DIR_ORDER))


def _successors(instance: Instance, v: Vertex) -> list[Vertex]:
    return [*neighbors(instance.grid, v), v]


def space_time_astar(start, t0: int, expand: Callable, is_goal: Callable, h: Callable,
                     t_max: int, deadline: float | None = None):
    """Generic space-time A*.

    ``expand(state, t)`` yields ``(next_state, cost, rank)``; ``rank`` orders
    ties after f and g. Returns the list of states from ``t0`` or ``None``.
    """
    tie = itertools.count()
    open_ = [(h(start), 0, 0, next(tie), start, t0)]
    parent = {(start, t0): None}
    g_best = {(start, t0): 0}
    while open_:
        f, neg_g, _, _, s, t = heapq.heappop(open_)
        g = -neg_g
        if g > g_best.get((s, t), float("inf")):
            continue
        if is_goal(s, t):
            out = []
            node = (s, t)
            while node is not None:
                out.append(node[0])
                node = parent[node]
            return out[::-1]
        if t >= t_max:
            continue
        if deadline is not None and time.perf_counter() > deadline:
            return None
        for s2, cost, rank in expand(s, t):
            key = (s2, t + 1)
            g2 = g + cost
            if g2 < g_best.get(key, float("inf")):
                g_best[key] = g2
                parent[key] = (s, t)
                heapq.heappush(open_, (g2 + h(s2), -g2, rank, next(tie), s2, t + 1))
    return None


# ---------------------------------------------------------------------------
# baseline


def plan_baseline(instance: Instance, time_limit: float | None = None) -> SolveReport:
    """Prioritized conveyance without moving obstacle racks.

    Targets are handled in declaration order. Each goes to the nearest
    unassigned AGV (Manhattan distance, ties by id; reused AGVs first drop
    their rack). The AGV's search has a pickup part, where racks are
    passable, and a delivery part, where every rack other than the carried
    one is an obstacle. Waiting is part of the search, bounded by ``|V|``
    steps past the last reservation.
    """
    t_start = time.perf_counter()
    deadline = None if time_limit is None else t_start + time_limit
    grid = instance.grid
    agv_tab = ReservationTable()
    rack_tab = ReservationTable()
    agv_path: dict[str, list[tuple[Vertex, bool]]] = {}
    for a in instance.agvs:
        agv_path[a.id] = [(a.loc, a.loaded)]
        agv_tab.reserve(a.id, [a.loc])
    for r in instance.racks:
        rack_tab.reserve(r.id, [r.loc])
    carrying = {a.id: a.carrying for a in instance.agvs}
    used: set[str] = set()

    for rid in instance.target_ids():
        goal = instance.targets[rid]
        rack_loc = instance.start.rack(rid).loc
        if rack_loc == goal:
            continue
        holder = next((a for a, c in carrying.items() if c == rid), None)
        if holder is not None:
            aid = holder
        else:
            pool = [a for a in instance.agvs if a.id not in used and carrying[a.id] is None]
            if not pool:
                pool = list(instance.agvs)
            aid = min(pool, key=lambda a: (manhattan(agv_path[a.id][-1][0], rack_loc), a.id)).id
        used.add(aid)
        path = agv_path[aid]
        if carrying[aid] not in (None, rid):
            # drop the previous rack where it stands
            path.append((path[-1][0], False))
            carrying[aid] = None
        t0 = len(path) - 1
        v0, l0 = path[-1]
        t_max = max(agv_tab.horizon, rack_tab.horizon, t0) + 2 * grid.n_vertices + 2

        def expand(s, t, aid=aid, rid=rid):
            v, loaded = s
            out = []
            if loaded:
                for u in _successors(instance, v):
                    if agv_tab.move_ok(v, u, t, (aid,)) and rack_tab.move_ok(v, u, t, (rid,)):
                        out.append(((u, True), 1, _step_rank(v, u)))
            else:
                for u in _successors(instance, v):
                    if agv_tab.move_ok(v, u, t, (aid,)):
                        out.append(((u, False), 1, _step_rank(v, u)))
                if v == rack_tab.at(rid, t) and agv_tab.move_ok(v, v, t, (aid,)):
                    out.append(((v, True), 1, len(_DIR_ORDER) + 1))
            return out

        def is_goal(s, t, aid=aid, rid=rid, goal=goal):
            v, loaded = s
            return (loaded and v == goal and agv_tab.can_rest(v, t, (aid,))
                    and rack_tab.can_rest(v, t, (rid,)))

        def h(s, rack_loc=rack_loc, goal=goal):
            v, loaded = s
            if loaded:
                return manhattan(v, goal)
            return manhattan(v, rack_loc) + 1 + manhattan(rack_loc, goal)

        seg = space_time_astar((v0, l0), t0, expand, is_goal, h, t_max, deadline)
        if seg is None:
            if deadline is not None and time.perf_counter() > deadline:
                return SolveReport(Status.TIMEOUT, solve_seconds=time.perf_counter() - t_start)
            raise NoPath(f"no conveyance path for rack {rid}")
        path.extend(seg[1:])
        carrying[aid] = rid
        agv_tab.reserve(aid, [v for v, _ in path])
        load_t = next(t for t in range(t0, len(path) - 1) if path[t + 1][1] and not path[t][1])
        rpath = list(rack_tab.paths[rid])
        rpath += [rpath[-1]] * (load_t + 1 - len(rpath))
        rpath += [v for v, _ in path[load_t + 1:]]
        rack_tab.reserve(rid, rpath)

    horizon = max(len(p) for p in agv_path.values()) - 1
    actions = {}
    for a in instance.agvs:
        p = agv_path[a.id] + [agv_path[a.id][-1]] * (horizon + 1 - len(agv_path[a.id]))
        actions[a.id] = [_action(p[t], p[t + 1]) for t in range(horizon)]
    plan = Plan.from_actions(instance, actions)
    rep = validate(instance, plan)
    if not rep.ok:
        raise MarpfError("baseline produced an invalid plan:\n" + rep.to_text())
    plan = plan.truncated(rep.makespan)
    return SolveReport(Status.FEASIBLE, rep.makespan, plan, time.perf_counter() - t_start, plan.horizon)


def _action(s0: tuple[Vertex, bool], s1: tuple[Vertex, bool]) -> Action:
    (v0, l0), (v1, l1) = s0, s1
    if v0 == v1:
        if l0 == l1:
            return Action.STAY
        return Action.LOAD if l1 else Action.UNLOAD
    return Action.move(v1.x - v0.x, v1.y - v0.y)


# ---------------------------------------------------------------------------
# global search for the hybrid solver


@dataclass(frozen=True)
class GlobalPath:
    rack_id: str
    vertices: tuple[Vertex, ...]
    cost: float

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class Waypoints:
    rack_id: str
    points: tuple[Vertex, ...] = field(default_factory=tuple)


def plan_global_rack_paths(instance: Instance, kappa: float = 3.0) -> list[GlobalPath]:
    """Cooperative paths for the target racks, racks moving on their own.

    Entering a cell that holds another rack in the start configuration costs
    ``kappa``; every other step, waiting included, costs 1. Target paths are
    planned in declaration order and must avoid each other; collisions with
    obstacle racks are allowed.
    """
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")
    table = ReservationTable()
    out = []
    tids = instance.target_ids()
    for rid in tids:
        start = instance.start.rack(rid).loc
        goal = instance.targets[rid]
        occupied = {r.loc for r in instance.racks if r.id != rid}
        t_max = table.horizon + int(kappa * instance.grid.n_vertices) + 2

        def expand(v, t, occupied=occupied):
            res = []
            for u in _successors(instance, v):
                if not table.move_ok(v, u, t):
                    continue
                cost = kappa if (u != v and u in occupied) else 1
                res.append((u, cost, _step_rank(v, u)))
            return res

        verts = space_time_astar(start, 0, expand,
                                 lambda v, t, goal=goal: v == goal and table.can_rest(v, t),
                                 lambda v, goal=goal: manhattan(v, goal), t_max)
        if verts is None:
            raise NoPath(f"no global path for rack {rid}")
        entries = sum(1 for a, b in zip(verts, verts[1:]) if a != b and b in occupied)
        steps = len(verts) - 1
        out.append(GlobalPath(rid, tuple(verts), steps + (kappa - 1) * entries))
        table.reserve(rid, verts)
    return out


def extract_waypoints(path: GlobalPath, tau: int) -> Waypoints:
    """Every ``tau``-th vertex whose whole span fits in the path, then the goal."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    n = len(path.vertices)
    points = []
    for p in range(n):
        q, r = divmod(p, tau)
        if r == 0 and tau * (q + 1) <= n:
            points.append(path.vertices[p])
    points.append(path.vertices[-1])
    collapsed = [pt for i, pt in enumerate(points) if i == 0 or pt != points[i - 1]]
    return Waypoints(path.rack_id, tuple(collapsed))
