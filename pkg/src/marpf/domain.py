"""Grid-world model shared by every solver: vertices, AGV/rack states,
actions, instances, plans and the two conflict predicates.

Coordinates follow the warehouse convention used throughout the package:
``x`` is the column, ``y`` the row, and rows grow "south" (``+y``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence


class MarpfError(Exception):
    """Base class for all package errors."""


class IllegalAction(MarpfError):
    """An action cannot be executed in the current state (malformed plan)."""


class ParseError(MarpfError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


class Vertex(NamedTuple):
    x: int
    y: int

    def __str__(self) -> str:
        return f"({self.x},{self.y})"


def manhattan(a: Vertex, b: Vertex) -> int:
    return abs(a.x - b.x) + abs(a.y - b.y)


class Action(enum.Enum):
    STAY = "STAY"
    MOVE_E = "MOVE E"
    MOVE_W = "MOVE W"
    MOVE_S = "MOVE S"
    MOVE_N = "MOVE N"
    LOAD = "LOAD"
    UNLOAD = "UNLOAD"

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS.get(self, (0, 0))

    @property
    def is_move(self) -> bool:
        return self in _DELTAS

    @classmethod
    def move(cls, dx: int, dy: int) -> "Action":
        try:
            return _MOVE_BY_DELTA[(dx, dy)]
        except KeyError:
            raise ValueError(f"no move with displacement {(dx, dy)}") from None


# E, W, S, N: fixed order used for neighbour enumeration and search tie-breaks
_DELTAS = {
    Action.MOVE_E: (1, 0),
    Action.MOVE_W: (-1, 0),
    Action.MOVE_S: (0, 1),
    Action.MOVE_N: (0, -1),
}
_MOVE_BY_DELTA = {d: a for a, d in _DELTAS.items()}
DIRECTIONS: tuple[tuple[int, int], ...] = tuple(_DELTAS.values())
MOVES: tuple[Action, ...] = tuple(_DELTAS)


@dataclass(frozen=True)
class GridMap:
    size_x: int
    size_y: int

    def __post_init__(self):
        if self.size_x < 1 or self.size_y < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.size_x}x{self.size_y}")

    def __contains__(self, v) -> bool:
        return 0 <= v[0] < self.size_x and 0 <= v[1] < self.size_y

    @property
    def n_vertices(self) -> int:
        return self.size_x * self.size_y

    def vertices(self) -> list[Vertex]:
        """All vertices in row-major order (y outer, x inner)."""
        return [Vertex(x, y) for y in range(self.size_y) for x in range(self.size_x)]

    def edges(self) -> list[tuple[Vertex, Vertex]]:
        """Directed grid edges (both orientations of each undirected edge)."""
        return [(v, u) for v in self.vertices() for u in neighbors(self, v)]

    def index(self, v: Vertex) -> int:
        return v.y * self.size_x + v.x


def neighbors(grid: GridMap, v: Vertex) -> list[Vertex]:
    """Manhattan-distance-1 vertices of ``v`` in E, W, S, N order."""
    out = []
    for dx, dy in DIRECTIONS:
        u = Vertex(v.x + dx, v.y + dy)
        if u in grid:
            out.append(u)
    return out


@dataclass(frozen=True)
class AgvState:
    id: str
    loc: Vertex
    loaded: bool = False
    carrying: str | None = None

    def __post_init__(self):
        if self.loaded != (self.carrying is not None):
            raise ValueError(f"AGV {self.id}: carrying must be set iff loaded")


@dataclass(frozen=True)
class RackState:
    id: str
    loc: Vertex


@dataclass(frozen=True)
class WorldState:
    """A snapshot of every AGV and rack at one timestep."""

    agvs: tuple[AgvState, ...]
    racks: tuple[RackState, ...]

    def rack_at(self, v: Vertex) -> RackState | None:
        for r in self.racks:
            if r.loc == v:
                return r
        return None

    def rack(self, rack_id: str) -> RackState:
        for r in self.racks:
            if r.id == rack_id:
                return r
        raise KeyError(rack_id)


@dataclass(frozen=True)
class Instance:
    grid: GridMap
    agvs: tuple[AgvState, ...]
    racks: tuple[RackState, ...]
    targets: Mapping[str, Vertex] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "agvs", tuple(self.agvs))
        object.__setattr__(self, "racks", tuple(self.racks))
        object.__setattr__(self, "targets", dict(self.targets))
        check_instance(self)

    @property
    def M(self) -> int:
        return len(self.agvs)

    @property
    def N(self) -> int:
        return len(self.racks)

    @property
    def start(self) -> WorldState:
        return WorldState(self.agvs, self.racks)

    def rack_index(self, rack_id: str) -> int:
        for i, r in enumerate(self.racks):
            if r.id == rack_id:
                return i
        raise KeyError(rack_id)

    def target_ids(self) -> list[str]:
        """Target rack ids in rack-declaration order."""
        return [r.id for r in self.racks if r.id in self.targets]

    def with_state(self, state: WorldState, targets: Mapping[str, Vertex] | None = None) -> "Instance":
        return Instance(self.grid, state.agvs, state.racks, self.targets if targets is None else targets)


def check_instance(inst: Instance) -> None:
    """Raise ``ValueError`` when the instance breaks an occupancy rule."""
    if not inst.agvs:
        raise ValueError("an instance needs at least one AGV")
    _check_unique([a.id for a in inst.agvs], "AGV")
    _check_unique([r.id for r in inst.racks], "rack")
    rack_locs = {}
    for r in inst.racks:
        if r.loc not in inst.grid:
            raise ValueError(f"rack {r.id} at {r.loc} is off the grid")
        if r.loc in rack_locs:
            raise ValueError(f"racks {rack_locs[r.loc]} and {r.id} share vertex {r.loc}")
        rack_locs[r.loc] = r.id
    agv_locs = {}
    carried = set()
    for a in inst.agvs:
        if a.loc not in inst.grid:
            raise ValueError(f"AGV {a.id} at {a.loc} is off the grid")
        if a.loc in agv_locs:
            raise ValueError(f"AGVs {agv_locs[a.loc]} and {a.id} share vertex {a.loc}")
        agv_locs[a.loc] = a.id
        if a.loaded:
            if rack_locs.get(a.loc) != a.carrying:
                raise ValueError(f"AGV {a.id} carries {a.carrying} but that rack is not under it")
            carried.add(a.carrying)
    goals = set()
    for rid, g in inst.targets.items():
        if rid not in {r.id for r in inst.racks}:
            raise ValueError(f"target {rid} is not a declared rack")
        if g not in inst.grid:
            raise ValueError(f"goal of {rid} at {g} is off the grid")
        if g in goals:
            raise ValueError(f"goal {g} assigned twice")
        goals.add(g)


def _check_unique(ids: Sequence[str], what: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise ValueError(f"duplicate {what} id {i!r}")
        seen.add(i)


# ---------------------------------------------------------------------------
# conflicts


def check_vertex_conflict(traj_a: Sequence[Vertex], traj_b: Sequence[Vertex], t: int) -> bool:
    return traj_a[t] == traj_b[t]


def _disp(traj: Sequence[Vertex], t: int) -> tuple[int, int]:
    return traj[t + 1][0] - traj[t][0], traj[t + 1][1] - traj[t][1]


def check_motion_conflict(traj_a: Sequence[Vertex], traj_b: Sequence[Vertex], t: int) -> bool:
    """True when one entity enters, during ``[t, t+1]``, the cell the other
    occupied at ``t`` without moving in exactly the same direction.

    Covers swapping, corner (perpendicular follow) and move-into-stationary.
    """
    if traj_a[t] == traj_b[t + 1] and _disp(traj_a, t) != _disp(traj_b, t):
        return True
    return traj_b[t] == traj_a[t + 1] and _disp(traj_a, t) != _disp(traj_b, t)


def motion_conflict(a0: Vertex, a1: Vertex, b0: Vertex, b1: Vertex) -> bool:
    """Same predicate as :func:`check_motion_conflict` on a single step."""
    return check_motion_conflict((a0, a1), (b0, b1), 0)


# ---------------------------------------------------------------------------
# transitions


def apply_actions(
    instance: Instance, actions: Mapping[str, Action] | Sequence[Action], state: WorldState
) -> WorldState:
    """Advance ``state`` by one timestep.

    ``actions`` is keyed by AGV id, or given positionally in ``state.agvs``
    order. Only per-AGV legality is checked here; inter-entity conflicts are
    the validator's job.
    """
    if not isinstance(actions, Mapping):
        actions = {a.id: act for a, act in zip(state.agvs, actions, strict=True)}
    grid = instance.grid
    rack_locs = {r.loc: r.id for r in state.racks}
    moved_racks: dict[str, Vertex] = {}
    new_agvs = []
    for agv in state.agvs:
        act = actions.get(agv.id, Action.STAY)
        if act is Action.STAY:
            new_agvs.append(agv)
        elif act is Action.LOAD:
            if agv.loaded:
                raise IllegalAction(f"AGV {agv.id} loads while already loaded")
            rid = rack_locs.get(agv.loc)
            if rid is None:
                raise IllegalAction(f"AGV {agv.id} loads at {agv.loc} where there is no rack")
            new_agvs.append(AgvState(agv.id, agv.loc, True, rid))
        elif act is Action.UNLOAD:
            if not agv.loaded:
                raise IllegalAction(f"AGV {agv.id} unloads while unloaded")
            new_agvs.append(AgvState(agv.id, agv.loc, False, None))
        else:
            dx, dy = act.delta
            nxt = Vertex(agv.loc.x + dx, agv.loc.y + dy)
            if nxt not in grid:
                raise IllegalAction(f"AGV {agv.id} moves off the grid to {nxt}")
            if agv.loaded:
                moved_racks[agv.carrying] = nxt
            new_agvs.append(AgvState(agv.id, nxt, agv.loaded, agv.carrying))
    racks = tuple(RackState(r.id, moved_racks.get(r.id, r.loc)) for r in state.racks)
    return WorldState(tuple(new_agvs), racks)


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class Plan:
    """Per-AGV action sequences with the trajectories they induce.

    ``agv_traj[id][t]`` is ``(vertex, loaded)``; ``rack_traj[id][t]`` a vertex.
    Trajectories have ``horizon + 1`` entries.
    """

    horizon: int
    actions: Mapping[str, tuple[Action, ...]]
    agv_traj: Mapping[str, tuple[tuple[Vertex, bool], ...]]
    rack_traj: Mapping[str, tuple[Vertex, ...]]

    @classmethod
    def from_actions(cls, instance: Instance, actions: Mapping[str, Sequence[Action]]) -> "Plan":
        """Replay ``actions`` from the instance start (raises IllegalAction)."""
        horizon = _common_length(actions, instance)
        state = instance.start
        states = [state]
        for t in range(horizon):
            state = apply_actions(instance, {k: v[t] for k, v in actions.items()}, state)
            states.append(state)
        return cls.from_states(instance, states, actions)

    @classmethod
    def from_states(
        cls, instance: Instance, states: Sequence[WorldState], actions: Mapping[str, Sequence[Action]]
    ) -> "Plan":
        horizon = len(states) - 1
        agv_traj = {
            a.id: tuple((s.agvs[i].loc, s.agvs[i].loaded) for s in states)
            for i, a in enumerate(instance.agvs)
        }
        rack_traj = {r.id: tuple(s.racks[i].loc for s in states) for i, r in enumerate(instance.racks)}
        acts = {a.id: tuple(actions.get(a.id, ())) for a in instance.agvs}
        return cls(horizon, acts, agv_traj, rack_traj)

    def agv_path(self, agv_id: str) -> list[Vertex]:
        return [v for v, _ in self.agv_traj[agv_id]]

    def state_at(self, instance: Instance, t: int) -> WorldState:
        agvs = []
        for a in instance.agvs:
            v, loaded = self.agv_traj[a.id][t]
            carrying = None
            if loaded:
                carrying = next((rid for rid, tr in self.rack_traj.items() if tr[t] == v), None)
                if carrying is None:
                    loaded = False
            agvs.append(AgvState(a.id, v, loaded, carrying))
        racks = tuple(RackState(r.id, self.rack_traj[r.id][t]) for r in instance.racks)
        return WorldState(tuple(agvs), racks)

    def truncated(self, steps: int) -> "Plan":
        steps = max(0, min(steps, self.horizon))
        return Plan(
            steps,
            {k: v[:steps] for k, v in self.actions.items()},
            {k: v[: steps + 1] for k, v in self.agv_traj.items()},
            {k: v[: steps + 1] for k, v in self.rack_traj.items()},
        )


def _common_length(actions: Mapping[str, Sequence[Action]], instance: Instance) -> int:
    lengths = {len(v) for v in actions.values()}
    if len(lengths) > 1:
        raise IllegalAction(f"action sequences of unequal length: {sorted(lengths)}")
    unknown = set(actions) - {a.id for a in instance.agvs}
    if unknown:
        raise IllegalAction(f"actions for unknown AGVs {sorted(unknown)}")
    return lengths.pop() if lengths else 0


def concat_plans(instance: Instance, pieces: Iterable[Plan]) -> Plan:
    """Stitch consecutive plan pieces by concatenating actions and replaying."""
    acts: dict[str, list[Action]] = {a.id: [] for a in instance.agvs}
    for p in pieces:
        for k in acts:
            acts[k].extend(p.actions[k])
    return Plan.from_actions(instance, acts)


def stay_plan(instance: Instance, horizon: int) -> Plan:
    return Plan.from_actions(instance, {a.id: [Action.STAY] * horizon for a in instance.agvs})


def action_between(v0: Vertex, l0: bool, v1: Vertex, l1: bool) -> Action:
    """Action taking an AGV from ``(v0, l0)`` to ``(v1, l1)``."""
    if v0 == v1:
        if l0 == l1:
            return Action.STAY
        return Action.LOAD if l1 else Action.UNLOAD
    if l0 != l1:
        raise IllegalAction(f"layer change while moving {v0}->{v1}")
    return Action.move(v1.x - v0.x, v1.y - v0.y)
