"""Waypoint-guided solver: global CA* paths, then short local ILP rounds.

Each round builds a sub-instance from the current world state whose goals
are the next pending waypoints, solves it exactly, and executes the plan
only until the first target reaches its waypoint. Delivered targets stay
pinned at their goals in later rounds.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Mapping

from .backends import SolverBackend, default_backend
from .castar import GlobalPath, Waypoints, extract_waypoints, plan_global_rack_paths
from .domain import Instance, MarpfError, Plan, Vertex, WorldState, concat_plans, stay_plan
from .formats import serialize_instance
from .ilp_core import (
    NoSolutionWithinHorizon,
    SolveReport,
    TimeBudgetExceeded,
    horizon_lower_bound,
    solve_min_horizon,
)
from .validator import validate

log = logging.getLogger(__name__)


class HybridError(MarpfError):
    def __init__(self, msg: str, round_index: int, snapshot: Instance):
        super().__init__(f"round {round_index}: {msg}")
        self.round_index = round_index
        self.snapshot = snapshot

    def snapshot_text(self) -> str:
        return serialize_instance(self.snapshot)


class RoundInfeasible(HybridError):
    pass


class RoundTimeout(HybridError):
    pass


class MaxRoundsExceeded(HybridError):
    pass


@dataclass
class HybridConfig:
    tau: int = 4
    kappa: float = 3.0
    local_time_limit: float = 120.0
    # local horizons are tried from the lower bound up to lb + slack first,
    # then widened to the exact solver's default cap if nothing fits
    local_horizon_slack: int = 10
    max_rounds: int | None = None
    polish_limit: float | None = 2.0

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.kappa <= 1:
            raise ValueError("kappa must exceed 1")
        if self.local_horizon_slack < 0:
            raise ValueError("local_horizon_slack must be >= 0")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValueError("max_rounds must be positive")


@dataclass
class HybridReport:
    plan: Plan
    makespan: int
    rounds: list[SolveReport] = field(default_factory=list)
    global_paths: list[GlobalPath] = field(default_factory=list)
    waypoints: list[Waypoints] = field(default_factory=list)
    trace: list[str] = field(default_factory=list)
    round_steps: list[int] = field(default_factory=list)
    solve_seconds: float = 0.0


def make_local_instance(instance: Instance, state: WorldState,
                        goals: Mapping[str, Vertex]) -> Instance:
    """Same grid and entities, starting from ``state``, with ``goals`` as targets."""
    return instance.with_state(state, dict(goals))


def truncate_at_first_arrival(plan: Plan, waypoints: Mapping[str, Vertex]) -> tuple[Plan, int]:
    """Cut ``plan`` at the first step where any listed rack sits on its waypoint."""
    arrival = plan.horizon
    for rid, wp in waypoints.items():
        traj = plan.rack_traj[rid]
        hit = next((t for t, v in enumerate(traj) if v == wp), None)
        if hit is not None:
            arrival = min(arrival, hit)
    return plan.truncated(arrival), arrival


class _Pointers:
    """Per-target position in its waypoint list."""

    def __init__(self, waypoints: list[Waypoints]):
        self.points = {w.rack_id: w.points for w in waypoints}
        self.idx = {w.rack_id: 0 for w in waypoints}

    def done(self, rid: str) -> bool:
        return self.idx[rid] >= len(self.points[rid])

    def current(self, rid: str) -> Vertex:
        return self.points[rid][self.idx[rid]]

    def is_final(self, rid: str) -> bool:
        return self.idx[rid] == len(self.points[rid]) - 1

    def total_pending(self) -> int:
        return sum(len(self.points[r]) - self.idx[r] for r in self.points)

    def settle(self, state: WorldState, order: list[str]) -> None:
        """Skip waypoints already reached or clashing with another rack's goal."""
        changed = True
        while changed:
            changed = False
            taken: dict[Vertex, str] = {}
            for rid in order:
                if self.done(rid):
                    taken[self.points[rid][-1]] = rid
            for rid in order:
                if self.done(rid):
                    continue
                wp = self.current(rid)
                if state.rack(rid).loc == wp:
                    self.idx[rid] += 1
                    changed = True
                    break
                if wp in taken:
                    if not self.is_final(rid):
                        self.idx[rid] += 1
                        changed = True
                        break
                    other = taken[wp]
                    # a final goal outranks the other's intermediate waypoint
                    self.idx[other] += 1
                    changed = True
                    break
                taken[wp] = rid


def _solve_round(local: Instance, backend: SolverBackend, config: HybridConfig,
                 pinned: list[str]) -> SolveReport:
    t0 = time.perf_counter()
    near = horizon_lower_bound(local) + config.local_horizon_slack
    try:
        return solve_min_horizon(local, backend, config.local_time_limit, h_max=near,
                                 polish_limit=config.polish_limit, pinned=pinned)
    except NoSolutionWithinHorizon:
        pass
    remaining = config.local_time_limit - (time.perf_counter() - t0)
    if remaining <= 0:
        raise TimeBudgetExceeded(config.local_time_limit, near)
    return solve_min_horizon(local, backend, remaining, h_min=near + 1,
                             polish_limit=config.polish_limit, pinned=pinned)


def solve_hybrid(instance: Instance, config: HybridConfig | None = None,
                 backend: SolverBackend | None = None) -> HybridReport:
    config = config or HybridConfig()
    backend = backend or default_backend()
    t0 = time.perf_counter()
    order = instance.target_ids()
    paths = plan_global_rack_paths(instance, config.kappa)
    waypoints = [extract_waypoints(p, config.tau) for p in paths]
    ptr = _Pointers(waypoints)
    max_rounds = config.max_rounds or 4 * max(ptr.total_pending(), 1)
    state = instance.start
    pieces: list[Plan] = []
    rounds: list[SolveReport] = []
    trace: list[str] = []
    ptr.settle(state, order)
    rnd = 0
    while not all(ptr.done(r) for r in order):
        snapshot = instance.with_state(state)
        if rnd >= max_rounds:
            raise MaxRoundsExceeded(f"gave up after {max_rounds} rounds", rnd, snapshot)
        pending = {r: ptr.current(r) for r in order if not ptr.done(r)}
        pinned = [r for r in order if ptr.done(r)]
        goals = {r: (pending[r] if r in pending else instance.targets[r]) for r in order}
        local = make_local_instance(instance, state, goals)
        try:
            rep = _solve_round(local, backend, config, pinned)
        except NoSolutionWithinHorizon as exc:
            trace.append(f"round={rnd} horizon>{exc.h_max} status=Infeasible arrival=-")
            raise RoundInfeasible(str(exc), rnd, snapshot) from None
        except TimeBudgetExceeded as exc:
            trace.append(f"round={rnd} horizon={exc.horizon} status=Timeout arrival=-")
            raise RoundTimeout(str(exc), rnd, snapshot) from None
        prefix, arrival = truncate_at_first_arrival(rep.plan, pending)
        trace.append(f"round={rnd} horizon={rep.horizon_used} status={rep.status.value} arrival={arrival}")
        log.debug(trace[-1])
        rounds.append(rep)
        pieces.append(prefix)
        state = prefix.state_at(local, prefix.horizon)
        ptr.settle(state, order)
        rnd += 1

    plan = concat_plans(instance, pieces) if pieces else stay_plan(instance, 0)
    check = validate(instance, plan)
    if not check.ok:
        raise MarpfError("stitched plan fails validation:\n" + check.to_text())
    return HybridReport(plan, check.makespan, rounds, paths, waypoints, trace,
                        [p.horizon for p in pieces], time.perf_counter() - t0)
