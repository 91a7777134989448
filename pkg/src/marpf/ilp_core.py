"""Integer program over the synchronised time-expanded networks.

Three binary flow families are declared per edge layer ``t``:

* ``alpha`` on the two-layer AGV network,
* ``beta`` on the rack network,
* ``gamma[i]`` on a private copy of the rack network for target ``i``.

The first layer (``t = 0``) carries the fixed start flows and the last layer
pins every target on a stay edge at its goal, so a plan with ``H`` actions
lives in a network of ``H + 2`` layers; plan step ``p`` is edge layer
``p + 1``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .backends import BackendResult, SolverBackend, Status, default_backend
from .domain import (
    Instance,
    MarpfError,
    Plan,
    Vertex,
    action_between,
    manhattan,
    stay_plan,
)
from .tx_network import W_O_RACK, W_RACK, StepEdge, TxEdge, TxNetworks, build_networks, edge_cost
from .validator import validate

log = logging.getLogger(__name__)

ALPHA, BETA, GAMMA = "alpha", "beta", "gamma"


class InfeasibleBoundary(MarpfError):
    pass


class MalformedFlow(MarpfError):
    pass


class NoSolutionWithinHorizon(MarpfError):
    def __init__(self, h_max: int):
        super().__init__(f"no plan with horizon <= {h_max}")
        self.h_max = h_max


class TimeBudgetExceeded(MarpfError):
    def __init__(self, budget: float, horizon: int):
        super().__init__(f"time budget {budget:.1f}s exhausted while trying horizon {horizon}")
        self.budget = budget
        self.horizon = horizon


@dataclass(frozen=True)
class VarIndex:
    family: str
    t: int
    vi: Vertex
    vo: Vertex
    li: int | None = None
    lo: int | None = None
    target_index: int | None = None

    @property
    def name(self) -> str:
        if self.family == ALPHA:
            return f"a_{self.t}_{self.vi.x}_{self.vi.y}_{self.li}_{self.vo.x}_{self.vo.y}_{self.lo}"
        prefix = "b" if self.family == BETA else f"g{self.target_index}"
        return f"{prefix}_{self.t}_{self.vi.x}_{self.vi.y}_{self.vo.x}_{self.vo.y}"

    @property
    def edge(self) -> TxEdge:
        return TxEdge(self.t, self.vi, self.vo, self.li, self.lo)


@dataclass
class Constraint:
    coeffs: dict[int, int]
    sense: str  # "=" or "<="
    rhs: int
    tag: str = ""


@dataclass
class IlpModel:
    """Binary program with integer data, indexed against a :class:`TxNetworks`.

    Variable ``j`` of family block ``fam`` at layer ``t`` with template edge
    ``k`` sits at ``offset[fam] + t * len(template) + k``.
    """

    networks: TxNetworks
    variables: list[VarIndex] = field(default_factory=list)
    lower: list[int] = field(default_factory=list)
    upper: list[int] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, int] = field(default_factory=dict)
    offsets: dict[tuple[str, int | None], int] = field(default_factory=dict)
    ag_pos: dict[StepEdge, int] = field(default_factory=dict)
    ar_pos: dict[StepEdge, int] = field(default_factory=dict)

    # --- indexing -------------------------------------------------------
    def alpha(self, t: int, vi: Vertex, vo: Vertex, li: int, lo: int) -> int:
        nA = len(self.networks.ag_step)
        return self.offsets[(ALPHA, None)] + t * nA + self.ag_pos[StepEdge(vi, vo, li, lo)]

    def beta(self, t: int, vi: Vertex, vo: Vertex) -> int:
        nR = len(self.networks.ar_step)
        return self.offsets[(BETA, None)] + t * nR + self.ar_pos[StepEdge(vi, vo)]

    def gamma(self, i: int, t: int, vi: Vertex, vo: Vertex) -> int:
        nR = len(self.networks.ar_step)
        return self.offsets[(GAMMA, i)] + t * nR + self.ar_pos[StepEdge(vi, vo)]

    def fix(self, j: int, value: int) -> None:
        if not self.lower[j] <= value <= self.upper[j]:
            raise InfeasibleBoundary(f"cannot fix {self.variables[j].name} to {value}")
        self.lower[j] = self.upper[j] = value

    def add(self, coeffs: dict[int, int], sense: str, rhs: int, tag: str) -> None:
        coeffs = {j: c for j, c in coeffs.items() if c}
        self.constraints.append(Constraint(coeffs, sense, rhs, tag))

    def _declare(self, family: str, template: Sequence[StepEdge], target_index: int | None = None) -> None:
        self.offsets[(family, target_index)] = len(self.variables)
        for t in range(self.networks.horizon):
            for e in template:
                self.variables.append(VarIndex(family, t, e.vi, e.vo, e.li, e.lo, target_index))
        n = self.networks.horizon * len(template)
        self.lower.extend([0] * n)
        self.upper.extend([1] * n)

    def family_slice(self, family: str, target_index: int | None = None) -> slice:
        start = self.offsets[(family, target_index)]
        size = len(self.networks.ag_step if family == ALPHA else self.networks.ar_step)
        return slice(start, start + self.networks.horizon * size)

    def constraint_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.constraints:
            out[c.tag] = out.get(c.tag, 0) + 1
        return out

    def evaluate(self, x: Sequence[float]) -> int:
        return int(round(sum(c * x[j] for j, c in self.objective.items())))

    def is_feasible(self, x: Sequence[float]) -> bool:
        """Check bounds and every constraint for an assignment (exact integers)."""
        for j, v in enumerate(x):
            if not self.lower[j] <= v <= self.upper[j]:
                return False
        for con in self.constraints:
            s = sum(c * x[j] for j, c in con.coeffs.items())
            if con.sense == "=" and s != con.rhs or con.sense == "<=" and s > con.rhs:
                return False
        return True

    def to_lp(self) -> str:
        """CPLEX-LP text for inspection with external solvers."""
        names = [v.name for v in self.variables]

        def expr(coeffs: dict[int, int]) -> str:
            if not coeffs:
                return "0 " + names[0]
            parts = []
            for j, c in coeffs.items():
                sign = "-" if c < 0 else "+"
                mag = "" if abs(c) == 1 else f"{abs(c)} "
                parts.append(f"{sign} {mag}{names[j]}")
            return " ".join(parts)

        lines = ["Minimize", " obj: " + expr(self.objective), "Subject To"]
        for i, con in enumerate(self.constraints):
            op = "=" if con.sense == "=" else "<="
            lines.append(f" {con.tag or 'c'}_{i}: {expr(con.coeffs)} {op} {con.rhs}")
        lines.append("Bounds")
        for j, n in enumerate(names):
            if self.lower[j] == self.upper[j]:
                lines.append(f" {n} = {self.lower[j]}")
        lines.append("Binaries")
        lines.extend(f" {n}" for n in names)
        lines.append("End")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# model assembly


def declare_variables(networks: TxNetworks) -> IlpModel:
    model = IlpModel(networks)
    model.ag_pos = {e: k for k, e in enumerate(networks.ag_step)}
    model.ar_pos = {e: k for k, e in enumerate(networks.ar_step)}
    model._declare(ALPHA, networks.ag_step)
    model._declare(BETA, networks.ar_step)
    return model


def extend_multi_target(model: IlpModel, instance: Instance, networks: TxNetworks) -> IlpModel:
    """Declare one gamma family per target rack (all sharing ``beta``)."""
    for i, _ in enumerate(instance.target_ids()):
        model._declare(GAMMA, networks.ar_step, i)
    return model


def fix_boundaries(model: IlpModel, instance: Instance, networks: TxNetworks,
                   pinned: Iterable[str] = ()) -> IlpModel:
    """Fix the first-layer start flows and the last-layer goal flows.

    AGVs that start loaded take their first-layer stay on the rack layer.
    Targets listed in ``pinned`` are held on their goal stay edge at every
    layer.
    """
    grid = networks.grid
    last = networks.horizon - 1
    agv_start = {(a.loc, W_RACK if a.loaded else W_O_RACK) for a in instance.agvs}
    for e in networks.ag_step:
        model.fix(model.alpha(0, *e), int(e.vi == e.vo and e.li == e.lo and (e.vi, e.li) in agv_start))
    rack_start = {r.loc for r in instance.racks}
    for e in networks.ar_step:
        model.fix(model.beta(0, e.vi, e.vo), int(e.vi == e.vo and e.vi in rack_start))
    pinned = set(pinned)
    for i, rid in enumerate(instance.target_ids()):
        s = instance.start.rack(rid).loc
        g = instance.targets[rid]
        if g not in grid:
            raise InfeasibleBoundary(f"goal {g} of {rid} is off the grid")
        for e in networks.ar_step:
            stay = e.vi == e.vo
            model.fix(model.gamma(i, 0, e.vi, e.vo), int(stay and e.vi == s))
            model.fix(model.gamma(i, last, e.vi, e.vo), int(stay and e.vi == g))
        if rid in pinned:
            if s != g:
                raise InfeasibleBoundary(f"pinned target {rid} is not at its goal")
            for t in range(1, last):
                model.fix(model.gamma(i, t, g, g), 1)
    return model


def emit_constraints(model: IlpModel, instance: Instance, networks: TxNetworks,
                     strict_load: bool = False) -> IlpModel:
    """Flow conservation, rack/AGV synchronisation, capacity and motion rules.

    With ``strict_load`` a load requires the rack to sit at the vertex already
    (``beta`` stay edge) instead of any rack flow into the vertex.
    """
    grid = networks.grid
    H = networks.horizon
    V = grid.vertices()
    ag_in: dict[tuple[Vertex, int], list[StepEdge]] = {}
    ag_out: dict[tuple[Vertex, int], list[StepEdge]] = {}
    ag_out_any: dict[Vertex, list[StepEdge]] = {}
    for e in networks.ag_step:
        ag_in.setdefault((e.vo, e.lo), []).append(e)
        ag_out.setdefault((e.vi, e.li), []).append(e)
        ag_out_any.setdefault(e.vi, []).append(e)
    ar_in: dict[Vertex, list[StepEdge]] = {}
    ar_out: dict[Vertex, list[StepEdge]] = {}
    for e in networks.ar_step:
        ar_in.setdefault(e.vo, []).append(e)
        ar_out.setdefault(e.vi, []).append(e)
    n_targets = len(instance.targets)

    for t in range(H):
        # flow conservation between layer t and t+1
        if t < H - 1:
            for v in V:
                for layer in (W_O_RACK, W_RACK):
                    c: dict[int, int] = {}
                    for e in ag_in[(v, layer)]:
                        c[model.alpha(t, *e)] = c.get(model.alpha(t, *e), 0) + 1
                    for e in ag_out[(v, layer)]:
                        j = model.alpha(t + 1, *e)
                        c[j] = c.get(j, 0) - 1
                    model.add(c, "=", 0, "agv_flow")
                c = {model.beta(t, e.vi, e.vo): 1 for e in ar_in[v]}
                for e in ar_out[v]:
                    c[model.beta(t + 1, e.vi, e.vo)] = -1
                model.add(c, "=", 0, "rack_flow")
                for i in range(n_targets):
                    c = {model.gamma(i, t, e.vi, e.vo): 1 for e in ar_in[v]}
                    for e in ar_out[v]:
                        c[model.gamma(i, t + 1, e.vi, e.vo)] = -1
                    model.add(c, "=", 0, "target_flow")

        # a rack moves along a grid edge iff a loaded AGV makes the same move
        for e in networks.ar_step:
            if e.vi != e.vo:
                model.add({model.beta(t, e.vi, e.vo): 1, model.alpha(t, e.vi, e.vo, W_RACK, W_RACK): -1},
                          "=", 0, "sync_rack")
        # target flows ride on rack flows
        for i in range(n_targets):
            for e in networks.ar_step:
                model.add({model.gamma(i, t, e.vi, e.vo): 1, model.beta(t, e.vi, e.vo): -1},
                          "<=", 0, "sync_target")
        for v in V:
            # loading needs a rack
            c = {model.alpha(t, v, v, W_O_RACK, W_RACK): 1}
            rack_edges = [StepEdge(v, v)] if strict_load else ar_in[v]
            for e in rack_edges:
                c[model.beta(t, e.vi, e.vo)] = -1
            model.add(c, "<=", 0, "load")
            # vertex capacity at t+1
            model.add({model.alpha(t, *e): 1 for e in ag_in[(v, W_O_RACK)] + ag_in[(v, W_RACK)]},
                      "<=", 1, "agv_capacity")
            model.add({model.beta(t, e.vi, e.vo): 1 for e in ar_in[v]}, "<=", 1, "rack_capacity")
        # entering an occupied cell only behind an occupant moving straight on
        for vi, vo in grid.edges():
            c = {}
            for layer in (W_O_RACK, W_RACK):
                j = model.alpha(t, vi, vo, layer, layer)
                c[j] = c.get(j, 0) + 1
            for e in ag_out_any[vo]:
                j = model.alpha(t, *e)
                c[j] = c.get(j, 0) + 1
            ahead = Vertex(2 * vo.x - vi.x, 2 * vo.y - vi.y)
            if ahead in grid:
                for layer in (W_O_RACK, W_RACK):
                    j = model.alpha(t, vo, ahead, layer, layer)
                    c[j] = c.get(j, 0) - 1
            model.add(c, "<=", 1, "motion")
    return model


def emit_objective(model: IlpModel, networks: TxNetworks) -> IlpModel:
    """Time-weighted AGV movement cost; rack flows are free."""
    nA = len(networks.ag_step)
    base = model.offsets[(ALPHA, None)]
    model.objective = {}
    for t in range(networks.horizon):
        for k, e in enumerate(networks.ag_step):
            cost = edge_cost(e.at(t))
            if cost:
                model.objective[base + t * nA + k] = cost
    return model


def prune_unreachable(model: IlpModel, instance: Instance, networks: TxNetworks) -> int:
    """Bound to zero the edge variables no feasible flow can use.

    Uses Manhattan reachability from the starts (and, for targets, towards
    the goal), which never excludes a feasible assignment. Returns the number
    of variables bounded.
    """
    H = networks.horizon - 2  # plan steps
    if H < 0:
        return 0
    agvs = instance.agvs
    racks = instance.racks
    V = networks.grid.vertices()
    carried = {a.carrying for a in agvs if a.loaded}

    def rack_delay(r) -> int:
        if r.id in carried:
            return 0
        return min(manhattan(a.loc, r.loc) + (2 if a.loaded else 1) for a in agvs)

    delay = {r.id: rack_delay(r) for r in racks}
    agv_e = {v: min(manhattan(a.loc, v) for a in agvs) for v in V}
    big = 10 ** 9

    def reach(r, v):
        return 0 if v == r.loc else delay[r.id] + manhattan(r.loc, v)

    rack_e = {v: min((reach(r, v) for r in racks), default=big) for v in V}
    count = 0

    def zero(j):
        nonlocal count
        if model.upper[j] and model.lower[j] == 0:
            model.upper[j] = 0
            count += 1

    for t in range(1, networks.horizon):
        p = t - 1
        for e in networks.ag_step:
            ok = agv_e[e.vi] <= p and agv_e[e.vo] <= p + 1
            if ok and e.li == W_RACK:
                ok = rack_e[e.vi] <= p and rack_e[e.vo] <= p + 1
            elif ok and e.lo == W_RACK:
                ok = rack_e[e.vi] <= p + 1
            if not ok:
                zero(model.alpha(t, *e))
        for e in networks.ar_step:
            if not (rack_e[e.vi] <= p and rack_e[e.vo] <= p + 1):
                zero(model.beta(t, e.vi, e.vo))
        for i, rid in enumerate(instance.target_ids()):
            r = instance.start.rack(rid)
            g = instance.targets[rid]
            for e in networks.ar_step:
                ok = reach(r, e.vi) <= p and reach(r, e.vo) <= p + 1
                ok = ok and manhattan(e.vi, g) <= H - p and manhattan(e.vo, g) <= max(H - p - 1, 0)
                if not ok:
                    zero(model.gamma(i, t, e.vi, e.vo))
    return count


def build_model(instance: Instance, networks: TxNetworks, *, pinned: Iterable[str] = (),
                strict_load: bool = False, prune: bool = True) -> IlpModel:
    model = declare_variables(networks)
    extend_multi_target(model, instance, networks)
    fix_boundaries(model, instance, networks, pinned)
    emit_constraints(model, instance, networks, strict_load)
    emit_objective(model, networks)
    if prune:
        prune_unreachable(model, instance, networks)
    return model


# ---------------------------------------------------------------------------
# decoding


def decode_plan(x: Sequence[float], networks: TxNetworks, instance: Instance, model: IlpModel) -> Plan:
    """Trace every AGV and rack flow unit from its start edge and build a Plan.

    The first (fixed) and last (goal-pinning) layers are dropped.
    """
    x = np.asarray(x)
    H_net = networks.horizon
    on = x > 0.5
    nA, nR = len(networks.ag_step), len(networks.ar_step)
    a0, b0 = model.offsets[(ALPHA, None)], model.offsets[(BETA, None)]
    ag_used: list[dict[tuple[Vertex, int], list[StepEdge]]] = []
    ar_used: list[dict[Vertex, list[StepEdge]]] = []
    for t in range(H_net):
        da: dict[tuple[Vertex, int], list[StepEdge]] = {}
        for k in np.flatnonzero(on[a0 + t * nA: a0 + (t + 1) * nA]):
            e = networks.ag_step[k]
            da.setdefault((e.vi, e.li), []).append(e)
        ag_used.append(da)
        dr: dict[Vertex, list[StepEdge]] = {}
        for k in np.flatnonzero(on[b0 + t * nR: b0 + (t + 1) * nR]):
            e = networks.ar_step[k]
            dr.setdefault(e.vi, []).append(e)
        ar_used.append(dr)

    def follow(used, start_key, who, key_of):
        node = start_key
        path = [node]
        for t in range(H_net):
            out = used[t].get(node, [])
            if len(out) != 1:
                raise MalformedFlow(f"{who}: {len(out)} outgoing unit flows at layer {t} from {node}")
            node = key_of(out[0])
            path.append(node)
        return path

    agv_paths = {}
    for a in instance.agvs:
        start = (a.loc, W_RACK if a.loaded else W_O_RACK)
        agv_paths[a.id] = follow(ag_used, start, a.id, lambda e: (e.vo, e.lo))
    rack_paths = {r.id: follow(ar_used, r.loc, r.id, lambda e: e.vo) for r in instance.racks}

    # plan time p is network node time p + 1
    steps = H_net - 2
    actions = {}
    for aid, path in agv_paths.items():
        actions[aid] = [action_between(path[p + 1][0], bool(path[p + 1][1]),
                                       path[p + 2][0], bool(path[p + 2][1])) for p in range(steps)]
    plan = Plan.from_actions(instance, actions)
    for rid, path in rack_paths.items():
        if tuple(path[1: steps + 2]) != plan.rack_traj[rid]:
            raise MalformedFlow(f"rack flow of {rid} disagrees with the AGV flows")
    return plan


# ---------------------------------------------------------------------------
# solving


@dataclass
class SolveReport:
    """Outcome of one solve.

    ``horizon_minimal`` is true when every shorter horizon was proven
    infeasible, i.e. ``makespan`` is optimal even if the cost objective is
    only ``Feasible``.
    """

    status: Status
    makespan: int | None = None
    plan: Plan | None = None
    solve_seconds: float = 0.0
    horizon_used: int | None = None
    objective_value: int | None = None
    gap: float | None = None
    horizon_minimal: bool = False
    attempts: list[tuple[int, str, float]] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status.has_solution


def horizon_lower_bound(instance: Instance) -> int:
    """Steps needed before every target can possibly rest at its goal.

    Each misplaced target needs an AGV to reach it, a load step and one move
    per unit of Manhattan distance (no load step if already carried).
    """
    lb = 0
    for rid, g in instance.targets.items():
        r = instance.start.rack(rid)
        d = manhattan(r.loc, g)
        if d == 0:
            continue
        extra = min(
            0 if a.carrying == rid else manhattan(a.loc, r.loc) + (2 if a.loaded else 1)
            for a in instance.agvs
        )
        lb = max(lb, d + extra)
    return lb


def _targets_home(instance: Instance) -> bool:
    return all(instance.start.rack(r).loc == g for r, g in instance.targets.items())


def solve_fixed_horizon(instance: Instance, horizon: int, backend: SolverBackend | None = None,
                        time_limit: float | None = None, *, polish_limit: float | None = None,
                        pinned: Iterable[str] = (), strict_load: bool = False,
                        prune: bool = True) -> SolveReport:
    """Solve for a plan of exactly ``horizon`` steps with targets home at the end.

    Runs in two phases: a pure feasibility solve, then cost minimisation
    warm-started from the feasible point. ``polish_limit`` caps the second
    phase (backend work units; deterministic time for CP-SAT). If it ends
    without a proof the report is ``Feasible`` with the best plan found.
    """
    backend = backend or default_backend()
    t0 = time.perf_counter()

    def left():
        return None if time_limit is None else max(time_limit - (time.perf_counter() - t0), 0.0)

    if horizon == 0:
        if _targets_home(instance):
            plan = stay_plan(instance, 0)
            return SolveReport(Status.OPTIMAL, 0, plan, time.perf_counter() - t0, 0, 0)
        return SolveReport(Status.INFEASIBLE, solve_seconds=time.perf_counter() - t0, horizon_used=0)
    networks = build_networks(instance, horizon + 2)
    model = build_model(instance, networks, pinned=pinned, strict_load=strict_load, prune=prune)
    first: BackendResult = backend.solve(model, left(), use_objective=False)
    if not first.status.has_solution:
        return SolveReport(first.status, solve_seconds=time.perf_counter() - t0, horizon_used=horizon)
    best, status, gap = first.x, Status.FEASIBLE, None
    remaining = left()
    if remaining is None or remaining > 0:
        res = backend.solve(model, remaining, hint=first.x, work_limit=polish_limit)
        if res.status.has_solution and model.evaluate(res.x) <= model.evaluate(best):
            best, status, gap = res.x, res.status, res.gap
    plan = decode_plan(best, networks, instance, model)
    rep = validate(instance, plan)
    if not rep.ok:
        raise MalformedFlow("decoded plan fails validation:\n" + rep.to_text())
    return SolveReport(status, rep.makespan, plan, time.perf_counter() - t0, horizon,
                       model.evaluate(best), gap)


def solve_min_horizon(instance: Instance, backend: SolverBackend | None = None,
                      time_limit: float | None = None, h_max: int | None = None, *,
                      h_min: int | None = None, polish_limit: float | None = None,
                      horizon_share: float = 0.5, pinned: Iterable[str] = (),
                      strict_load: bool = False, prune: bool = True) -> SolveReport:
    """Increase the horizon one step at a time until a plan exists.

    ``time_limit`` is the budget for the whole search; a single horizon may
    use at most ``horizon_share`` of what is left. When a horizon runs out of
    time without a verdict the search moves on, and a plan found later is
    reported with ``horizon_minimal=False``.
    """
    backend = backend or default_backend()
    lb = horizon_lower_bound(instance)
    if h_min is not None:
        lb = max(lb, h_min)
    if h_max is None:
        h_max = lb + 4 * instance.grid.n_vertices
    t0 = time.perf_counter()
    attempts = []
    proven = True
    for H in range(lb, h_max + 1):
        cap = None
        if time_limit is not None:
            remaining = time_limit - (time.perf_counter() - t0)
            if remaining <= 0:
                raise TimeBudgetExceeded(time_limit, H)
            cap = remaining if H == h_max else remaining * horizon_share
        rep = solve_fixed_horizon(instance, H, backend, cap, polish_limit=polish_limit,
                                  pinned=pinned, strict_load=strict_load, prune=prune)
        attempts.append((H, rep.status.value, rep.solve_seconds))
        log.debug("horizon %d: %s in %.2fs", H, rep.status.value, rep.solve_seconds)
        if rep.success:
            rep.solve_seconds = time.perf_counter() - t0
            rep.attempts = attempts
            rep.horizon_minimal = proven
            return rep
        if rep.status is Status.TIMEOUT:
            proven = False
    if not proven and time_limit is not None:
        raise TimeBudgetExceeded(time_limit, h_max)
    raise NoSolutionWithinHorizon(h_max)
