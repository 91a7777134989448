"""Instance generation, experiment protocols and plan rendering."""

from __future__ import annotations

import csv
import io
import random
import time
from dataclasses import dataclass, field
from importlib import resources

from .backends import SolverBackend, default_backend
from .castar import NoPath, plan_baseline
from .domain import AgvState, GridMap, Instance, MarpfError, Plan, RackState, Vertex
from .formats import parse_instance
from .hybrid import HybridConfig, HybridError, solve_hybrid
from .ilp_core import NoSolutionWithinHorizon, TimeBudgetExceeded, solve_min_horizon
from .validator import validate

CSV_HEADER = ("trial", "seed", "mode", "tau", "racks", "agvs", "success", "makespan", "solve_seconds")
EXP_GRID = GridMap(6, 4)


class CapacityExceeded(MarpfError):
    pass


class RenderOnInvalidPlan(MarpfError):
    pass


def load_layout(name: str) -> Instance:
    """Shipped layouts: ``blocked_corridor`` and ``exp1_base``."""
    text = resources.files("marpf.data").joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return parse_instance(text)


def generate_instance(grid: GridMap, n_agvs: int, n_racks: int, n_targets: int, seed: int) -> Instance:
    """Uniform random placement; targets are the first racks, goals rack-free."""
    n = grid.n_vertices
    if n_agvs > n or n_racks > n:
        raise CapacityExceeded(f"{n_agvs} AGVs / {n_racks} racks do not fit {n} vertices")
    if n_targets > n_racks or n_targets > n - n_racks:
        raise CapacityExceeded(f"cannot place {n_targets} target goals on {n - n_racks} free vertices")
    rng = random.Random(seed)
    vs = grid.vertices()
    agv_locs = rng.sample(vs, n_agvs)
    rack_locs = rng.sample(vs, n_racks)
    free = [v for v in vs if v not in set(rack_locs)]
    goals = rng.sample(free, n_targets)
    return Instance(
        grid,
        tuple(AgvState(f"a{i}", v) for i, v in enumerate(agv_locs)),
        tuple(RackState(f"r{i}", v) for i, v in enumerate(rack_locs)),
        {f"r{i}": g for i, g in enumerate(goals)},
    )


def exp1_instance(k: int, seed: int, base: Instance | None = None) -> Instance:
    """Base layout plus ``k`` racks on random vertices that hold no rack or goal."""
    base = base or load_layout("exp1_base")
    occupied = {r.loc for r in base.racks} | set(base.targets.values())
    free = [v for v in base.grid.vertices() if v not in occupied]
    if k > len(free):
        raise CapacityExceeded(f"only {len(free)} vertices left for added racks")
    added = random.Random(seed).sample(free, k)
    racks = base.racks + tuple(RackState(f"x{i}", v) for i, v in enumerate(added))
    return Instance(base.grid, base.agvs, racks, base.targets)


# two targets swap opposite corners of the 6x4 grid
EXP2_TARGETS = ((Vertex(0, 0), Vertex(5, 3)), (Vertex(5, 0), Vertex(0, 3)))


def exp2_instance(seed: int, n_racks: int = 12, n_agvs: int = 8) -> Instance:
    """Fixed crossing targets; AGVs and obstacle racks placed at random."""
    grid = EXP_GRID
    goals = {g for _, g in EXP2_TARGETS}
    starts = [s for s, _ in EXP2_TARGETS]
    cells = [v for v in grid.vertices() if v not in goals and v not in starts]
    n_obst = n_racks - len(EXP2_TARGETS)
    if n_obst < 0 or n_obst > len(cells) or n_agvs > grid.n_vertices:
        raise CapacityExceeded(f"{n_racks} racks / {n_agvs} AGVs do not fit the exp2 layout")
    rng = random.Random(seed)
    obst = rng.sample(cells, n_obst)
    agv_locs = rng.sample(grid.vertices(), n_agvs)
    racks = [RackState(f"t{i}", s) for i, (s, _) in enumerate(EXP2_TARGETS)]
    racks += [RackState(f"o{i}", v) for i, v in enumerate(obst)]
    return Instance(
        grid,
        tuple(AgvState(f"a{i}", v) for i, v in enumerate(agv_locs)),
        tuple(racks),
        {f"t{i}": g for i, (_, g) in enumerate(EXP2_TARGETS)},
    )


# ---------------------------------------------------------------------------
# experiments


@dataclass
class BenchConfig:
    experiment: str = "exp1"
    trials: int = 30
    seed: int = 0
    modes: tuple[str, ...] = ()
    taus: tuple[int, ...] = (1, 2, 4)
    kappa: float = 3.0
    time_limit_s: float = 120.0
    local_time_limit_s: float = 120.0
    max_added: int = 6
    racks: int = 12
    agvs: int = 8
    polish_limit: float | None = 2.0

    def __post_init__(self):
        if self.experiment not in ("exp1", "exp2"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.modes:
            self.modes = ("castar", "ilp") if self.experiment == "exp1" else ("hybrid", "ilp")


@dataclass
class MetricsRow:
    trial: int
    seed: int
    mode: str
    tau: int | None
    racks: int
    agvs: int
    success: bool
    makespan: int | None
    solve_seconds: float
    # not written to CSV
    optimal: bool = False
    plan: Plan | None = field(default=None, repr=False)
    instance: Instance | None = field(default=None, repr=False)

    def csv_fields(self) -> list[str]:
        return [
            str(self.trial),
            str(self.seed),
            self.mode,
            "" if self.tau is None else str(self.tau),
            str(self.racks),
            str(self.agvs),
            "1" if self.success else "0",
            "" if self.makespan is None else str(self.makespan),
            f"{self.solve_seconds:.3f}",
        ]


def rows_to_csv(rows: list[MetricsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(rows, key=lambda r: (r.trial, r.racks, r.mode, r.tau or 0)):
        w.writerow(r.csv_fields())
    return buf.getvalue()


def trial_seed(base_seed: int, group: int, trial: int) -> int:
    return base_seed * 1_000_000 + group * 1000 + trial


def _row(trial, seed, mode, tau, inst, plan, makespan, seconds, optimal=False) -> MetricsRow:
    ok = plan is not None
    if ok and not validate(inst, plan).ok:
        raise MarpfError(f"{mode} produced an invalid plan on trial {trial}")
    return MetricsRow(trial, seed, mode, tau, inst.N, inst.M, ok, makespan if ok else None,
                      seconds, optimal, plan, inst)


def run_ilp(inst: Instance, time_limit: float, backend: SolverBackend,
            polish_limit: float | None = None):
    """``(plan, makespan, seconds, horizon proven minimal)``; plan is None on failure."""
    t0 = time.perf_counter()
    try:
        rep = solve_min_horizon(inst, backend, time_limit, polish_limit=polish_limit)
    except (TimeBudgetExceeded, NoSolutionWithinHorizon):
        return None, None, time.perf_counter() - t0, False
    return rep.plan, rep.makespan, time.perf_counter() - t0, rep.horizon_minimal


def run_exp1(config: BenchConfig, backend: SolverBackend | None = None) -> list[MetricsRow]:
    backend = backend or default_backend()
    base = load_layout("exp1_base")
    rows = []
    for k in range(config.max_added + 1):
        for trial in range(config.trials):
            seed = trial_seed(config.seed, k, trial)
            inst = exp1_instance(k, seed, base)
            for mode in config.modes:
                if mode == "castar":
                    t0 = time.perf_counter()
                    try:
                        rep = plan_baseline(inst, config.time_limit_s)
                        plan, ms = rep.plan, rep.makespan
                    except NoPath:
                        plan, ms = None, None
                    rows.append(_row(trial, seed, mode, None, inst, plan, ms, time.perf_counter() - t0))
                elif mode == "ilp":
                    plan, ms, sec, opt = run_ilp(inst, config.time_limit_s, backend, config.polish_limit)
                    rows.append(_row(trial, seed, mode, None, inst, plan, ms, sec, opt))
                else:
                    raise ValueError(f"exp1 does not run mode {mode!r}")
    return rows


def run_exp2(config: BenchConfig, backend: SolverBackend | None = None) -> list[MetricsRow]:
    backend = backend or default_backend()
    rows = []
    for trial in range(config.trials):
        seed = trial_seed(config.seed, config.racks, trial)
        inst = exp2_instance(seed, config.racks, config.agvs)
        for mode in config.modes:
            if mode == "hybrid":
                for tau in config.taus:
                    cfg = HybridConfig(tau=tau, kappa=config.kappa,
                                       local_time_limit=config.local_time_limit_s,
                                       polish_limit=config.polish_limit)
                    t0 = time.perf_counter()
                    try:
                        rep = solve_hybrid(inst, cfg, backend)
                        plan, ms = rep.plan, rep.makespan
                    except (HybridError, NoPath):
                        plan, ms = None, None
                    rows.append(_row(trial, seed, mode, tau, inst, plan, ms, time.perf_counter() - t0))
            elif mode == "ilp":
                plan, ms, sec, opt = run_ilp(inst, config.time_limit_s, backend, config.polish_limit)
                rows.append(_row(trial, seed, mode, None, inst, plan, ms, sec, opt))
            else:
                raise ValueError(f"exp2 does not run mode {mode!r}")
    return rows


def summarize(rows: list[MetricsRow]) -> list[tuple[str, int | None, int, float, float | None]]:
    """``(mode, tau, racks, success rate, mean makespan of successes)`` per group."""
    groups: dict[tuple, list[MetricsRow]] = {}
    for r in rows:
        groups.setdefault((r.mode, r.tau, r.racks), []).append(r)
    out = []
    for (mode, tau, racks), rs in sorted(groups.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1] or 0)):
        ok = [r.makespan for r in rs if r.success]
        out.append((mode, tau, racks, len(ok) / len(rs), sum(ok) / len(ok) if ok else None))
    return out


# ---------------------------------------------------------------------------
# rendering


def render_plan(instance: Instance, plan: Plan, fmt: str = "ascii") -> str:
    rep = validate(instance, plan)
    if not rep.ok:
        raise RenderOnInvalidPlan("refusing to render an invalid plan:\n" + rep.to_text())
    if fmt == "ascii":
        return _render_ascii(instance, plan)
    if fmt == "svg":
        return _render_svg(instance, plan)
    raise ValueError(f"unknown render format {fmt!r}")


def _render_ascii(instance: Instance, plan: Plan) -> str:
    g = instance.grid
    goals = set(instance.targets.values())
    frames = []
    for t in range(plan.horizon + 1):
        cells = [["*" if Vertex(x, y) in goals else "." for x in range(g.size_x)] for y in range(g.size_y)]
        for tr in plan.rack_traj.values():
            v = tr[t]
            cells[v.y][v.x] = "R"
        for tr in plan.agv_traj.values():
            v, loaded = tr[t]
            cells[v.y][v.x] = "A" if loaded else "a"
        frames.append(f"t={t}\n" + "\n".join("".join(row) for row in cells) + "\n")
    return "\n".join(frames)


def _render_svg(instance: Instance, plan: Plan, cell: int = 40, step_s: float = 0.5) -> str:
    g = instance.grid
    n = plan.horizon + 1
    dur = f"{n * step_s:g}s"
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{g.size_x * cell}" height="{g.size_y * cell}">',
    ]
    for v in g.vertices():
        out.append(f'<rect x="{v.x * cell}" y="{v.y * cell}" width="{cell}" height="{cell}" '
                   'fill="white" stroke="#999"/>')
    for goal in instance.targets.values():
        out.append(f'<rect x="{goal.x * cell + 4}" y="{goal.y * cell + 4}" width="{cell - 8}" '
                   f'height="{cell - 8}" fill="#ffe9a8"/>')

    def animated(xs, ys, size, off, fills):
        x0, y0 = xs[0] * cell + off, ys[0] * cell + off
        parts = [f'<rect x="{x0}" y="{y0}" width="{size}" height="{size}" fill="{fills[0]}">']
        for attr, vals in (("x", [x * cell + off for x in xs]), ("y", [y * cell + off for y in ys]),
                           ("fill", fills)):
            if len(set(vals)) > 1:
                parts.append(f'<animate attributeName="{attr}" values="{";".join(map(str, vals))}" '
                             f'dur="{dur}" calcMode="discrete" repeatCount="indefinite"/>')
        parts.append("</rect>")
        return "".join(parts)

    for rid, tr in plan.rack_traj.items():
        color = "#c0392b" if rid in instance.targets else "#7f8c8d"
        out.append(animated([v.x for v in tr], [v.y for v in tr], cell - 6, 3, [color] * n))
    for tr in plan.agv_traj.values():
        fills = ["#2e86de" if loaded else "#74b9ff" for _, loaded in tr]
        out.append(animated([v.x for v, _ in tr], [v.y for v, _ in tr], cell // 2, cell // 4, fills))
    out.append("</svg>")
    return "\n".join(out) + "\n"
