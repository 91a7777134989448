"""Pluggable exact solvers for binary integer programs.

A backend receives an :class:`~marpf.ilp_core.IlpModel` and returns a
:class:`BackendResult`. Shipped: OR-Tools CP-SAT (the default; fastest at
proving short horizons infeasible), HiGHS through ``scipy.optimize.milp``,
and a brute-force enumerator that only handles toy models but shares no code
with either solver, which makes it a useful cross-check.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Protocol

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import csr_array

from .domain import MarpfError

if TYPE_CHECKING:
    from .ilp_core import IlpModel


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    TIMEOUT = "Timeout"

    @property
    def has_solution(self) -> bool:
        return self in (Status.OPTIMAL, Status.FEASIBLE)


class BackendError(MarpfError):
    """The solver crashed or returned something we cannot classify."""


@dataclass
class BackendResult:
    status: Status
    x: np.ndarray | None = None
    objective: float | None = None
    gap: float | None = None
    seconds: float = 0.0


class SolverBackend(Protocol):
    """Contract every backend follows.

    ``use_objective=False`` asks for any feasible point (reported as
    OPTIMAL once found, since every point is optimal for a zero objective).
    ``hint`` is a warm-start assignment and ``work_limit`` a reproducible
    effort cap; backends that cannot honour them may ignore them.
    """

    name: str

    def solve(self, model: "IlpModel", time_limit: float | None = None, *,
              use_objective: bool = True, hint: np.ndarray | None = None,
              work_limit: float | None = None) -> BackendResult: ...


def model_arrays(model: "IlpModel", use_objective: bool = True):
    """Objective vector, sparse constraint matrix and row bounds."""
    n = len(model.variables)
    c = np.zeros(n)
    if use_objective:
        for j, coef in model.objective.items():
            c[j] = coef
    rows, cols, vals = [], [], []
    lo = np.empty(len(model.constraints))
    hi = np.empty(len(model.constraints))
    for i, con in enumerate(model.constraints):
        for j, coef in con.coeffs.items():
            rows.append(i)
            cols.append(j)
            vals.append(coef)
        hi[i] = con.rhs
        lo[i] = con.rhs if con.sense == "=" else -np.inf
    A = csr_array((vals, (rows, cols)), shape=(len(model.constraints), n))
    return c, A, lo, hi


class ScipyHighsBackend:
    """HiGHS branch-and-cut via :func:`scipy.optimize.milp`."""

    name = "highs"

    def __init__(self, mip_rel_gap: float = 0.0, presolve: bool = True):
        self.mip_rel_gap = mip_rel_gap
        self.presolve = presolve

    def solve(self, model: "IlpModel", time_limit: float | None = None, *,
              use_objective: bool = True, hint: np.ndarray | None = None,
              work_limit: float | None = None) -> BackendResult:
        t0 = time.perf_counter()
        c, A, lo, hi = model_arrays(model, use_objective)
        if work_limit is not None:
            time_limit = work_limit if time_limit is None else min(time_limit, work_limit)
        options = {"presolve": self.presolve, "mip_rel_gap": self.mip_rel_gap}
        if time_limit is not None:
            options["time_limit"] = max(float(time_limit), 0.01)
        constraints = [LinearConstraint(A, lo, hi)] if A.shape[0] else []
        try:
            res = milp(
                c,
                integrality=np.ones_like(c),
                bounds=Bounds(np.asarray(model.lower, float), np.asarray(model.upper, float)),
                constraints=constraints,
                options=options,
            )
        except Exception as exc:  # pragma: no cover - solver internals
            raise BackendError(f"HiGHS failed: {exc}") from exc
        elapsed = time.perf_counter() - t0
        if res.status == 0:
            return BackendResult(Status.OPTIMAL, np.round(res.x), float(res.fun), 0.0, elapsed)
        if res.status == 1:
            if res.x is not None:
                gap = getattr(res, "mip_gap", None)
                return BackendResult(Status.FEASIBLE, np.round(res.x), float(res.fun), gap, elapsed)
            return BackendResult(Status.TIMEOUT, seconds=elapsed)
        if res.status == 2:
            return BackendResult(Status.INFEASIBLE, seconds=elapsed)
        raise BackendError(f"HiGHS returned status {res.status}: {res.message}")


class CpSatBackend:
    """OR-Tools CP-SAT on the pure-binary model.

    A single search worker keeps runs reproducible on a fixed seed.
    """

    name = "cpsat"

    def __init__(self, workers: int = 1, seed: int = 0):
        self.workers = workers
        self.seed = seed

    def solve(self, model: "IlpModel", time_limit: float | None = None, *,
              use_objective: bool = True, hint: np.ndarray | None = None,
              work_limit: float | None = None) -> BackendResult:
        from ortools.sat.python import cp_model

        t0 = time.perf_counter()
        m = cp_model.CpModel()
        xs = [m.new_int_var(lo, up, "") for lo, up in zip(model.lower, model.upper)]
        for con in model.constraints:
            if not con.coeffs:
                if con.rhs < 0 or (con.sense == "=" and con.rhs != 0):
                    return BackendResult(Status.INFEASIBLE, seconds=time.perf_counter() - t0)
                continue
            expr = cp_model.LinearExpr.weighted_sum([xs[j] for j in con.coeffs], list(con.coeffs.values()))
            if con.sense == "=":
                m.add(expr == con.rhs)
            else:
                m.add(expr <= con.rhs)
        use_objective = use_objective and bool(model.objective)
        if use_objective:
            m.minimize(cp_model.LinearExpr.weighted_sum(
                [xs[j] for j in model.objective], list(model.objective.values())))
        if hint is not None:
            for v, h in zip(xs, hint):
                m.add_hint(v, int(round(h)))
        solver = cp_model.CpSolver()
        solver.parameters.num_workers = self.workers
        solver.parameters.random_seed = self.seed
        if time_limit is not None:
            solver.parameters.max_time_in_seconds = max(float(time_limit), 0.01)
        if work_limit is not None:
            solver.parameters.max_deterministic_time = float(work_limit)
        try:
            st = solver.solve(m)
        except Exception as exc:  # pragma: no cover - solver internals
            raise BackendError(f"CP-SAT failed: {exc}") from exc
        elapsed = time.perf_counter() - t0
        if st in (cp_model.OPTIMAL, cp_model.FEASIBLE):
            x = np.array([solver.value(v) for v in xs], dtype=float)
            obj = float(solver.objective_value) if use_objective else 0.0
            if st == cp_model.OPTIMAL:
                return BackendResult(Status.OPTIMAL, x, obj, 0.0, elapsed)
            bound = solver.best_objective_bound
            gap = (obj - bound) / max(abs(obj), 1.0)
            return BackendResult(Status.FEASIBLE, x, obj, gap, elapsed)
        if st == cp_model.INFEASIBLE:
            return BackendResult(Status.INFEASIBLE, seconds=elapsed)
        if st == cp_model.UNKNOWN:
            return BackendResult(Status.TIMEOUT, seconds=elapsed)
        raise BackendError(f"CP-SAT returned {solver.status_name(st)}")


class EnumerationBackend:
    """Exhaustive depth-first search over the free binaries. Toy models only.

    A branch is cut when some constraint can no longer be met by any setting
    of its unassigned variables, or when its cost cannot beat the incumbent.
    """

    name = "enumerate"

    def __init__(self, max_free: int = 60):
        self.max_free = max_free

    def solve(self, model: "IlpModel", time_limit: float | None = None, *,
              use_objective: bool = True, hint: np.ndarray | None = None,
              work_limit: float | None = None) -> BackendResult:
        t0 = time.perf_counter()
        n = len(model.variables)
        cost = np.zeros(n)
        if use_objective:
            for j, coef in model.objective.items():
                cost[j] = coef
        free = [j for j in range(n) if model.lower[j] < model.upper[j]]
        if len(free) > self.max_free:
            raise BackendError(f"{len(free)} free binaries exceed enumeration limit {self.max_free}")
        x = np.array(model.lower, dtype=float)
        cons = [(c.coeffs, c.sense, c.rhs) for c in model.constraints]
        touches: dict[int, list[int]] = {j: [] for j in free}
        # activity of fixed part plus the reachable interval of the free part
        act = np.zeros(len(cons))
        lo = np.zeros(len(cons))
        hi = np.zeros(len(cons))
        for i, (coeffs, _, _) in enumerate(cons):
            for j, c in coeffs.items():
                if j in touches:
                    touches[j].append(i)
                    lo[i] += min(c, 0)
                    hi[i] += max(c, 0)
                else:
                    act[i] += c * x[j]

        def ok(i):
            _, sense, rhs = cons[i]
            if act[i] + lo[i] > rhs + 1e-9:
                return False
            return sense != "=" or act[i] + hi[i] >= rhs - 1e-9

        if not all(ok(i) for i in range(len(cons))):
            return BackendResult(Status.INFEASIBLE, seconds=time.perf_counter() - t0)
        # optimistic bound on the remaining objective
        rest = np.zeros(len(free) + 1)
        for k in range(len(free) - 1, -1, -1):
            rest[k] = rest[k + 1] + min(cost[free[k]], 0)
        best = {"val": np.inf, "x": None}
        timed_out = False

        def dfs(k, val):
            nonlocal timed_out
            if timed_out:
                return
            if time_limit is not None and time.perf_counter() - t0 > time_limit:
                timed_out = True
                return
            if val + rest[k] >= best["val"]:
                return
            if k == len(free):
                best["val"], best["x"] = val, x.copy()
                return
            j = free[k]
            for v in (0.0, 1.0):
                x[j] = v
                for i in touches[j]:
                    c = cons[i][0][j]
                    lo[i] -= min(c, 0)
                    hi[i] -= max(c, 0)
                    act[i] += c * v
                if all(ok(i) for i in touches[j]):
                    dfs(k + 1, val + cost[j] * v)
                for i in touches[j]:
                    c = cons[i][0][j]
                    lo[i] += min(c, 0)
                    hi[i] += max(c, 0)
                    act[i] -= c * v
            x[j] = model.lower[j]

        dfs(0, 0.0)
        elapsed = time.perf_counter() - t0
        if timed_out:
            status = Status.FEASIBLE if best["x"] is not None else Status.TIMEOUT
            return BackendResult(status, best["x"], None if best["x"] is None else best["val"],
                                 None, elapsed)
        if best["x"] is None:
            return BackendResult(Status.INFEASIBLE, seconds=elapsed)
        return BackendResult(Status.OPTIMAL, best["x"], float(best["val"]), 0.0, elapsed)


BACKENDS = {"cpsat": CpSatBackend, "highs": ScipyHighsBackend, "enumerate": EnumerationBackend}
DEFAULT_BACKEND = "cpsat"


def default_backend() -> SolverBackend:
    return BACKENDS[DEFAULT_BACKEND]()


def get_backend(name: str = DEFAULT_BACKEND) -> SolverBackend:
    try:
        return BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}") from None
