"""Line-based text formats for instances and plans.

Instance file (``#`` starts a comment)::

    grid <size_x> <size_y>
    agv <id> <x> <y> [carrying <rack-id>]
    rack <id> <x> <y>
    target <rack-id> <goal-x> <goal-y>

The optional ``carrying`` suffix describes an AGV that starts loaded; it only
appears in intermediate states written by the hybrid solver.

Plan file::

    plan <horizon>
    t=<t> <agv-id> <STAY|MOVE E|MOVE W|MOVE S|MOVE N|LOAD|UNLOAD>
"""

from __future__ import annotations

from pathlib import Path

from .domain import Action, AgvState, GridMap, Instance, ParseError, Plan, RackState, Vertex


def _int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(lineno, f"bad {what} {tok!r}") from None


def parse_instance(text: str) -> Instance:
    grid = None
    agvs: list[tuple[int, str, Vertex, str | None]] = []
    racks: list[tuple[int, str, Vertex]] = []
    targets: list[tuple[int, str, Vertex]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kind = tok[0]
        if kind == "grid":
            if len(tok) != 3:
                raise ParseError(lineno, "expected 'grid <size_x> <size_y>'")
            if grid is not None:
                raise ParseError(lineno, "duplicate grid line")
            sx, sy = _int(tok[1], lineno, "size_x"), _int(tok[2], lineno, "size_y")
            if sx < 1 or sy < 1:
                raise ParseError(lineno, "grid sizes must be positive")
            grid = GridMap(sx, sy)
        elif kind in ("agv", "rack", "target"):
            if grid is None:
                raise ParseError(lineno, f"'{kind}' before 'grid'")
            carrying = None
            if kind == "agv" and len(tok) == 6 and tok[4] == "carrying":
                carrying = tok[5]
            elif len(tok) != 4:
                raise ParseError(lineno, f"expected '{kind} <id> <x> <y>'")
            v = Vertex(_int(tok[2], lineno, "x"), _int(tok[3], lineno, "y"))
            if v not in grid:
                raise ParseError(lineno, f"coordinate {v} outside {grid.size_x}x{grid.size_y} grid")
            if kind == "agv":
                agvs.append((lineno, tok[1], v, carrying))
            elif kind == "rack":
                racks.append((lineno, tok[1], v))
            else:
                targets.append((lineno, tok[1], v))
        else:
            raise ParseError(lineno, f"unknown record {kind!r}")
    if grid is None:
        raise ParseError(0, "missing 'grid' line")

    # occupancy checks with line numbers before handing over to Instance
    seen_ids: dict[str, int] = {}
    agv_at: dict[Vertex, str] = {}
    for lineno, aid, v, _ in agvs:
        if aid in seen_ids:
            raise ParseError(lineno, f"duplicate AGV id {aid!r}")
        seen_ids[aid] = lineno
        if v in agv_at:
            raise ParseError(lineno, f"AGV {aid} overlaps AGV {agv_at[v]} at {v}")
        agv_at[v] = aid
    rack_ids: dict[str, Vertex] = {}
    rack_at: dict[Vertex, str] = {}
    for lineno, rid, v in racks:
        if rid in rack_ids:
            raise ParseError(lineno, f"duplicate rack id {rid!r}")
        if v in rack_at:
            raise ParseError(lineno, f"rack {rid} overlaps rack {rack_at[v]} at {v}")
        rack_ids[rid] = v
        rack_at[v] = rid
    goals: dict[str, Vertex] = {}
    for lineno, rid, v in targets:
        if rid not in rack_ids:
            raise ParseError(lineno, f"target refers to unknown rack {rid!r}")
        if rid in goals:
            raise ParseError(lineno, f"duplicate target for rack {rid!r}")
        if v in goals.values():
            raise ParseError(lineno, f"goal {v} already assigned")
        goals[rid] = v
    for lineno, aid, v, carrying in agvs:
        if carrying is not None and rack_at.get(v) != carrying:
            raise ParseError(lineno, f"AGV {aid} carries {carrying!r} but that rack is not at {v}")
    if not agvs:
        raise ParseError(0, "no AGV declared")

    return Instance(
        grid,
        tuple(AgvState(aid, v, c is not None, c) for _, aid, v, c in agvs),
        tuple(RackState(rid, v) for _, rid, v in racks),
        goals,
    )


def serialize_instance(inst: Instance) -> str:
    lines = [f"grid {inst.grid.size_x} {inst.grid.size_y}"]
    for a in inst.agvs:
        suffix = f" carrying {a.carrying}" if a.loaded else ""
        lines.append(f"agv {a.id} {a.loc.x} {a.loc.y}{suffix}")
    for r in inst.racks:
        lines.append(f"rack {r.id} {r.loc.x} {r.loc.y}")
    for rid in inst.target_ids():
        g = inst.targets[rid]
        lines.append(f"target {rid} {g.x} {g.y}")
    return "\n".join(lines) + "\n"


def load_instance(path: str | Path) -> Instance:
    return parse_instance(Path(path).read_text(encoding="utf-8"))


_ACTION_BY_TEXT = {a.value: a for a in Action}


def serialize_plan(plan: Plan) -> str:
    lines = [f"plan {plan.horizon}"]
    for t in range(plan.horizon):
        for aid, acts in plan.actions.items():
            lines.append(f"t={t} {aid} {acts[t].value}")
    return "\n".join(lines) + "\n"


def parse_plan_actions(text: str) -> tuple[int, dict[str, list[Action]]]:
    """Parse a plan file into ``(horizon, actions-by-agv)``.

    Replaying the actions is left to the caller so that malformed plans can
    still be inspected by the validator.
    """
    horizon = None
    actions: dict[str, dict[int, Action]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split(maxsplit=2)
        if tok[0] == "plan":
            if len(tok) != 2:
                raise ParseError(lineno, "expected 'plan <horizon>'")
            horizon = _int(tok[1], lineno, "horizon")
            continue
        if horizon is None:
            raise ParseError(lineno, "missing 'plan <horizon>' header")
        if not tok[0].startswith("t=") or len(tok) != 3:
            raise ParseError(lineno, "expected 't=<t> <agv-id> <action>'")
        t = _int(tok[0][2:], lineno, "timestep")
        if not 0 <= t < horizon:
            raise ParseError(lineno, f"timestep {t} outside plan horizon {horizon}")
        act = _ACTION_BY_TEXT.get(" ".join(tok[2].split()))
        if act is None:
            raise ParseError(lineno, f"unknown action {tok[2]!r}")
        per = actions.setdefault(tok[1], {})
        if t in per:
            raise ParseError(lineno, f"second action for {tok[1]} at t={t}")
        per[t] = act
    if horizon is None:
        raise ParseError(0, "missing 'plan <horizon>' header")
    out = {}
    for aid, per in actions.items():
        missing = [t for t in range(horizon) if t not in per]
        if missing:
            raise ParseError(0, f"AGV {aid} has no action at t={missing[0]}")
        out[aid] = [per[t] for t in range(horizon)]
    return horizon, out
