"""Command-line entry point: ``marpf {solve,validate,gen,render,bench}``.

Exit codes: 0 success, 1 solve or validation failure, 2 usage error,
3 invalid instance.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backends import BACKENDS, DEFAULT_BACKEND, get_backend
from .bench import (
    BenchConfig,
    CapacityExceeded,
    RenderOnInvalidPlan,
    exp2_instance,
    generate_instance,
    render_plan,
    rows_to_csv,
    run_exp1,
    run_exp2,
    summarize,
)
from .castar import NoPath, plan_baseline
from .domain import GridMap, MarpfError, ParseError
from .formats import load_instance, parse_plan_actions, serialize_instance, serialize_plan
from .hybrid import HybridConfig, HybridError, solve_hybrid
from .ilp_core import NoSolutionWithinHorizon, TimeBudgetExceeded, solve_min_horizon
from .validator import replay_lenient, validate

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BAD_INSTANCE = 0, 1, 2, 3


class BadInstance(Exception):
    pass


def _load(path: str):
    try:
        return load_instance(path)
    except (ParseError, ValueError) as exc:
        raise BadInstance(f"{path}: {exc}") from exc
    except OSError as exc:
        raise BadInstance(str(exc)) from exc


def _backend(args):
    backend = get_backend(args.backend)
    if hasattr(backend, "seed"):
        backend.seed = args.seed
    return backend


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    backend = _backend(args)
    try:
        if args.mode == "ilp":
            rep = solve_min_horizon(inst, backend, args.time_limit, args.horizon_max)
            plan, makespan = rep.plan, rep.makespan
        elif args.mode == "castar":
            rep = plan_baseline(inst, args.time_limit)
            if not rep.success:
                print("error: baseline timed out", file=sys.stderr)
                return EXIT_FAIL
            plan, makespan = rep.plan, rep.makespan
        else:
            cfg = HybridConfig(tau=args.tau, kappa=args.kappa, local_time_limit=args.time_limit)
            rep = solve_hybrid(inst, cfg, backend)
            plan, makespan = rep.plan, rep.makespan
            for line in rep.trace:
                print(line, file=sys.stderr)
    except (NoPath, NoSolutionWithinHorizon, TimeBudgetExceeded, HybridError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    text = serialize_plan(plan)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"makespan {makespan}")
    return EXIT_OK


def _read_plan(inst, path: str):
    try:
        _, actions = parse_plan_actions(Path(path).read_text(encoding="utf-8"))
    except ParseError as exc:
        raise BadPlan(f"{path}: {exc}") from exc
    return replay_lenient(inst, actions)


class BadPlan(Exception):
    pass


def cmd_validate(args) -> int:
    inst = _load(args.instance)
    try:
        plan = _read_plan(inst, args.plan)
    except BadPlan as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    rep = validate(inst, plan)
    sys.stdout.write(rep.to_text())
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_gen(args) -> int:
    try:
        if args.preset == "exp2":
            inst = exp2_instance(args.seed, args.racks, args.agvs)
        else:
            sx, sy = (int(s) for s in args.grid.lower().split("x"))
            inst = generate_instance(GridMap(sx, sy), args.agvs, args.racks, args.targets, args.seed)
    except CapacityExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INSTANCE
    _emit(serialize_instance(inst), args.out)
    return EXIT_OK


def cmd_render(args) -> int:
    inst = _load(args.instance)
    try:
        plan = _read_plan(inst, args.plan)
        text = render_plan(inst, plan, args.format)
    except (BadPlan, RenderOnInvalidPlan) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(text, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    modes = tuple(args.modes.split(",")) if args.modes else ()
    cfg = BenchConfig(
        experiment=args.experiment,
        trials=args.trials,
        seed=args.seed,
        modes=modes,
        taus=tuple(int(t) for t in args.taus.split(",")),
        kappa=args.kappa,
        time_limit_s=args.time_limit,
        local_time_limit_s=args.local_time_limit,
        max_added=args.max_added,
        racks=args.racks,
        agvs=args.agvs,
    )
    backend = _backend(args)
    rows = run_exp1(cfg, backend) if cfg.experiment == "exp1" else run_exp2(cfg, backend)
    _emit(rows_to_csv(rows), args.out)
    for mode, tau, racks, rate, mean in summarize(rows):
        tau_s = "-" if tau is None else str(tau)
        mean_s = "-" if mean is None else f"{mean:.2f}"
        print(f"{mode:7s} tau={tau_s:2s} racks={racks:2d} success={rate:.2f} makespan={mean_s}",
              file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="marpf", description="Multi-agent multi-rack path finding")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--backend", choices=sorted(BACKENDS), default=DEFAULT_BACKEND)
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("solve", help="solve an instance and print the plan")
    common(s)
    s.add_argument("--instance", required=True)
    s.add_argument("--mode", choices=("ilp", "castar", "hybrid"), default="ilp")
    s.add_argument("--tau", type=int, default=4)
    s.add_argument("--kappa", type=float, default=3.0)
    s.add_argument("--time-limit", type=float, default=120.0)
    s.add_argument("--horizon-max", type=int, default=None)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", help="check a plan file against an instance")
    v.add_argument("--instance", required=True)
    v.add_argument("--plan", required=True)
    v.set_defaults(func=cmd_validate)

    g = sub.add_parser("gen", help="generate a random instance")
    common(g)
    g.add_argument("--preset", choices=("random", "exp2"), default="random")
    g.add_argument("--grid", default="6x4")
    g.add_argument("--agvs", type=int, default=8)
    g.add_argument("--racks", type=int, default=12)
    g.add_argument("--targets", type=int, default=2)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("render", help="draw a plan as ascii frames or animated svg")
    r.add_argument("--instance", required=True)
    r.add_argument("--plan", required=True)
    r.add_argument("--format", choices=("ascii", "svg"), default="ascii")
    r.add_argument("--out")
    r.set_defaults(func=cmd_render)

    b = sub.add_parser("bench", help="run an experiment protocol and write CSV metrics")
    common(b)
    b.add_argument("--experiment", choices=("exp1", "exp2"), required=True)
    b.add_argument("--trials", type=int, default=30)
    b.add_argument("--modes", default="", help="comma list, e.g. castar,ilp or hybrid,ilp")
    b.add_argument("--taus", default="1,2,4")
    b.add_argument("--tau", type=int, default=None, help="shorthand for a single --taus value")
    b.add_argument("--kappa", type=float, default=3.0)
    b.add_argument("--time-limit", type=float, default=120.0)
    b.add_argument("--local-time-limit", type=float, default=120.0)
    b.add_argument("--max-added", type=int, default=6)
    b.add_argument("--racks", type=int, default=12)
    b.add_argument("--agvs", type=int, default=8)
    b.add_argument("--format", choices=("csv",), default="csv")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "tau", None) is not None and args.command == "bench":
        args.taus = str(args.tau)
    if getattr(args, "trials", 1) < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except BadInstance as exc:
        print(f"error: invalid instance: {exc}", file=sys.stderr)
        return EXIT_BAD_INSTANCE
    except MarpfError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
