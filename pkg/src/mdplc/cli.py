"""Command-line front end.

Subcommands: check, compile, solve, simulate, domains.  All generated
files (model text, property lists, policy tables, JSON reports) are
byte-deterministic: wall-clock timings and backend info only ever go
to stdout, never into files.

Exit codes: 0 success, 1 semantic failure (parse/model/solve errors,
stale policy), 2 usage errors (bad flags, missing inputs).
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import domains as bundled
from . import kernels, prism, solver
from .errors import MdplcError, ParseError
from .grounder import build_graph
from .parser import check_domain, parse_domain
from .refine import check_normalization, refine
from .rewards import annotate
from .simulate import (
    EXACT,
    Executor,
    export_table,
    load_table,
    resolve_table,
    simulate as run_simulation,
)


def _load_source(name: str) -> str:
    """Read a domain from a file path or from the bundled set."""
    try:
        with open(name, "r") as fh:
            return fh.read()
    except (FileNotFoundError, IsADirectoryError):
        pass
    base = name[:-5] if name.endswith(".mdpl") else name
    if base in bundled.names():
        return bundled.load(base)
    raise FileNotFoundError(name)


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True))
        fh.write("\n")


def _finite_or_str(v: float):
    if v == float("inf"):
        return "inf"
    if v == float("-inf"):
        return "-inf"
    return v


class _Clock:
    """Accumulates per-stage wall times for the stdout timing line."""

    def __init__(self):
        self.t0 = time.perf_counter()
        self.stages: list[tuple[str, float]] = []

    def lap(self, name: str) -> None:
        t = time.perf_counter()
        self.stages.append((name, (t - self.t0) * 1000.0))
        self.t0 = t

    def line(self) -> str:
        return "timing_ms " + " ".join(f"{n}={ms:.2f}" for n, ms in self.stages)


def _pipeline(text: str, clock: _Clock, max_states: int):
    d = parse_domain(text)
    clock.lap("parse")
    for diag in check_domain(d):
        if diag.severity == "warning":
            print(f"warning: {diag.message}", file=sys.stderr)
    g = build_graph(d, cap=max_states)
    clock.lap("ground")
    g = refine(g)
    check_normalization(g)
    clock.lap("refine")
    return d, g


def cmd_check(args) -> int:
    try:
        text = _load_source(args.domain)
    except FileNotFoundError as e:
        print(f"error: no such domain: {e}", file=sys.stderr)
        return 2
    try:
        d = parse_domain(text)
    except ParseError as e:
        for diag in e.diagnostics:
            print(str(diag), file=sys.stderr)
        return 1
    bad = False
    for diag in check_domain(d):
        print(str(diag))
        bad = bad or diag.severity == "error"
    if not bad:
        print(f"ok: {len(d.schemas)} action schemas, {len(d.rewards)} reward rules")
    return 1 if bad else 0


def cmd_compile(args) -> int:
    try:
        text = _load_source(args.domain)
    except FileNotFoundError as e:
        print(f"error: no such domain: {e}", file=sys.stderr)
        return 2
    clock = _Clock()
    d, g = _pipeline(text, clock, args.max_states)
    g = annotate(g, d, sign=1)
    clock.lap("annotate")
    model_text = prism.emit(g, d, mode=args.mode)
    clock.lap("emit")
    with open(args.output, "w") as fh:
        fh.write(model_text)
    if args.props:
        with open(args.props, "w") as fh:
            fh.write(prism.emit_props(d))
    clock.lap("write")
    st = g.stats()
    print(
        f"states={st['states']} edges={st['edges']} "
        f"grounded_actions={st['grounded_actions']} "
        f"action_schemas_used={st['action_schemas_used']}"
    )
    print(clock.line())
    return 0


def cmd_solve(args) -> int:
    try:
        text = _load_source(args.domain)
    except FileNotFoundError as e:
        print(f"error: no such domain: {e}", file=sys.stderr)
        return 2
    clock = _Clock()
    d, g = _pipeline(text, clock, args.max_states)
    if args.objective != "pmax":
        g = annotate(g, d, sign=1 if args.objective == "rmin" else -1)
        clock.lap("annotate")
    try:
        goal = solver.label_states(g, d, args.goal)
    except KeyError:
        print(f"error: unknown label {args.goal!r}", file=sys.stderr)
        return 1
    if args.objective == "pmax":
        res = solver.pmax(g, goal)
    else:
        res = solver.expected_reward(g, goal, direction=args.objective[1:])
    clock.lap("solve")
    pol = solver.extract_policy(g, res, goal)
    if args.policy:
        export_table(g, pol, args.policy)
    if args.report:
        _write_json(args.report, {
            "objective": args.objective,
            "goal": args.goal,
            "states": len(g.states),
            "edges": len(g.edges),
            "policy_states": len(pol.choice),
            "value_at_init": _finite_or_str(res.value_at(0)),
            "iterations": res.iterations,
            "residual": res.residual,
            "converged": res.converged,
        })
    clock.lap("write")
    v = res.value_at(0)
    print(f"{args.objective}({args.goal}) at init = {v:.12g}")
    print(f"iterations={res.iterations} residual={res.residual:.3e} "
          f"backend={kernels.backend_name()}")
    print(clock.line())
    return 0


def cmd_simulate(args, parser: argparse.ArgumentParser) -> int:
    if args.trials <= 0:
        parser.error("--trials must be a positive integer")
    if args.fault is not None and not (0.0 <= args.fault <= 1.0):
        parser.error("--fault must lie in [0, 1]")
    if args.epsilon is not None and not (0.0 <= args.epsilon <= 1.0):
        parser.error("--epsilon must lie in [0, 1]")
    try:
        text = _load_source(args.domain)
    except FileNotFoundError as e:
        print(f"error: no such domain: {e}", file=sys.stderr)
        return 2
    clock = _Clock()
    d, g = _pipeline(text, clock, args.max_states)
    try:
        goal = solver.label_states(g, d, args.goal)
    except KeyError:
        print(f"error: unknown label {args.goal!r}", file=sys.stderr)
        return 1
    objective, mapping = load_table(args.policy)
    pol = resolve_table(g, objective, mapping)
    if args.fault is not None:
        ex = Executor("faulty", args.fault)
    elif args.epsilon is not None:
        ex = Executor("epsilon", args.epsilon)
    else:
        ex = EXACT
    rep = run_simulation(
        g, d, pol, goal, trials=args.trials, seed=args.seed,
        executor=ex, max_steps=args.max_steps,
    )
    clock.lap("simulate")
    if args.report:
        _write_json(args.report, rep.to_json_dict())
    clock.lap("write")
    print(f"executor={rep.executor} trials={rep.trials} successes={rep.successes}")
    print(f"success_ratio={float(rep.success_ratio):.6f} "
          f"({rep.success_ratio.numerator}/{rep.success_ratio.denominator})")
    if rep.mean_actions is not None:
        print(f"mean_actions_per_success={rep.mean_actions:.4f}")
    print(f"backend={kernels.backend_name()}")
    print(clock.line())
    return 0


def cmd_domains(_args) -> int:
    for n in bundled.names():
        print(n)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdplc", description="MDPL compiler toolkit")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("domain", help="domain file path or bundled domain name")
        sp.add_argument("--max-states", type=int, default=1_000_000,
                        help="reachable-state cap (default 1000000)")

    sp = sub.add_parser("check", help="parse a domain and print diagnostics")
    sp.add_argument("domain")
    sp.set_defaults(fn=lambda a: cmd_check(a))

    sp = sub.add_parser("compile", help="ground a domain and emit model text")
    common(sp)
    sp.add_argument("-o", "--output", required=True, help="output model file")
    sp.add_argument("--mode", choices=("indexed", "factored"), default="indexed")
    sp.add_argument("--props", help="also write a property list to this path")
    sp.set_defaults(fn=lambda a: cmd_compile(a))

    sp = sub.add_parser("solve", help="value-iterate an objective")
    common(sp)
    sp.add_argument("--objective", choices=("pmax", "rmin", "rmax"), required=True)
    sp.add_argument("--goal", required=True, help="label naming the goal set")
    sp.add_argument("--policy", help="write the greedy policy as CSV")
    sp.add_argument("--report", help="write a JSON solve report")
    sp.set_defaults(fn=lambda a: cmd_solve(a))

    sp = sub.add_parser("simulate", help="Monte Carlo rollouts of a policy")
    common(sp)
    sp.add_argument("--policy", required=True, help="policy CSV from solve")
    sp.add_argument("--goal", required=True, help="label naming the goal set")
    sp.add_argument("--trials", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-steps", type=int, default=None)
    grp = sp.add_mutually_exclusive_group()
    grp.add_argument("--fault", type=float, default=None,
                     help="faulty executor: deviation probability")
    grp.add_argument("--epsilon", type=float, default=None,
                     help="epsilon-greedy executor: exploration probability")
    sp.add_argument("--report", help="write a JSON simulation report")
    sp.set_defaults(fn=lambda a, _p=sp: cmd_simulate(a, _p))

    sp = sub.add_parser("domains", help="list bundled example domains")
    sp.set_defaults(fn=lambda a: cmd_domains(a))

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as e:
        for diag in e.diagnostics:
            print(str(diag), file=sys.stderr)
        return 1
    except MdplcError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
