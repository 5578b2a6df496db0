"""Command-line front end: analyze, diff, slice, cfg, absint, simulate,
wcet, complexity.

Exit codes: 0 success, 1 input/parse error, 2 analysis refusal (a loop
needs a bound, or the CFG is irreducible), 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import absint
from .cfg import IrreducibleLoop, build_cfg, find_natural_loops, format_dot
from .differ import diff_programs, format_diff
from .isa import AsmError, CycleModel, Program, default_cycle_model, parse_cycle_model, parse_program
from .oracle import (
    SimInput,
    UnboundedLoop,
    enumerate_inputs,
    full_wcet,
    simulate,
    simulate_pair,
)
from .reta import analyze_update_full, compose_wcet
from .slicing import format_slice
from .complexity import update_complexity


def _load_program(path: str) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


def _load_model(path: str | None) -> CycleModel:
    if path is None:
        return default_cycle_model()
    with open(path, encoding="utf-8") as fh:
        return parse_cycle_model(fh.read())


def _parse_assignments(text: str | None) -> dict[int, int]:
    out: dict[int, int] = {}
    if not text:
        return out
    for part in text.split(","):
        reg, _, value = part.partition("=")
        reg = reg.strip().lower()
        if not reg.startswith("r"):
            raise ValueError(f"bad register assignment {part!r}")
        out[int(reg[1:])] = int(value)
    return out


def _parse_io(entries: list[str]) -> dict[str, tuple[int, ...]]:
    out: dict[str, tuple[int, ...]] = {}
    for entry in entries or []:
        name, _, values = entry.partition("=")
        out[name.strip()] = tuple(int(v) for v in values.split(",") if v.strip())
    return out


def _parse_domains(entries: list[str]) -> dict[int, tuple[int, int]]:
    out: dict[int, tuple[int, int]] = {}
    for entry in entries or []:
        reg, _, rng = entry.partition("=")
        lo, _, hi = rng.partition(":")
        out[int(reg.strip().lower()[1:])] = (int(lo), int(hi))
    return out


def _delta_report(art) -> dict:
    delta = art.delta
    return {
        "optimistic": delta.optimistic,
        "pessimistic": delta.pessimistic,
        "contributions": [
            {
                "category": c.category.value,
                "version": c.version,
                "old_index": c.instruction[0],
                "new_index": c.instruction[1],
                "min_delta": c.cycles[0],
                "max_delta": c.cycles[1],
                "explanation": c.explanation,
            }
            for c in delta.contributions
        ],
        "warnings": list(delta.warnings),
    }


def cmd_analyze(args) -> int:
    old = _load_program(args.old)
    new = _load_program(args.new)
    model = _load_model(args.model)
    art = analyze_update_full(old, new, model=model)
    delta = art.delta
    if args.format == "json":
        print(json.dumps(_delta_report(art), indent=2))
    else:
        print(f"optimistic {delta.optimistic}, pessimistic {delta.pessimistic}")
        for c in delta.contributions:
            span = f"old:{c.instruction[0]}/new:{c.instruction[1]}"
            print(
                f"  {c.category.value:7s} {span:16s} "
                f"[{c.cycles[0]:+d},{c.cycles[1]:+d}]  {c.explanation}"
            )
        for w in delta.warnings:
            print(f"warning: {w}")
    if args.budget is not None and delta.pessimistic > args.budget:
        print(
            f"budget exceeded: pessimistic {delta.pessimistic} > {args.budget}",
            file=sys.stderr,
        )
        return 3
    return 0


def cmd_diff(args) -> int:
    old = _load_program(args.old)
    new = _load_program(args.new)
    sys.stdout.write(format_diff(old, new))
    return 0


def cmd_slice(args) -> int:
    old = _load_program(args.old)
    new = _load_program(args.new)
    art = analyze_update_full(old, new, model=_load_model(args.model))
    v = art.old if args.version == "old" else art.new
    sys.stdout.write(format_slice(v.program, v.slice))
    return 0


def cmd_cfg(args) -> int:
    p = _load_program(args.program)
    cfg = build_cfg(p)
    loops = find_natural_loops(cfg)
    if args.dot:
        sys.stdout.write(format_dot(cfg, loops))
        return 0
    for b in cfg.blocks:
        succ = ", ".join(f"{s}({k})" for s, k in b.successors)
        print(f"block {b.id}: instructions {b.start}..{b.end - 1} -> {succ or 'exit'}")
    for lp in loops:
        print(
            f"loop at {lp.header_label(cfg)!r}: header block {lp.header}, "
            f"body {sorted(lp.body)}"
        )
    if cfg.unreachable:
        print(f"unreachable instructions: {sorted(cfg.unreachable)}")
    return 0


def cmd_absint(args) -> int:
    p = _load_program(args.program)
    cfg = build_cfg(p)
    loops = find_natural_loops(cfg)
    result, warnings = absint.analyze_program(p, cfg, loops)
    sys.stdout.write(absint.format_state_table(p, result))
    for lp in loops:
        print(f"loop {lp.header_label(cfg)!r}: bound {lp.bound} ({lp.bound_source})")
    for w in warnings:
        print(f"warning: {w}")
    return 0


def cmd_simulate(args) -> int:
    p = _load_program(args.program)
    model = _load_model(args.model)
    sim_input = SimInput(
        registers=_parse_assignments(args.input),
        io_schedule=_parse_io(args.io),
        cost_policy=args.policy,
    )
    result = simulate(p, sim_input, fuel=args.fuel, model=model, trace=args.trace)
    print(f"total cycles: {result.total_cycles}")
    print("registers:", " ".join(f"r{i}={v}" for i, v in enumerate(result.registers)))
    if args.trace:
        for idx, outcome, cycles in result.trace:
            tag = f" ({outcome})" if outcome else ""
            print(f"  {idx:4d} {p.instructions[idx].text():<24s} {cycles}{tag}")
    if args.counts:
        for i, n in enumerate(result.counts):
            if n:
                print(f"  {i:4d} {p.instructions[i].text():<24s} x{n}")
    return 0


def _measured_max(p: Program, domains, io_samples: int, model, fuel: int) -> int:
    best = 0
    for si in enumerate_inputs(p, domains, io_samples=io_samples):
        run = SimInput(
            registers=si.registers, io_schedule=si.io_schedule, cost_policy="max"
        )
        best = max(best, simulate(p, run, fuel=fuel, model=model).total_cycles)
    return best


def cmd_wcet(args) -> int:
    model = _load_model(args.model)
    if args.new is None:
        p = _load_program(args.old)
        cfg = build_cfg(p)
        loops = find_natural_loops(cfg)
        result, _ = absint.analyze_program(p, cfg, loops)
        wcet = full_wcet(p, loops, model, cfg)
        print(f"wcet: {wcet.wcet_cycles}")
        if wcet.witness_path:
            print("witness blocks:", " -> ".join(str(b) for b in wcet.witness_path))
        return 0
    old = _load_program(args.old)
    new = _load_program(args.new)
    art = analyze_update_full(old, new, model=model)
    domains = _parse_domains(args.domain)
    if args.old_wcet is not None:
        measured = args.old_wcet
    elif args.measure:
        measured = _measured_max(old, domains, args.io_samples, model, args.fuel)
        print(f"measured old wcet: {measured}")
    else:
        print("need --old-wcet N or --measure", file=sys.stderr)
        return 1
    lo, hi = compose_wcet(measured, art.delta)
    print(f"composed new wcet: [{lo}, {hi}] (deployable bound {hi})")
    if args.baseline:
        cfg_new = art.new.cfg
        baseline = full_wcet(new, art.new.loops, model, cfg_new)
        print(f"full-analysis baseline wcet(new): {baseline.wcet_cycles}")
    return 0


def cmd_complexity(args) -> int:
    old = _load_program(args.old)
    new = _load_program(args.new)
    art = analyze_update_full(old, new, model=_load_model(args.model))
    report = update_complexity(art)
    if args.format == "json":
        print(
            json.dumps(
                {
                    "A": report.A,
                    "B": report.B,
                    "D": report.D,
                    "F": report.F,
                    "G": report.G,
                    "X": report.X,
                    "Y": report.Y,
                    "Z": report.Z,
                    "cc_differential": report.cc_differential,
                    "cc_full": report.cc_full,
                },
                indent=2,
            )
        )
    else:
        print(
            f"differential: 4*(A={report.A}+B={report.B}) + 3*D={report.D} "
            f"+ 3*F={report.F} + 5*G={report.G} = {report.cc_differential}"
        )
        print(
            f"full:         4*X={report.X} + 3*Y={report.Y} + 5*Z={report.Z} "
            f"= {report.cc_full}"
        )
        if report.cc_full:
            ratio = report.cc_differential / report.cc_full
            print(f"ratio: {ratio:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retadiff",
        description="Differential timing analysis for the mini assembly language",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="execution-time difference of an update")
    pa.add_argument("old")
    pa.add_argument("new")
    pa.add_argument("--model")
    pa.add_argument("--format", choices=("text", "json"), default="text")
    pa.add_argument("--budget", type=int, default=None)
    pa.set_defaults(func=cmd_analyze)

    pd = sub.add_parser("diff", help="line diff with =/-/+ tags")
    pd.add_argument("old")
    pd.add_argument("new")
    pd.set_defaults(func=cmd_diff)

    ps = sub.add_parser("slice", help="print a version with non-slice lines commented")
    ps.add_argument("old")
    ps.add_argument("new")
    ps.add_argument("--version", choices=("old", "new"), default="new")
    ps.add_argument("--model")
    ps.set_defaults(func=cmd_slice)

    pc = sub.add_parser("cfg", help="basic blocks, edges, and loops")
    pc.add_argument("program")
    pc.add_argument("--dot", action="store_true")
    pc.set_defaults(func=cmd_cfg)

    pi = sub.add_parser("absint", help="per-point interval table")
    pi.add_argument("program")
    pi.set_defaults(func=cmd_absint)

    pm = sub.add_parser("simulate", help="cycle-counting execution")
    pm.add_argument("program")
    pm.add_argument("--input", help="r0=5,r1=-3")
    pm.add_argument("--io", action="append", help="channel=1,2,3 (repeatable)")
    pm.add_argument("--policy", default="min", help="min | max | seed:N")
    pm.add_argument("--fuel", type=int, default=1_000_000)
    pm.add_argument("--trace", action="store_true")
    pm.add_argument("--counts", action="store_true")
    pm.add_argument("--model")
    pm.set_defaults(func=cmd_simulate)

    pw = sub.add_parser(
        "wcet", help="full-program bound, or composed bound after an update"
    )
    pw.add_argument("old")
    pw.add_argument("new", nargs="?", default=None)
    pw.add_argument("--model")
    pw.add_argument("--old-wcet", type=int, default=None)
    pw.add_argument("--measure", action="store_true")
    pw.add_argument("--baseline", action="store_true")
    pw.add_argument("--domain", action="append", help="r0=0:15 (repeatable)")
    pw.add_argument("--io-samples", type=int, default=3)
    pw.add_argument("--fuel", type=int, default=1_000_000)
    pw.set_defaults(func=cmd_wcet)

    px = sub.add_parser("complexity", help="differential vs full analysis cost")
    px.add_argument("old")
    px.add_argument("new")
    px.add_argument("--model")
    px.add_argument("--format", choices=("text", "json"), default="text")
    px.set_defaults(func=cmd_complexity)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AsmError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (UnboundedLoop, IrreducibleLoop) as exc:
        print(f"analysis refused: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
