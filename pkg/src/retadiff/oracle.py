"""Ground truth and baselines.

A cycle-counting interpreter stands in for measurement hardware, a
loop-collapsing longest-path analyzer stands in for a full-program WCET
tool, and the complexity report compares the cost of differential analysis
against analyzing the whole program.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .cfg import Cfg, LoopInfo, build_cfg, find_natural_loops
from .isa import (
    MEMORY_CELLS,
    NUM_REGISTERS,
    ChannelRef,
    CostInterval,
    CycleModel,
    Imm,
    Instruction,
    MemRef,
    Opcode,
    Program,
    Reg,
    RegList,
    cost_of,
    default_cycle_model,
)


class SimulationError(Exception):
    pass


class FuelExhausted(SimulationError):
    pass


class DivisionByZero(SimulationError):
    pass


class IoScheduleInvalid(SimulationError):
    pass


class UnboundedLoop(Exception):
    """A loop needs an iteration bound (annotation or inference) to proceed."""

    def __init__(self, header_label: str):
        super().__init__(
            f"loop at {header_label!r} has no iteration bound; "
            f"add a `.bound {header_label} <min> <max>` directive"
        )
        self.header_label = header_label


@dataclass(frozen=True)
class SimInput:
    registers: dict[int, int] = field(default_factory=dict)
    io_schedule: dict[str, tuple[int, ...]] = field(default_factory=dict)
    cost_policy: str = "min"  # "min" | "max" | "seed:<n>"


@dataclass(frozen=True)
class SimResult:
    total_cycles: int
    counts: tuple[int, ...]
    registers: tuple[int, ...]
    trace: tuple[tuple[int, str, int], ...] | None = None


@dataclass(frozen=True)
class WcetResult:
    wcet_cycles: int
    witness_path: tuple[int, ...] | None = None


@dataclass(frozen=True)
class ComplexityReport:
    A: int  # instructions inside loops whose bounds changed
    B: int  # delta instructions inside loops with unchanged bounds
    D: int  # delta instructions outside loops
    F: int  # lines in the forward slices
    G: int  # lines in the backward slices
    X: int  # instructions inside loops (full analysis)
    Y: int  # instructions outside loops (full analysis)
    Z: int  # backward slice of all conditionals (full analysis)

    @property
    def cc_differential(self) -> int:
        return 4 * (self.A + self.B) + 3 * self.D + 3 * self.F + 5 * self.G

    @property
    def cc_full(self) -> int:
        return 4 * self.X + 3 * self.Y + 5 * self.Z


def _seeded_value(interval: CostInterval, seed: int, key: str) -> int:
    if interval.is_point:
        return interval.min_cycles
    rng = random.Random(f"{seed}|{key}")
    return rng.randint(interval.min_cycles, interval.max_cycles)


def _draw(interval: CostInterval, policy: str, key: str) -> int:
    if policy == "min":
        return interval.min_cycles
    if policy == "max":
        return interval.max_cycles
    if policy.startswith("seed:"):
        return _seeded_value(interval, int(policy[5:]), key)
    raise ValueError(f"unknown cost policy {policy!r}")


def _cost_tables(
    p: Program, model: CycleModel, policy: str, pair_keys: dict[int, str] | None
) -> tuple[list[int], list[int], list[int]]:
    """Per-instruction cycle charges: (plain, taken, not_taken).

    The seeded policy fixes one draw per static instruction and outcome; when
    `pair_keys` maps instructions to shared keys, equivalent instructions in
    two versions receive identical draws.
    """
    plain, taken, not_taken = [], [], []
    for instr in p.instructions:
        key = pair_keys[instr.index] if pair_keys else str(instr.index)
        if instr.is_branch:
            t = cost_of(instr, model, outcome="taken")
            n = cost_of(instr, model, outcome="not_taken")
            plain.append(0)
            taken.append(_draw(t, policy, key + "|T"))
            not_taken.append(_draw(n, policy, key + "|N"))
        else:
            c = cost_of(instr, model, io_channels=p.io_channels)
            plain.append(_draw(c, policy, key))
            taken.append(0)
            not_taken.append(0)
    return plain, taken, not_taken


_RELATIONS = {
    Opcode.BEQ: lambda l, r: l == r,
    Opcode.BNE: lambda l, r: l != r,
    Opcode.BLT: lambda l, r: l < r,
    Opcode.BGE: lambda l, r: l >= r,
    Opcode.BGT: lambda l, r: l > r,
    Opcode.BLE: lambda l, r: l <= r,
}


def trunc_div(a: int, b: int) -> int:
    """Signed division truncating toward zero."""
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def simulate(
    p: Program,
    sim_input: SimInput | None = None,
    fuel: int = 1_000_000,
    model: CycleModel | None = None,
    trace: bool = False,
    pair_keys: dict[int, str] | None = None,
) -> SimResult:
    """Concrete big-step execution with per-instruction cycle charges.

    Registers default to 0, memory cells start at 0, addresses wrap modulo
    the memory size, and POP on an empty stack loads zeros.
    """
    sim_input = sim_input or SimInput()
    model = model or default_cycle_model()
    plain, taken_cost, nt_cost = _cost_tables(p, model, sim_input.cost_policy, pair_keys)

    for name, values in sim_input.io_schedule.items():
        if name not in p.io_channels:
            raise IoScheduleInvalid(f"unknown io channel {name!r}")
        ch = p.io_channels[name]
        for v in values:
            if not ch.lo <= v <= ch.hi:
                raise IoScheduleInvalid(
                    f"value {v} outside [{ch.lo},{ch.hi}] for channel {name!r}"
                )

    regs = [0] * NUM_REGISTERS
    for r, v in sim_input.registers.items():
        regs[r] = v
    mem = [0] * MEMORY_CELLS
    stack: list[int] = []
    io_pos = {name: 0 for name in p.io_channels}
    flags: tuple[int, int] | None = None
    counts = [0] * len(p)
    total = 0
    log: list[tuple[int, str, int]] = []
    pc = 0
    steps = 0

    while True:
        if steps >= fuel:
            raise FuelExhausted(f"no HALT within {fuel} steps")
        steps += 1
        instr = p.instructions[pc]
        counts[pc] += 1
        op = instr.opcode
        ops = instr.operands
        outcome = ""
        cycles = plain[pc]
        next_pc = pc + 1

        if op is Opcode.MOVI:
            regs[ops[0].index] = ops[1].value
        elif op is Opcode.MOV:
            regs[ops[0].index] = regs[ops[1].index]
        elif op in (Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.SDIV):
            a = regs[ops[1].index]
            b = ops[2].value if isinstance(ops[2], Imm) else regs[ops[2].index]
            if op is Opcode.ADD:
                regs[ops[0].index] = a + b
            elif op is Opcode.SUB:
                regs[ops[0].index] = a - b
            elif op is Opcode.MUL:
                regs[ops[0].index] = a * b
            else:
                if b == 0:
                    raise DivisionByZero(
                        f"sdiv by zero at instruction {pc} (line {instr.source_line})"
                    )
                regs[ops[0].index] = trunc_div(a, b)
        elif op is Opcode.CMP:
            a = regs[ops[0].index]
            b = ops[1].value if isinstance(ops[1], Imm) else regs[ops[1].index]
            flags = (a, b)
        elif op is Opcode.B:
            outcome = "taken"
            cycles = taken_cost[pc]
            next_pc = p.target_index(instr)
        elif instr.is_cond_branch:
            assert flags is not None, "conditional branch before any cmp"
            if _RELATIONS[op](*flags):
                outcome = "taken"
                cycles = taken_cost[pc]
                next_pc = p.target_index(instr)
            else:
                outcome = "not_taken"
                cycles = nt_cost[pc]
        elif op is Opcode.LDR:
            mref = ops[1]
            regs[ops[0].index] = mem[(regs[mref.base.index] + mref.offset) % MEMORY_CELLS]
        elif op is Opcode.STR:
            mref = ops[1]
            mem[(regs[mref.base.index] + mref.offset) % MEMORY_CELLS] = regs[ops[0].index]
        elif op is Opcode.PUSH:
            for r in ops[0].regs:
                stack.append(regs[r.index])
        elif op is Opcode.POP:
            for r in reversed(ops[0].regs):
                regs[r.index] = stack.pop() if stack else 0
        elif op is Opcode.IO:
            ch = p.io_channels[ops[0].name]
            schedule = sim_input.io_schedule.get(ch.name, ())
            pos = io_pos[ch.name]
            if schedule:
                value = schedule[min(pos, len(schedule) - 1)]
            else:
                value = ch.lo
            io_pos[ch.name] = pos + 1
            regs[ch.dst.index] = value
        elif op is Opcode.HALT:
            total += cycles
            if trace:
                log.append((pc, outcome, cycles))
            break
        # NOP: nothing

        total += cycles
        if trace:
            log.append((pc, outcome, cycles))
        pc = next_pc

    return SimResult(
        total_cycles=total,
        counts=tuple(counts),
        registers=tuple(regs),
        trace=tuple(log) if trace else None,
    )


def pair_keys_for(diff_equivalence: dict[int, int], old_len: int, new_len: int):
    """Shared draw keys so paired instructions cost the same in both runs."""
    old_keys = {i: (f"p{i}" if i in diff_equivalence else f"o{i}") for i in range(old_len)}
    inverse = {j: i for i, j in diff_equivalence.items()}
    new_keys = {j: (f"p{inverse[j]}" if j in inverse else f"n{j}") for j in range(new_len)}
    return old_keys, new_keys


def simulate_pair(
    old: Program,
    new: Program,
    equivalence: dict[int, int],
    sim_input: SimInput,
    fuel: int = 1_000_000,
    model: CycleModel | None = None,
) -> tuple[SimResult, SimResult]:
    """Simulate both versions under one input with paired cost draws.

    Schedule entries for channels a version does not declare are dropped, so
    one input drives both versions even when the update adds a channel.
    """
    old_keys, new_keys = pair_keys_for(equivalence, len(old), len(new))

    def restrict(p: Program) -> SimInput:
        return SimInput(
            registers=sim_input.registers,
            io_schedule={
                k: v for k, v in sim_input.io_schedule.items() if k in p.io_channels
            },
            cost_policy=sim_input.cost_policy,
        )

    r_old = simulate(old, restrict(old), fuel=fuel, model=model, pair_keys=old_keys)
    r_new = simulate(new, restrict(new), fuel=fuel, model=model, pair_keys=new_keys)
    return r_old, r_new


def enumerate_inputs(
    p: Program,
    domains: dict[int, tuple[int, int]],
    io_samples: int = 3,
    max_exhaustive: int = 4096,
    seed: int = 0,
    schedule_len: int = 8,
) -> list[SimInput]:
    """Deterministic inputs: exhaustive register domains when small enough,
    otherwise stratified sampling; io schedules sampled with a fixed seed."""
    rng = random.Random(seed)
    axes = sorted(domains.items())
    sizes = [hi - lo + 1 for _, (lo, hi) in axes]
    total = 1
    for s in sizes:
        total *= s

    reg_choices: list[dict[int, int]]
    if total <= max_exhaustive:
        reg_choices = [
            {r: v for (r, _), v in zip(axes, combo)}
            for combo in itertools.product(*[range(lo, hi + 1) for _, (lo, hi) in axes])
        ]
    else:
        reg_choices = []
        corners = itertools.product(*[(lo, hi) for _, (lo, hi) in axes])
        for combo in corners:
            reg_choices.append({r: v for (r, _), v in zip(axes, combo)})
        while len(reg_choices) < max_exhaustive:
            reg_choices.append(
                {r: rng.randint(lo, hi) for r, (lo, hi) in axes}
            )

    schedules: list[dict[str, tuple[int, ...]]] = [{}]
    if p.io_channels:
        schedules = []
        for k in range(max(1, io_samples)):
            sched = {}
            for name, ch in sorted(p.io_channels.items()):
                if k == 0:
                    sched[name] = tuple([ch.lo] * schedule_len)
                elif k == 1:
                    sched[name] = tuple([ch.hi] * schedule_len)
                else:
                    sched[name] = tuple(
                        rng.randint(ch.lo, ch.hi) for _ in range(schedule_len)
                    )
            schedules.append(sched)

    return [
        SimInput(registers=regs, io_schedule=sched)
        for regs in reg_choices
        for sched in schedules
    ]


# --- full-program WCET -----------------------------------------------------


def _block_worst_cost(cfg: Cfg, model: CycleModel, bid: int) -> int:
    total = 0
    block = cfg.blocks[bid]
    for i in block.instructions:
        instr = cfg.program.instructions[i]
        total += cost_of(instr, model, io_channels=cfg.program.io_channels).max_cycles
    return total


def _longest_path(
    nodes: set[int],
    succs: dict[int, list[int]],
    cost: dict[int, int],
    start: int,
    ends: set[int],
) -> tuple[int, list[int]]:
    """Longest start->end path on an acyclic subgraph, inclusive of both ends."""
    order: list[int] = []
    seen: set[int] = set()

    def topo(b: int):
        stack = [(b, iter(succs.get(b, [])))]
        seen.add(b)
        while stack:
            node, it = stack[-1]
            advanced = False
            for s in it:
                if s in nodes and s not in seen:
                    seen.add(s)
                    stack.append((s, iter(succs.get(s, []))))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()

    topo(start)
    best: dict[int, int] = {}
    best_succ: dict[int, int | None] = {}
    for b in order:  # postorder: successors first
        tails = [s for s in succs.get(b, []) if s in nodes and s in best]
        if b in ends:
            base, choice = 0, None
            for s in tails:
                if best[s] > base:
                    base, choice = best[s], s
        else:
            if not tails:
                continue  # dead end that is not a valid endpoint
            base = max(best[s] for s in tails)
            choice = max(tails, key=lambda s: best[s])
        best[b] = cost[b] + base
        best_succ[b] = choice
    if start not in best:
        raise ValueError("no path from start to an endpoint")
    path = [start]
    while best_succ.get(path[-1]) is not None:
        path.append(best_succ[path[-1]])
    return best[start], path


def full_wcet(
    p: Program,
    loops: list[LoopInfo],
    model: CycleModel | None = None,
    cfg: Cfg | None = None,
) -> WcetResult:
    """Longest-path WCET with every loop charged its worst bound and path.

    Loops are collapsed innermost-first into supernodes costing
    `max_bound * worst-iteration-path + worst-exit-prefix`, then the longest
    entry-to-halt path is taken over the resulting DAG.  Always an
    over-approximation of any simulated run.
    """
    model = model or default_cycle_model()
    cfg = cfg or build_cfg(p)
    base_cost = {b.id: _block_worst_cost(cfg, model, b.id) for b in cfg.blocks}
    succs = {b.id: [s for s, _ in b.successors] for b in cfg.blocks}

    # Effective view after collapsing: a collapsed loop is represented by its
    # header; edges into the body are redirected to the header, edges out of
    # the body re-emerge from the header.
    eff_cost = dict(base_cost)
    eff_succs = {b: list(dict.fromkeys(ss)) for b, ss in succs.items()}
    owner: dict[int, int] = {}  # body block -> collapsed loop header

    def resolve(b: int) -> int:
        while b in owner:
            b = owner[b]
        return b

    for loop in sorted(loops, key=lambda lp: len(lp.body)):
        if loop.bound is None:
            raise UnboundedLoop(loop.header_label(cfg))
        header = resolve(loop.header)
        members = {resolve(b) for b in loop.body}
        inner_nodes = members
        inner_succs = {
            b: [resolve(s) for s in eff_succs[b] if resolve(s) in inner_nodes]
            for b in inner_nodes
        }
        # One iteration: header to any back-edge source, back edges removed.
        no_back = {
            b: [s for s in inner_succs[b] if s != header] for b in inner_nodes
        }
        tails = {resolve(t) for t in loop.back_edges}
        circuit, _ = _longest_path(inner_nodes, no_back, eff_cost, header, tails)
        exits = {
            b
            for b in inner_nodes
            if any(resolve(s) not in inner_nodes for s in eff_succs[b])
        }
        if exits:
            exit_prefix, _ = _longest_path(inner_nodes, no_back, eff_cost, header, exits)
        else:
            exit_prefix = 0
        out_edges = []
        for b in inner_nodes:
            for s in eff_succs[b]:
                if resolve(s) not in inner_nodes:
                    out_edges.append(resolve(s))
        eff_cost[header] = loop.bound[1] * circuit + exit_prefix
        eff_succs[header] = list(dict.fromkeys(out_edges))
        for b in inner_nodes - {header}:
            owner[b] = header

    top_nodes = {b.id for b in cfg.blocks if resolve(b.id) == b.id}
    top_succs = {
        b: list(dict.fromkeys(resolve(s) for s in eff_succs[b])) for b in top_nodes
    }
    halts = {
        b
        for b in top_nodes
        if not top_succs[b]
        or cfg.program.instructions[cfg.blocks[b].last].opcode is Opcode.HALT
    }
    entry = resolve(cfg.entry)
    wcet, path = _longest_path(top_nodes, top_succs, eff_cost, entry, halts)
    return WcetResult(wcet_cycles=wcet, witness_path=tuple(path))


# --- complexity accounting ---------------------------------------------------


@dataclass(frozen=True)
class SliceBundle:
    forward_old: frozenset[int]
    forward_new: frozenset[int]
    backward_old: frozenset[int]
    backward_new: frozenset[int]


def _inside_loops(p: Program, cfg: Cfg, loops: list[LoopInfo]) -> set[int]:
    body_blocks = set()
    for lp in loops:
        body_blocks |= lp.body
    return {i for i in range(len(p)) if cfg.block_of.get(i) in body_blocks}


def complexity_report(
    old: Program,
    new: Program,
    deltas_old: frozenset[int],
    deltas_new: frozenset[int],
    slices: SliceBundle,
    loop_pairs: list[tuple[LoopInfo | None, LoopInfo | None]],
    cfg_old: Cfg,
    cfg_new: Cfg,
    loops_old: list[LoopInfo],
    loops_new: list[LoopInfo],
    backward_all_conditionals_new: frozenset[int],
) -> ComplexityReport:
    """Instruction counters for the differential and full analysis cost models.

    Lines paired across versions are counted once (through the updated
    program); removed lines only exist in the old version and are added on
    top.  The full-analysis counters describe the updated program alone.
    """
    changed_old_blocks: set[int] = set()
    changed_new_blocks: set[int] = set()
    for lp_old, lp_new in loop_pairs:
        bound_old = lp_old.bound if lp_old else (0, 0)
        bound_new = lp_new.bound if lp_new else (0, 0)
        if bound_old != bound_new:
            if lp_new:
                changed_new_blocks |= lp_new.body
            elif lp_old:
                changed_old_blocks |= lp_old.body

    def block_instrs(cfg: Cfg, blocks: set[int]) -> set[int]:
        return {i for i in cfg.block_of if cfg.block_of[i] in blocks}

    changed_old = block_instrs(cfg_old, changed_old_blocks)  # removed loops
    changed_new = block_instrs(cfg_new, changed_new_blocks)
    in_loops_old = _inside_loops(old, cfg_old, loops_old)
    in_loops_new = _inside_loops(new, cfg_new, loops_new)

    a = len(changed_new) + len(changed_old & deltas_old)
    b = len((deltas_new & in_loops_new) - changed_new) + len(
        (deltas_old & in_loops_old) - changed_old
    )
    d = len(deltas_old - in_loops_old) + len(deltas_new - in_loops_new)
    f = len(slices.forward_new) + len(slices.forward_old & deltas_old)
    g = len(slices.backward_new) + len(slices.backward_old & deltas_old)
    x = len(in_loops_new)
    y = len(new) - x
    z = len(backward_all_conditionals_new)
    return ComplexityReport(A=a, B=b, D=d, F=f, G=g, X=x, Y=y, Z=z)
