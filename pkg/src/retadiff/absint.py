"""Interval abstract interpretation over a program's CFG.

Registers, the memory summary, and the stack summary each carry an integer
interval.  Flags are tracked relationally as a (left, relation, right)
compare record so that branch edges can refine the compared register; this
is what makes counted-loop bounds derivable.  Widening kicks in after a
configurable number of unstable visits and one narrowing pass recovers
finite bounds afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .cfg import Cfg, LoopInfo
from .isa import (
    NUM_REGISTERS,
    BRANCH_RELATION,
    NEGATED_RELATION,
    BoundAnnotation,
    Imm,
    Instruction,
    Opcode,
    Program,
    Reg,
)

NEG_INF = float("-inf")
POS_INF = float("inf")


@dataclass(frozen=True)
class Interval:
    lo: int | float = NEG_INF
    hi: int | float = POS_INF

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @staticmethod
    def point(v: int) -> "Interval":
        return Interval(v, v)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def bounded(self) -> bool:
        return self.lo != NEG_INF and self.hi != POS_INF

    def contains(self, v: int) -> bool:
        return self.lo <= v <= self.hi

    def join(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def meet(self, other: "Interval") -> "Interval | None":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else None

    def widen(self, other: "Interval") -> "Interval":
        lo = self.lo if other.lo >= self.lo else NEG_INF
        hi = self.hi if other.hi <= self.hi else POS_INF
        return Interval(lo, hi)

    def shift(self, c: int) -> "Interval":
        return Interval(self.lo + c if self.lo != NEG_INF else NEG_INF,
                        self.hi + c if self.hi != POS_INF else POS_INF)

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def __sub__(self, other: "Interval") -> "Interval":
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __mul__(self, other: "Interval") -> "Interval":
        corners = [
            _mul(a, b)
            for a in (self.lo, self.hi)
            for b in (other.lo, other.hi)
        ]
        return Interval(min(corners), max(corners))

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __str__(self) -> str:
        lo = "-inf" if self.lo == NEG_INF else str(self.lo)
        hi = "+inf" if self.hi == POS_INF else str(self.hi)
        return f"[{lo},{hi}]"


TOP = Interval()


def _mul(a, b):
    if a == 0 or b == 0:
        return 0
    return a * b


def interval_sdiv(num: Interval, den: Interval) -> Interval:
    """Truncating signed division; conservative when the divisor spans zero
    or any bound is infinite."""
    from .oracle import trunc_div

    if not (num.bounded and den.bounded):
        return TOP
    divisors = []
    for d in {den.lo, den.hi, -1, 1}:
        if d != 0 and den.lo <= d <= den.hi:
            divisors.append(d)
    if not divisors:
        return TOP  # division by zero is a runtime error; no constraint here
    corners = [trunc_div(n, d) for n in (num.lo, num.hi) for d in divisors]
    return Interval(min(corners), max(corners))


@dataclass(frozen=True)
class FlagsState:
    """Snapshot of the most recent CMP: operand registers (None once
    overwritten) and their intervals at the compare."""

    left_reg: int | None
    left_iv: Interval
    right_reg: int | None
    right_iv: Interval


@dataclass(frozen=True)
class AbstractState:
    regs: tuple[Interval, ...]
    flags: FlagsState | None
    mem: Interval
    stack: Interval

    def reg(self, r: int) -> Interval:
        return self.regs[r]

    def set_reg(self, r: int, iv: Interval) -> "AbstractState":
        regs = self.regs[:r] + (iv,) + self.regs[r + 1 :]
        flags = self.flags
        if flags is not None and (flags.left_reg == r or flags.right_reg == r):
            flags = replace(
                flags,
                left_reg=None if flags.left_reg == r else flags.left_reg,
                right_reg=None if flags.right_reg == r else flags.right_reg,
            )
        return replace(self, regs=regs, flags=flags)

    def join(self, other: "AbstractState") -> "AbstractState":
        return AbstractState(
            regs=tuple(a.join(b) for a, b in zip(self.regs, other.regs)),
            flags=self.flags if self.flags == other.flags else None,
            mem=self.mem.join(other.mem),
            stack=self.stack.join(other.stack),
        )

    def widen(self, other: "AbstractState") -> "AbstractState":
        return AbstractState(
            regs=tuple(a.widen(b) for a, b in zip(self.regs, other.regs)),
            flags=self.flags if self.flags == other.flags else None,
            mem=self.mem.widen(other.mem),
            stack=self.stack.widen(other.stack),
        )


def entry_state() -> AbstractState:
    """Registers unknown (inputs may set any of them); memory and stack
    summarize cells that concretely start at zero."""
    return AbstractState(
        regs=tuple(TOP for _ in range(NUM_REGISTERS)),
        flags=None,
        mem=Interval.point(0),
        stack=Interval.point(0),
    )


def _operand_iv(state: AbstractState, op) -> Interval:
    if isinstance(op, Imm):
        return Interval.point(op.value)
    assert isinstance(op, Reg)
    return state.reg(op.index)


def transfer(
    p: Program, state: AbstractState, instr: Instruction, havoc: bool = False
) -> AbstractState:
    """Abstract effect of one instruction; `havoc` drops written values to
    unknown (used for instructions outside the analyzed slice)."""
    op = instr.opcode
    ops = instr.operands
    if havoc:
        if op is Opcode.CMP:
            return replace(state, flags=None)
        if op is Opcode.STR:
            return replace(state, mem=TOP)
        if op is Opcode.PUSH:
            return replace(state, stack=TOP)
        if op is Opcode.MOVI or op is Opcode.MOV or op in (
            Opcode.ADD,
            Opcode.SUB,
            Opcode.MUL,
            Opcode.SDIV,
            Opcode.LDR,
        ):
            return state.set_reg(ops[0].index, TOP)
        if op is Opcode.POP:
            for r in ops[0].regs:
                state = state.set_reg(r.index, TOP)
            return state
        if op is Opcode.IO:
            ch = p.io_channels[ops[0].name]
            return state.set_reg(ch.dst.index, TOP)
        return state

    if op is Opcode.MOVI:
        return state.set_reg(ops[0].index, Interval.point(ops[1].value))
    if op is Opcode.MOV:
        return state.set_reg(ops[0].index, state.reg(ops[1].index))
    if op in (Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.SDIV):
        a = state.reg(ops[1].index)
        b = _operand_iv(state, ops[2])
        if op is Opcode.ADD:
            value = a + b
        elif op is Opcode.SUB:
            value = a - b
        elif op is Opcode.MUL:
            value = a * b
        else:
            value = interval_sdiv(a, b)
        return state.set_reg(ops[0].index, value)
    if op is Opcode.CMP:
        left = ops[0]
        right = ops[1]
        flags = FlagsState(
            left_reg=left.index,
            left_iv=state.reg(left.index),
            right_reg=right.index if isinstance(right, Reg) else None,
            right_iv=_operand_iv(state, right),
        )
        return replace(state, flags=flags)
    if op is Opcode.LDR:
        return state.set_reg(ops[0].index, state.mem)
    if op is Opcode.STR:
        return replace(state, mem=state.mem.join(state.reg(ops[0].index)))
    if op is Opcode.PUSH:
        stack = state.stack
        for r in ops[0].regs:
            stack = stack.join(state.reg(r.index))
        return replace(state, stack=stack)
    if op is Opcode.POP:
        for r in ops[0].regs:
            state = state.set_reg(r.index, state.stack)
        return state
    if op is Opcode.IO:
        ch = p.io_channels[ops[0].name]
        return state.set_reg(ch.dst.index, Interval(ch.lo, ch.hi))
    return state  # branches, NOP, HALT


_MIRROR = {"lt": "gt", "gt": "lt", "le": "ge", "ge": "le", "eq": "eq", "ne": "ne"}


def _relation_region(rel: str, other: Interval) -> Interval | None:
    """Values of the left operand satisfying `left rel other` for some value
    of `other`; None when unsatisfiable."""
    if rel == "eq":
        return other
    if rel == "ne":
        return TOP  # refined separately for point operands
    if rel == "lt":
        return Interval(NEG_INF, other.hi - 1) if other.hi != NEG_INF else None
    if rel == "le":
        return Interval(NEG_INF, other.hi)
    if rel == "gt":
        return Interval(other.lo + 1, POS_INF)
    if rel == "ge":
        return Interval(other.lo, POS_INF)
    raise ValueError(rel)


def _refine_ne(iv: Interval, other: Interval) -> Interval | None:
    if not other.is_point:
        return iv
    v = other.lo
    if iv.is_point and iv.lo == v:
        return None
    if iv.lo == v:
        return Interval(v + 1, iv.hi)
    if iv.hi == v:
        return Interval(iv.lo, v - 1)
    return iv


def relation_feasible(rel: str, left: Interval, right: Interval) -> bool:
    if rel == "eq":
        return left.meet(right) is not None
    if rel == "ne":
        return not (left.is_point and right.is_point and left.lo == right.lo)
    if rel == "lt":
        return left.lo < right.hi
    if rel == "le":
        return left.lo <= right.hi
    if rel == "gt":
        return left.hi > right.lo
    if rel == "ge":
        return left.hi >= right.lo
    raise ValueError(rel)


def branch_outcomes(state: AbstractState | None, instr: Instruction) -> tuple[bool, bool]:
    """(taken possible, not-taken possible) for a conditional branch."""
    assert instr.is_cond_branch
    if state is None:
        return False, False
    if state.flags is None:
        return True, True
    rel = BRANCH_RELATION[instr.opcode]
    f = state.flags
    taken = relation_feasible(rel, f.left_iv, f.right_iv)
    not_taken = relation_feasible(NEGATED_RELATION[rel], f.left_iv, f.right_iv)
    return taken, not_taken


def refine_edge(
    state: AbstractState, instr: Instruction, kind: str
) -> AbstractState | None:
    """Branch-edge refinement: narrow the compared registers along the edge;
    None when the edge is infeasible."""
    if not instr.is_cond_branch or state.flags is None:
        return state
    rel = BRANCH_RELATION[instr.opcode]
    if kind == "fallthrough":
        rel = NEGATED_RELATION[rel]
    f = state.flags
    if not relation_feasible(rel, f.left_iv, f.right_iv):
        return None
    if f.left_reg is not None:
        if rel == "ne":
            refined = _refine_ne(state.reg(f.left_reg), f.right_iv)
        else:
            region = _relation_region(rel, f.right_iv)
            refined = state.reg(f.left_reg).meet(region) if region else None
        if refined is None:
            return None
        state = state.set_reg(f.left_reg, refined)
        if state.flags is not None:
            state = replace(state, flags=replace(state.flags, left_iv=refined))
    if f.right_reg is not None:
        mirrored = _MIRROR[rel]
        if mirrored == "ne":
            refined = _refine_ne(state.reg(f.right_reg), f.left_iv)
        else:
            region = _relation_region(mirrored, f.left_iv)
            refined = state.reg(f.right_reg).meet(region) if region else None
        if refined is None:
            return None
        state = state.set_reg(f.right_reg, refined)
    return state


@dataclass
class AnalysisResult:
    before: dict[int, AbstractState | None]  # per-instruction point states
    block_in: dict[int, AbstractState | None]
    block_out: dict[int, AbstractState | None]
    visits: dict[int, int]
    widen_delay: int

    @property
    def max_block_visits(self) -> int:
        return max(self.visits.values(), default=0)


def _block_transfer(
    p: Program, cfg: Cfg, bid: int, state: AbstractState, slice_: frozenset[int] | None
) -> AbstractState:
    for i in cfg.blocks[bid].instructions:
        havoc = slice_ is not None and i not in slice_
        state = transfer(p, state, p.instructions[i], havoc=havoc)
    return state


def _edge_states(
    p: Program, cfg: Cfg, outs: dict[int, AbstractState | None]
) -> dict[int, list[AbstractState]]:
    """Refined contributions flowing into each block."""
    incoming: dict[int, list[AbstractState]] = {b.id: [] for b in cfg.blocks}
    for b in cfg.blocks:
        out = outs.get(b.id)
        if out is None:
            continue
        last = p.instructions[b.last]
        for s, kind in b.successors:
            refined = refine_edge(out, last, kind)
            if refined is not None:
                incoming[s].append(refined)
    return incoming


def _rpo_order(cfg: Cfg) -> list[int]:
    order: list[int] = []
    seen: set[int] = set()
    stack = [(cfg.entry, iter(s for s, _ in cfg.blocks[cfg.entry].successors))]
    seen.add(cfg.entry)
    while stack:
        node, it = stack[-1]
        advanced = False
        for s in it:
            if s not in seen:
                seen.add(s)
                stack.append((s, iter(x for x, _ in cfg.blocks[s].successors)))
                advanced = True
                break
        if not advanced:
            order.append(node)
            stack.pop()
    order.reverse()
    return order


def _incoming_for(p: Program, cfg: Cfg, outs, bid: int) -> list[AbstractState]:
    incoming = []
    for q in cfg.preds(bid):
        out = outs.get(q)
        if out is None:
            continue
        last = p.instructions[cfg.blocks[q].last]
        for s, kind in cfg.blocks[q].successors:
            if s != bid:
                continue
            refined = refine_edge(out, last, kind)
            if refined is not None:
                incoming.append(refined)
    return incoming


def _apply_pins(
    state: AbstractState, pins: dict[int, Interval] | None
) -> AbstractState:
    if not pins:
        return state
    for reg, iv in pins.items():
        met = state.reg(reg).meet(iv)
        if met is not None:
            state = state.set_reg(reg, met)
    return state


def analyze(
    p: Program,
    cfg: Cfg,
    slice_: frozenset[int] | None = None,
    widen_delay: int = 3,
    narrow_passes: int = 1,
    pins: dict[int, dict[int, Interval]] | None = None,
) -> AnalysisResult:
    """Fixed-point interval analysis with widening then narrowing.

    When `slice_` is given, instructions outside it are executed with havoc
    semantics: sound, and mirrors analyzing only the sliced program.  `pins`
    meets externally derived register ranges into block-entry states (used
    to fold recognized loop bounds back into the intervals).
    """
    pins = pins or {}
    rpo = _rpo_order(cfg)
    rpo_index = {b: i for i, b in enumerate(rpo)}
    ins: dict[int, AbstractState | None] = {b.id: None for b in cfg.blocks}
    outs: dict[int, AbstractState | None] = {b.id: None for b in cfg.blocks}
    visits = {b.id: 0 for b in cfg.blocks}

    pending = set(rpo)
    guard, limit = 0, (widen_delay + 4) * max(1, len(cfg.blocks)) ** 2 + 64
    while pending:
        guard += 1
        if guard > limit:
            raise RuntimeError("abstract interpretation failed to stabilize")
        bid = min(pending, key=rpo_index.__getitem__)
        pending.discard(bid)
        incoming = _incoming_for(p, cfg, outs, bid)
        if bid == cfg.entry:
            incoming.append(entry_state())
        if not incoming:
            continue
        joined = incoming[0]
        for st in incoming[1:]:
            joined = joined.join(st)
        joined = _apply_pins(joined, pins.get(bid))
        old_in = ins[bid]
        if old_in is None:
            new_in = joined
        elif visits[bid] >= widen_delay:
            new_in = old_in.widen(old_in.join(joined))
        else:
            new_in = old_in.join(joined)
        if new_in == old_in and outs[bid] is not None:
            continue
        visits[bid] += 1
        ins[bid] = new_in
        new_out = _block_transfer(p, cfg, bid, new_in, slice_)
        if new_out != outs[bid]:
            outs[bid] = new_out
            for s, _ in cfg.blocks[bid].successors:
                pending.add(s)

    for _ in range(narrow_passes):
        for bid in rpo:
            incoming = _incoming_for(p, cfg, outs, bid)
            if bid == cfg.entry:
                incoming.append(entry_state())
            if not incoming:
                continue
            joined = incoming[0]
            for st in incoming[1:]:
                joined = joined.join(st)
            joined = _apply_pins(joined, pins.get(bid))
            ins[bid] = joined
            outs[bid] = _block_transfer(p, cfg, bid, joined, slice_)

    before: dict[int, AbstractState | None] = {
        i: None for i in range(len(p))
    }
    for b in cfg.blocks:
        state = ins[b.id]
        for i in b.instructions:
            before[i] = state
            if state is not None:
                havoc = slice_ is not None and i not in slice_
                state = transfer(p, state, p.instructions[i], havoc=havoc)
    return AnalysisResult(
        before=before, block_in=ins, block_out=outs, visits=visits, widen_delay=widen_delay
    )


# --- counted-loop bound inference -------------------------------------------


def _ceil_div(n: int, d: int) -> int:
    # d > 0
    return -((-n) // d)


@dataclass(frozen=True)
class RecognizedInduction:
    iv_reg: int
    step: int  # per-iteration change of the induction register
    scale: int  # tested value = scale * iv + shift
    shift: int
    init: Interval  # induction register at loop entry
    inc_before_test: bool
    test_instr: int
    iterations: tuple[int, int]


_CHAIN_OPS = {Opcode.MOV, Opcode.ADD, Opcode.SUB, Opcode.MUL}


def _last_def_before(p: Program, block, reg: int, pos: int) -> int | None:
    from .isa import defs_and_uses, io_defs

    for j in range(pos - 1, block.start - 1, -1):
        instr = p.instructions[j]
        d, _ = defs_and_uses(instr)
        if instr.opcode is Opcode.IO:
            d = d | io_defs(instr, p.io_channels)
        if ("reg", reg) in d:
            return j
    return None


def _register_defs_in_blocks(p: Program, cfg: Cfg, blocks, reg: int) -> list[int]:
    from .isa import defs_and_uses, io_defs

    out = []
    for bid in blocks:
        for i in cfg.blocks[bid].instructions:
            instr = p.instructions[i]
            d, _ = defs_and_uses(instr)
            if instr.opcode is Opcode.IO:
                d = d | io_defs(instr, p.io_channels)
            if ("reg", reg) in d:
                out.append(i)
    return out


def _k_stop_interval(
    rel: str, a: int, b0: Interval, limit: Interval
) -> tuple[int, int] | None:
    """First test visit k >= 1 at which `b0 + a*(k-1) rel limit` fails."""

    def k_lt(b, l, thr_shift):  # increasing, continue while v < l (+shift)
        if b == POS_INF or l == NEG_INF:
            return 1
        if b == NEG_INF or l == POS_INF:
            return None
        return 1 + max(0, _ceil_div(int(l) + thr_shift - int(b), a))

    def k_gt(b, l, thr_shift):  # decreasing, continue while v > l (-shift)
        if b == NEG_INF or l == POS_INF:
            return 1
        if b == POS_INF or l == NEG_INF:
            return None
        return 1 + max(0, _ceil_div(int(b) - (int(l) - thr_shift), -a))

    if a > 0 and rel in ("lt", "le"):
        shift = 1 if rel == "le" else 0
        lo = k_lt(b0.hi, limit.lo, shift)
        hi = k_lt(b0.lo, limit.hi, shift)
        if hi is None:
            return None
        return (lo or 1, hi)
    if a < 0 and rel in ("gt", "ge"):
        shift = 1 if rel == "ge" else 0
        lo = k_gt(b0.lo, limit.hi, shift)
        hi = k_gt(b0.hi, limit.lo, shift)
        if hi is None:
            return None
        return (lo or 1, hi)
    if rel == "ne" and a in (1, -1):
        if a == 1:
            if b0.hi == POS_INF or limit.hi == POS_INF:
                return None
            if not (b0.hi <= limit.lo):
                return None
            return (1 + int(limit.lo) - int(b0.hi), 1 + int(limit.hi) - int(b0.lo))
        else:
            if b0.lo == NEG_INF or limit.lo == NEG_INF:
                return None
            if not (b0.lo >= limit.hi):
                return None
            return (1 + int(b0.lo) - int(limit.hi), 1 + int(b0.hi) - int(limit.lo))
    if rel == "eq":
        feasible = relation_feasible("eq", b0, limit)
        return (1, 2) if feasible else (1, 1)
    # Step moves away from the exit: bounded only if the test fails outright.
    if a > 0 and rel in ("gt", "ge"):
        fails = not relation_feasible(rel, b0, limit)
        return (1, 1) if fails else None
    if a < 0 and rel in ("lt", "le"):
        fails = not relation_feasible(rel, b0, limit)
        return (1, 1) if fails else None
    return None


def _loop_entry_state(
    p: Program, cfg: Cfg, result: AnalysisResult, loop: LoopInfo
) -> AbstractState | None:
    states = []
    for q in cfg.preds(loop.header):
        if q in loop.body:
            continue
        out = result.block_out.get(q)
        if out is None:
            continue
        last = p.instructions[cfg.blocks[q].last]
        for s, kind in cfg.blocks[q].successors:
            if s != loop.header:
                continue
            refined = refine_edge(out, last, kind)
            if refined is not None:
                states.append(refined)
    if loop.header == cfg.entry:
        states.append(entry_state())
    if not states:
        return None
    joined = states[0]
    for st in states[1:]:
        joined = joined.join(st)
    return joined


def _nested_block_ids(loops: list[LoopInfo], loop: LoopInfo) -> set[int]:
    nested = set()
    for other in loops:
        if other is loop:
            continue
        if other.body < loop.body:
            nested |= other.body
    return nested


def recognize_induction(
    p: Program,
    cfg: Cfg,
    loops: list[LoopInfo],
    loop: LoopInfo,
    result: AnalysisResult,
    exit_branch: int,
) -> RecognizedInduction | None:
    """Monotone constant-step induction against a loop-invariant limit.

    Recognizes the tested register as an affine function of a basic
    induction register (one self-add/sub of a constant per iteration) and
    solves the exit test for the first failing visit.
    """
    branch = p.instructions[exit_branch]
    test_bid = cfg.block_of[exit_branch]
    block = cfg.blocks[test_bid]
    nested = _nested_block_ids(loops, loop)
    if test_bid in nested:
        return None

    cmp_idx = None
    for j in range(exit_branch - 1, block.start - 1, -1):
        if p.instructions[j].opcode is Opcode.CMP:
            cmp_idx = j
            break
    if cmp_idx is None:
        return None
    cmp_instr = p.instructions[cmp_idx]
    left = cmp_instr.operands[0]
    right = cmp_instr.operands[1]

    # Affine chain: tested value = scale * (base register at chain bottom) + shift.
    scale, shift = 1, 0
    current, pos = left.index, cmp_idx
    consumed: list[int] = []
    for _ in range(16):
        d = _last_def_before(p, block, current, pos)
        if d is None:
            break
        instr = p.instructions[d]
        if instr.opcode not in _CHAIN_OPS:
            return None
        if instr.opcode is Opcode.MOV:
            current = instr.operands[1].index
        else:
            src2 = instr.operands[2]
            if not isinstance(src2, Imm):
                return None
            if instr.opcode is Opcode.ADD:
                shift += scale * src2.value
            elif instr.opcode is Opcode.SUB:
                shift -= scale * src2.value
            else:  # MUL
                if src2.value == 0:
                    return None
                scale *= src2.value
            current = instr.operands[1].index
        consumed.append(d)
        pos = d
    else:
        return None

    iv = current
    iv_defs = _register_defs_in_blocks(p, cfg, loop.body, iv)
    if len(iv_defs) != 1:
        return None
    inc_idx = iv_defs[0]
    inc_instr = p.instructions[inc_idx]
    if not (
        inc_instr.opcode in (Opcode.ADD, Opcode.SUB)
        and isinstance(inc_instr.operands[0], Reg)
        and inc_instr.operands[0].index == iv
        and inc_instr.operands[1].index == iv
        and isinstance(inc_instr.operands[2], Imm)
    ):
        return None
    step = inc_instr.operands[2].value
    if inc_instr.opcode is Opcode.SUB:
        step = -step
    if step == 0:
        return None
    inc_bid = cfg.block_of[inc_idx]
    if inc_bid in nested:
        return None

    absorbed = inc_idx in consumed
    if absorbed:
        # The chain walk absorbed the increment, so the chain bottoms out at
        # the block-entry value of the induction register, which has seen
        # k-1 increments at test visit k; the absorbed one makes it k total.
        inc_before = True
    elif inc_bid == test_bid:
        if inc_idx < (consumed[-1] if consumed else cmp_idx):
            return None  # a reaching in-block def the walk failed to absorb
        inc_before = False  # increment positioned after the test
    elif cfg.dominates(inc_bid, test_bid):
        inc_before = True
    elif cfg.dominates(test_bid, inc_bid):
        inc_before = False
    else:
        return None

    entry = _loop_entry_state(p, cfg, result, loop)
    if entry is None:
        return None
    init = entry.reg(iv)

    if isinstance(right, Imm):
        limit = Interval.point(right.value)
    else:
        if _register_defs_in_blocks(p, cfg, loop.body, right.index):
            return None
        st = result.before.get(cmp_idx)
        if st is None:
            return None
        limit = st.reg(right.index)

    # Tested value at visit k: scale*(init + n*step) + shift with n = k when
    # the increment runs before the test each iteration, n = k-1 otherwise.
    # When the walk absorbed the increment, shift already carries one step.
    a = scale * step
    if absorbed:
        b0 = init * Interval.point(scale) + Interval.point(shift)
    elif inc_before:
        b0 = init * Interval.point(scale) + Interval.point(shift + a)
    else:
        b0 = init * Interval.point(scale) + Interval.point(shift)

    taken_stays = None
    for s, kind in block.successors:
        if kind == "taken":
            taken_stays = s in loop.body
    ft_stays = None
    for s, kind in block.successors:
        if kind == "fallthrough":
            ft_stays = s in loop.body
    if taken_stays is None or ft_stays is None or taken_stays == ft_stays:
        return None
    rel = BRANCH_RELATION[branch.opcode]
    continue_rel = rel if taken_stays else NEGATED_RELATION[rel]

    k_stop = _k_stop_interval(continue_rel, a, b0, limit)
    if k_stop is None:
        return None
    k_lo, k_hi = max(1, k_stop[0]), max(1, k_stop[1])
    if test_bid in loop.back_edges:
        iters = (k_lo, k_hi)
    else:
        iters = (max(0, k_lo - 1), max(0, k_hi - 1))
    return RecognizedInduction(
        iv_reg=iv,
        step=step,
        scale=scale,
        shift=shift,
        init=init,
        inc_before_test=inc_before,
        test_instr=exit_branch,
        iterations=iters,
    )


def loop_bounds(
    p: Program,
    cfg: Cfg,
    loops: list[LoopInfo],
    result: AnalysisResult,
    annotations: tuple[BoundAnnotation, ...] = (),
) -> tuple[list[LoopInfo], list[str], dict[int, RecognizedInduction]]:
    """Fill loop bounds from annotations (authoritative) or induction
    recognition; unknown bounds stay None for callers to reject."""
    from .cfg import loop_exit_branches

    ann_map = {a.loop_header_label: (a.min_iterations, a.max_iterations) for a in annotations}
    for a in p.annotations:
        ann_map.setdefault(a.loop_header_label, (a.min_iterations, a.max_iterations))
    warnings: list[str] = []
    recognized: dict[int, RecognizedInduction] = {}

    for loop in loops:
        exits = loop_exit_branches(cfg, loop)
        inferred: tuple[int, int] | None = None
        candidates = []
        for e in exits:
            rec = recognize_induction(p, cfg, loops, loop, result, e)
            if rec is not None:
                candidates.append(rec)
        if candidates:
            hi = min(r.iterations[1] for r in candidates)
            if len(candidates) == len(exits):
                lo = min(r.iterations[0] for r in candidates)
            else:
                lo = 1 if all(cfg.block_of[e] in loop.back_edges for e in exits) else 0
            lo = min(lo, hi)
            inferred = (lo, hi)
            recognized[loop.header] = candidates[0]

        label = loop.header_label(cfg)
        if label in ann_map:
            loop.bound = ann_map[label]
            loop.bound_source = "annotation"
            if inferred is not None and inferred != loop.bound:
                warnings.append(
                    f"loop {label!r}: annotation {loop.bound} overrides inferred {inferred}"
                )
        elif inferred is not None:
            loop.bound = inferred
            loop.bound_source = "absint"
        else:
            loop.bound = None
            loop.bound_source = "unknown"
    return loops, warnings, recognized


def analyze_program(
    p: Program,
    cfg: Cfg,
    loops: list[LoopInfo],
    slice_: frozenset[int] | None = None,
    annotations: tuple[BoundAnnotation, ...] = (),
    widen_delay: int = 3,
) -> tuple[AnalysisResult, list[str]]:
    """Analysis plus loop bounds plus a bound-informed refinement pass.

    Once a loop's iteration count is known, the induction register at the
    header is pinned to its derivable range and the analysis re-runs, so
    reported per-point intervals reflect the loop bounds.
    """
    result = analyze(p, cfg, slice_=slice_, widen_delay=widen_delay)
    loops, warnings, recognized = loop_bounds(p, cfg, loops, result, annotations)

    def header_visit_travel(loop: LoopInfo) -> int:
        # The header sees k-1 increments on its k-th visit; it is visited
        # bound times when the loop exits only from back-edge tails, and
        # bound+1 times otherwise.
        exit_blocks = {
            b
            for b in loop.body
            if any(s not in loop.body for s, _ in cfg.blocks[b].successors)
        }
        only_tails = exit_blocks <= set(loop.back_edges)
        n = loop.bound[1]
        return max(0, n - 1) if only_tails else n

    pins: dict[int, dict[int, Interval]] = {}
    for _ in range(4):
        new_pins: dict[int, dict[int, Interval]] = {}
        for loop in loops:
            if loop.bound is None:
                continue
            rec = recognized.get(loop.header)
            if rec is None or not rec.init.bounded:
                continue
            travel = rec.step * header_visit_travel(loop)
            lo = min(rec.init.lo, rec.init.lo + travel)
            hi = max(rec.init.hi, rec.init.hi + travel)
            new_pins.setdefault(loop.header, {})[rec.iv_reg] = Interval(lo, hi)
        if not new_pins or new_pins == pins:
            break
        pins = new_pins
        result = analyze(p, cfg, slice_=slice_, widen_delay=widen_delay, pins=pins)
        loops, more, recognized = loop_bounds(p, cfg, loops, result, annotations)
        warnings.extend(w for w in more if w not in warnings)
    return result, warnings


# --- domain comparison -------------------------------------------------------


@dataclass(frozen=True)
class DomainComparison:
    relation: str  # more_restrictive | less_restrictive | equal | incomparable
    new_values: tuple[Interval, ...]


def _taken_set(state: AbstractState | None, instr: Instruction) -> tuple[Interval, ...] | None:
    """Left-operand values that can take the branch; None means unknown."""
    if state is None:
        return ()
    if state.flags is None:
        return None
    rel = BRANCH_RELATION[instr.opcode]
    f = state.flags
    left, right = f.left_iv, f.right_iv
    if rel == "ne":
        if right.is_point and left.contains(right.lo):
            parts = []
            if left.lo < right.lo:
                parts.append(Interval(left.lo, right.lo - 1))
            if left.hi > right.lo:
                parts.append(Interval(right.lo + 1, left.hi))
            return tuple(parts)
        return (left,) if relation_feasible("ne", left, right) else ()
    region = _relation_region(rel, right)
    if region is None:
        return ()
    met = left.meet(region)
    return (met,) if met is not None else ()


def _union_norm(parts: tuple[Interval, ...]) -> tuple[Interval, ...]:
    if not parts:
        return ()
    xs = sorted(parts, key=lambda iv: iv.lo)
    merged = [xs[0]]
    for iv in xs[1:]:
        last = merged[-1]
        if iv.lo <= last.hi + 1:
            merged[-1] = Interval(last.lo, max(last.hi, iv.hi))
        else:
            merged.append(iv)
    return tuple(merged)


def _union_subset(a: tuple[Interval, ...], b: tuple[Interval, ...]) -> bool:
    for ia in a:
        coverage = ia.lo
        for ib in b:
            if ib.lo <= coverage <= ib.hi:
                if ib.hi >= ia.hi:
                    coverage = None
                    break
                coverage = ib.hi + 1
        if coverage is not None:
            return False
    return True


def _union_diff(
    a: tuple[Interval, ...], b: tuple[Interval, ...]
) -> tuple[Interval, ...]:
    out: list[Interval] = []
    for ia in a:
        pieces = [ia]
        for ib in b:
            next_pieces = []
            for piece in pieces:
                if ib.hi < piece.lo or ib.lo > piece.hi:
                    next_pieces.append(piece)
                    continue
                if ib.lo > piece.lo:
                    next_pieces.append(Interval(piece.lo, ib.lo - 1))
                if ib.hi < piece.hi:
                    next_pieces.append(Interval(ib.hi + 1, piece.hi))
            pieces = next_pieces
        out.extend(pieces)
    return _union_norm(tuple(out))


def compare_domains(
    old_state: AbstractState | None,
    new_state: AbstractState | None,
    old_instr: Instruction | None,
    new_instr: Instruction | None,
) -> DomainComparison:
    """Containment of the branch conditions' satisfying sets across versions.

    A version-unique conditional is compared against the empty set.
    """
    old_set = _taken_set(old_state, old_instr) if old_instr is not None else ()
    new_set = _taken_set(new_state, new_instr) if new_instr is not None else ()
    if old_set is None or new_set is None:
        return DomainComparison(relation="incomparable", new_values=())
    old_u = _union_norm(old_set)
    new_u = _union_norm(new_set)
    new_in_old = _union_subset(new_u, old_u)
    old_in_new = _union_subset(old_u, new_u)
    if new_in_old and old_in_new:
        return DomainComparison(relation="equal", new_values=())
    if new_in_old:
        return DomainComparison(relation="more_restrictive", new_values=())
    diff = _union_diff(new_u, old_u)
    if old_in_new:
        return DomainComparison(relation="less_restrictive", new_values=diff)
    return DomainComparison(relation="incomparable", new_values=diff)


def format_state_table(p: Program, result: AnalysisResult) -> str:
    """Stable text table of per-point register intervals."""
    lines = ["idx  instruction              r0..r7"]
    for i, instr in enumerate(p.instructions):
        st = result.before.get(i)
        if st is None:
            regs = "unreachable"
        else:
            regs = " ".join(str(st.reg(r)) for r in range(NUM_REGISTERS))
        lines.append(f"{i:<4d} {instr.text():<24s} {regs}")
    return "\n".join(lines) + "\n"
