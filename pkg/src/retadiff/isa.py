"""Mini assembly language: instruction set, text format, and cycle-cost model.

The language is deliberately small: 8 registers, a flags pseudo-register
written only by CMP, a flat 4096-cell memory, a register stack for PUSH/POP,
and IO channels that stand in for peripheral reads with a declared value
range and time interval.  All branch targets are labels, so control flow is
fully static.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

NUM_REGISTERS = 8
MEMORY_CELLS = 4096


class AsmError(Exception):
    """Base class for assembly validation errors; carries a 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownOpcode(AsmError):
    pass


class UnresolvedLabel(AsmError):
    pass


class DuplicateLabel(AsmError):
    pass


class MalformedOperand(AsmError):
    pass


class MissingHalt(AsmError):
    pass


class Opcode(Enum):
    MOVI = "movi"
    MOV = "mov"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    SDIV = "sdiv"
    CMP = "cmp"
    B = "b"
    BEQ = "beq"
    BNE = "bne"
    BLT = "blt"
    BGE = "bge"
    BGT = "bgt"
    BLE = "ble"
    LDR = "ldr"
    STR = "str"
    PUSH = "push"
    POP = "pop"
    IO = "io"
    NOP = "nop"
    HALT = "halt"


CONDITIONAL_BRANCHES = frozenset(
    {Opcode.BEQ, Opcode.BNE, Opcode.BLT, Opcode.BGE, Opcode.BGT, Opcode.BLE}
)
BRANCHES = CONDITIONAL_BRANCHES | {Opcode.B}

# Branch condition as a relation between the two CMP operands (left rel right).
BRANCH_RELATION = {
    Opcode.BEQ: "eq",
    Opcode.BNE: "ne",
    Opcode.BLT: "lt",
    Opcode.BGE: "ge",
    Opcode.BGT: "gt",
    Opcode.BLE: "le",
}

NEGATED_RELATION = {"eq": "ne", "ne": "eq", "lt": "ge", "ge": "lt", "gt": "le", "le": "gt"}


@dataclass(frozen=True)
class Reg:
    index: int

    def __post_init__(self):
        if not 0 <= self.index < NUM_REGISTERS:
            raise ValueError(f"register index out of range: {self.index}")

    def __str__(self) -> str:
        return f"r{self.index}"


@dataclass(frozen=True)
class Imm:
    value: int

    def __str__(self) -> str:
        return f"#{self.value}"


@dataclass(frozen=True)
class LabelRef:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class MemRef:
    base: Reg
    offset: int

    def __str__(self) -> str:
        if self.offset:
            return f"[{self.base}, #{self.offset}]"
        return f"[{self.base}]"


@dataclass(frozen=True)
class RegList:
    regs: tuple[Reg, ...]

    def __str__(self) -> str:
        return "{" + ", ".join(str(r) for r in self.regs) + "}"


@dataclass(frozen=True)
class ChannelRef:
    name: str

    def __str__(self) -> str:
        return self.name


Operand = Reg | Imm | LabelRef | MemRef | RegList | ChannelRef


@dataclass(frozen=True)
class CostInterval:
    min_cycles: int
    max_cycles: int

    def __post_init__(self):
        if not 0 <= self.min_cycles <= self.max_cycles:
            raise ValueError(f"invalid cost interval [{self.min_cycles}, {self.max_cycles}]")

    @property
    def is_point(self) -> bool:
        return self.min_cycles == self.max_cycles

    def hull(self, other: "CostInterval") -> "CostInterval":
        return CostInterval(
            min(self.min_cycles, other.min_cycles), max(self.max_cycles, other.max_cycles)
        )

    def __str__(self) -> str:
        return f"[{self.min_cycles},{self.max_cycles}]"


@dataclass(frozen=True)
class IoChannel:
    name: str
    cost: CostInterval
    dst: Reg
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"io channel {self.name}: empty value range")


@dataclass(frozen=True)
class BoundAnnotation:
    loop_header_label: str
    min_iterations: int
    max_iterations: int

    def __post_init__(self):
        if not 0 <= self.min_iterations <= self.max_iterations:
            raise ValueError("invalid loop bound annotation")


@dataclass(frozen=True)
class Instruction:
    index: int
    label: str | None
    opcode: Opcode
    operands: tuple[Operand, ...]
    source_line: int = field(compare=False)

    @property
    def is_branch(self) -> bool:
        return self.opcode in BRANCHES

    @property
    def is_cond_branch(self) -> bool:
        return self.opcode in CONDITIONAL_BRANCHES

    @property
    def target(self) -> str:
        assert self.is_branch
        ref = self.operands[0]
        assert isinstance(ref, LabelRef)
        return ref.name

    def text(self) -> str:
        if not self.operands:
            return self.opcode.value
        return f"{self.opcode.value} " + ", ".join(str(op) for op in self.operands)


@dataclass(frozen=True)
class Program:
    instructions: tuple[Instruction, ...]
    io_channels: dict[str, IoChannel] = field(default_factory=dict)
    annotations: tuple[BoundAnnotation, ...] = ()
    labels: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.instructions)

    def __getitem__(self, idx: int) -> Instruction:
        return self.instructions[idx]

    def target_index(self, instr: Instruction) -> int:
        return self.labels[instr.target]


# Resources for dependence analysis.  Memory and the stack are each a single
# abstract location: any STR may reach any LDR, any PUSH any POP.
FLAGS = ("flags",)
MEM = ("mem",)
STACK = ("stack",)


def reg_res(r: Reg) -> tuple:
    return ("reg", r.index)


def defs_and_uses(instr: Instruction) -> tuple[frozenset, frozenset]:
    """Resources written and read by an instruction."""
    op = instr.opcode
    ops = instr.operands
    if op is Opcode.MOVI:
        return frozenset({reg_res(ops[0])}), frozenset()
    if op is Opcode.MOV:
        return frozenset({reg_res(ops[0])}), frozenset({reg_res(ops[1])})
    if op in (Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.SDIV):
        uses = {reg_res(ops[1])}
        if isinstance(ops[2], Reg):
            uses.add(reg_res(ops[2]))
        return frozenset({reg_res(ops[0])}), frozenset(uses)
    if op is Opcode.CMP:
        uses = {reg_res(ops[0])}
        if isinstance(ops[1], Reg):
            uses.add(reg_res(ops[1]))
        return frozenset({FLAGS}), frozenset(uses)
    if op in CONDITIONAL_BRANCHES:
        return frozenset(), frozenset({FLAGS})
    if op is Opcode.LDR:
        mem = ops[1]
        assert isinstance(mem, MemRef)
        return frozenset({reg_res(ops[0])}), frozenset({reg_res(mem.base), MEM})
    if op is Opcode.STR:
        mem = ops[1]
        assert isinstance(mem, MemRef)
        return frozenset({MEM}), frozenset({reg_res(ops[0]), reg_res(mem.base)})
    if op is Opcode.PUSH:
        rl = ops[0]
        assert isinstance(rl, RegList)
        return frozenset({STACK}), frozenset(reg_res(r) for r in rl.regs)
    if op is Opcode.POP:
        rl = ops[0]
        assert isinstance(rl, RegList)
        return frozenset(reg_res(r) for r in rl.regs), frozenset({STACK})
    if op is Opcode.IO:
        return frozenset(), frozenset()  # destination resolved via the channel table
    return frozenset(), frozenset()  # B, NOP, HALT


def io_defs(instr: Instruction, channels: dict[str, IoChannel]) -> frozenset:
    ref = instr.operands[0]
    assert isinstance(ref, ChannelRef)
    return frozenset({reg_res(channels[ref.name].dst)})


@dataclass(frozen=True)
class CycleModel:
    cost: dict[Opcode, CostInterval]
    branch_taken: CostInterval
    branch_not_taken: CostInterval


def default_cycle_model() -> CycleModel:
    one = CostInterval(1, 1)
    two = CostInterval(2, 2)
    return CycleModel(
        cost={
            Opcode.MOVI: one,
            Opcode.MOV: one,
            Opcode.ADD: one,
            Opcode.SUB: one,
            Opcode.MUL: one,
            Opcode.SDIV: CostInterval(2, 12),
            Opcode.CMP: one,
            Opcode.LDR: two,
            Opcode.STR: two,
            Opcode.PUSH: one,  # base cost; +1 per pushed register
            Opcode.POP: one,
            Opcode.NOP: one,
            Opcode.HALT: CostInterval(0, 0),
        },
        branch_taken=CostInterval(2, 4),
        branch_not_taken=CostInterval(1, 1),
    )


def cost_of(
    instr: Instruction,
    model: CycleModel,
    outcome: str | None = None,
    io_channels: dict[str, IoChannel] | None = None,
) -> CostInterval:
    """Cycle-cost interval of one instruction.

    For branches, `outcome` selects "taken" or "not_taken"; when absent the
    hull of both outcomes is returned.  PUSH/POP add one cycle per register
    to the base cost.  IO costs come from the channel declaration.
    """
    op = instr.opcode
    if op is Opcode.B:
        return model.branch_taken
    if op in CONDITIONAL_BRANCHES:
        if outcome == "taken":
            return model.branch_taken
        if outcome == "not_taken":
            return model.branch_not_taken
        return model.branch_taken.hull(model.branch_not_taken)
    if op in (Opcode.PUSH, Opcode.POP):
        rl = instr.operands[0]
        assert isinstance(rl, RegList)
        base = model.cost[op]
        k = len(rl.regs)
        return CostInterval(base.min_cycles + k, base.max_cycles + k)
    if op is Opcode.IO:
        ref = instr.operands[0]
        assert isinstance(ref, ChannelRef)
        if io_channels is None or ref.name not in io_channels:
            raise KeyError(f"unknown io channel {ref.name}")
        return io_channels[ref.name].cost
    return model.cost[op]


def parse_cycle_model(text: str, base: CycleModel | None = None) -> CycleModel:
    """Parse a cycle-model override file: `<OPCODE> <min> <max>` per line.

    `BRANCH_TAKEN` / `BRANCH_NOT_TAKEN` override the branch costs.  Entries
    missing from the file keep their values from `base` (the default model).
    """
    model = base or default_cycle_model()
    cost = dict(model.cost)
    taken, not_taken = model.branch_taken, model.branch_not_taken
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";")[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise MalformedOperand(f"bad model entry {line!r}", lineno)
        name, lo_s, hi_s = parts
        try:
            lo, hi = int(lo_s), int(hi_s)
            interval = CostInterval(lo, hi)
        except ValueError as exc:
            raise MalformedOperand(str(exc), lineno) from exc
        key = name.upper()
        if key == "BRANCH_TAKEN":
            taken = interval
        elif key == "BRANCH_NOT_TAKEN":
            not_taken = interval
        else:
            try:
                cost[Opcode[key]] = interval
            except KeyError as exc:
                raise UnknownOpcode(f"unknown opcode {name!r}", lineno) from exc
    return CycleModel(cost=cost, branch_taken=taken, branch_not_taken=not_taken)


_THREE_OPERAND = {Opcode.ADD, Opcode.SUB, Opcode.MUL, Opcode.SDIV}


def _parse_reg(token: str, line: int) -> Reg:
    token = token.strip().lower()
    if len(token) == 2 and token[0] == "r" and token[1].isdigit():
        idx = int(token[1])
        if idx < NUM_REGISTERS:
            return Reg(idx)
    raise MalformedOperand(f"expected register, got {token!r}", line)


def _parse_imm(token: str, line: int) -> Imm:
    token = token.strip()
    if not token.startswith("#"):
        raise MalformedOperand(f"expected immediate, got {token!r}", line)
    try:
        return Imm(int(token[1:], 0))
    except ValueError as exc:
        raise MalformedOperand(f"bad immediate {token!r}", line) from exc


def _parse_reg_or_imm(token: str, line: int) -> Reg | Imm:
    if token.strip().startswith("#"):
        return _parse_imm(token, line)
    return _parse_reg(token, line)


def _parse_memref(text: str, line: int) -> MemRef:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise MalformedOperand(f"expected memory operand, got {text!r}", line)
    inner = text[1:-1]
    parts = [p.strip() for p in inner.split(",")]
    base = _parse_reg(parts[0], line)
    if len(parts) == 1:
        return MemRef(base, 0)
    if len(parts) == 2:
        return MemRef(base, _parse_imm(parts[1], line).value)
    raise MalformedOperand(f"bad memory operand {text!r}", line)


def _split_operands(text: str, line: int) -> list[str]:
    # Split on commas that are not inside [...] or {...}.
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
            if depth < 0:
                raise MalformedOperand(f"unbalanced brackets in {text!r}", line)
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        parts.append("".join(cur))
    if depth != 0:
        raise MalformedOperand(f"unbalanced brackets in {text!r}", line)
    return [p.strip() for p in parts if p.strip()]


def _parse_operands(op: Opcode, rest: str, line: int) -> tuple[Operand, ...]:
    parts = _split_operands(rest, line) if rest else []

    def need(n: int):
        if len(parts) != n:
            raise MalformedOperand(
                f"{op.value} expects {n} operand(s), got {len(parts)}", line
            )

    if op is Opcode.MOVI:
        need(2)
        return (_parse_reg(parts[0], line), _parse_imm(parts[1], line))
    if op is Opcode.MOV:
        need(2)
        return (_parse_reg(parts[0], line), _parse_reg(parts[1], line))
    if op in _THREE_OPERAND:
        need(3)
        return (
            _parse_reg(parts[0], line),
            _parse_reg(parts[1], line),
            _parse_reg_or_imm(parts[2], line),
        )
    if op is Opcode.CMP:
        need(2)
        return (_parse_reg(parts[0], line), _parse_reg_or_imm(parts[1], line))
    if op in BRANCHES:
        need(1)
        name = parts[0]
        if not name or name.startswith(("#", "[", "{")):
            raise MalformedOperand(f"expected label, got {name!r}", line)
        return (LabelRef(name),)
    if op in (Opcode.LDR, Opcode.STR):
        need(2)
        return (_parse_reg(parts[0], line), _parse_memref(parts[1], line))
    if op in (Opcode.PUSH, Opcode.POP):
        need(1)
        text = parts[0]
        if text.startswith("{") and text.endswith("}"):
            text = text[1:-1]
        regs = tuple(_parse_reg(t, line) for t in text.split(",") if t.strip())
        if not regs:
            raise MalformedOperand(f"{op.value} needs at least one register", line)
        return (RegList(regs),)
    if op is Opcode.IO:
        need(1)
        return (ChannelRef(parts[0]),)
    need(0)
    return ()


def _instruction_successors(p_len: int, instr: Instruction, labels: dict[str, int]) -> list[int]:
    if instr.opcode is Opcode.HALT:
        return []
    if instr.opcode is Opcode.B:
        return [labels[instr.target]]
    succ = [instr.index + 1]
    if instr.is_cond_branch:
        succ.append(labels[instr.target])
    return succ


def parse_program(text: str) -> Program:
    """Parse assembly text into a validated Program.

    One instruction, label, directive, or comment per line.  Comments start
    with `;`.  Directives: `.bound <label> <min> <max>` and
    `.io <name> <min_cycles> <max_cycles> <reg> <lo> <hi>`.
    """
    instructions: list[Instruction] = []
    labels: dict[str, int] = {}
    label_lines: dict[str, int] = {}
    pending_label: str | None = None
    annotations: list[BoundAnnotation] = []
    io_channels: dict[str, IoChannel] = {}
    directive_bounds: list[tuple[str, int, int, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";")[0].strip()
        if not line:
            continue
        if line.startswith(".bound"):
            parts = line.split()
            if len(parts) != 4:
                raise MalformedOperand(".bound expects: .bound <label> <min> <max>", lineno)
            try:
                lo, hi = int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise MalformedOperand("bad .bound values", lineno) from exc
            directive_bounds.append((parts[1], lo, hi, lineno))
            continue
        if line.startswith(".io"):
            parts = line.split()
            if len(parts) != 7:
                raise MalformedOperand(
                    ".io expects: .io <name> <min_cycles> <max_cycles> <reg> <lo> <hi>", lineno
                )
            try:
                channel = IoChannel(
                    name=parts[1],
                    cost=CostInterval(int(parts[2]), int(parts[3])),
                    dst=_parse_reg(parts[4], lineno),
                    lo=int(parts[5]),
                    hi=int(parts[6]),
                )
            except ValueError as exc:
                raise MalformedOperand(str(exc), lineno) from exc
            if channel.name in io_channels:
                raise MalformedOperand(f"duplicate io channel {channel.name!r}", lineno)
            io_channels[channel.name] = channel
            continue
        if line.startswith("."):
            raise MalformedOperand(f"unknown directive {line.split()[0]!r}", lineno)

        if ":" in line:
            name, _, rest = line.partition(":")
            name = name.strip()
            if not name or any(c in name for c in " \t,#[]{}:"):
                raise MalformedOperand(f"bad label {name!r}", lineno)
            if name in labels or pending_label is not None:
                raise DuplicateLabel(f"duplicate label {name!r}", lineno)
            pending_label = name
            label_lines[name] = lineno
            line = rest.strip()
        if not line:
            continue

        mnemonic, _, rest = line.partition(" ")
        try:
            op = Opcode(mnemonic.lower())
        except ValueError:
            raise UnknownOpcode(f"unknown opcode {mnemonic!r}", lineno) from None
        operands = _parse_operands(op, rest.strip(), lineno)
        instructions.append(
            Instruction(
                index=len(instructions),
                label=pending_label,
                opcode=op,
                operands=operands,
                source_line=lineno,
            )
        )
        if pending_label is not None:
            labels[pending_label] = instructions[-1].index
            pending_label = None

    if pending_label is not None:
        raise UnresolvedLabel(
            f"label {pending_label!r} has no instruction", label_lines[pending_label]
        )
    if not instructions:
        raise MissingHalt("empty program", 1)

    for instr in instructions:
        if instr.is_branch and instr.target not in labels:
            raise UnresolvedLabel(f"unresolved label {instr.target!r}", instr.source_line)
        if instr.opcode is Opcode.IO:
            ref = instr.operands[0]
            assert isinstance(ref, ChannelRef)
            if ref.name not in io_channels:
                raise MalformedOperand(
                    f"io channel {ref.name!r} not declared with .io", instr.source_line
                )

    for label, lo, hi, lineno in directive_bounds:
        if label not in labels:
            raise UnresolvedLabel(f".bound references unknown label {label!r}", lineno)
        try:
            annotations.append(BoundAnnotation(label, lo, hi))
        except ValueError as exc:
            raise MalformedOperand(str(exc), lineno) from exc

    # Every reachable path must end in HALT: no reachable instruction may
    # fall off the end of the program.
    reachable: set[int] = set()
    stack = [0]
    while stack:
        i = stack.pop()
        if i in reachable:
            continue
        reachable.add(i)
        instr = instructions[i]
        for s in _instruction_successors(len(instructions), instr, labels):
            if s >= len(instructions):
                raise MissingHalt(
                    f"execution can fall past the end after {instr.text()!r}",
                    instr.source_line,
                )
            stack.append(s)

    return Program(
        instructions=tuple(instructions),
        io_channels=io_channels,
        annotations=tuple(annotations),
        labels=labels,
    )


def format_program(p: Program) -> str:
    """Render a Program back to text; parse(format(p)) is structurally equal to p."""
    lines = []
    for ch in p.io_channels.values():
        lines.append(
            f".io {ch.name} {ch.cost.min_cycles} {ch.cost.max_cycles} {ch.dst} {ch.lo} {ch.hi}"
        )
    for ann in p.annotations:
        lines.append(
            f".bound {ann.loop_header_label} {ann.min_iterations} {ann.max_iterations}"
        )
    for instr in p.instructions:
        prefix = f"{instr.label}: " if instr.label else "    "
        lines.append(prefix + instr.text())
    return "\n".join(lines) + "\n"
