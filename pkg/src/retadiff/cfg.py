"""Control-flow graph: basic blocks, dominators, natural loops, categories."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .isa import Instruction, Opcode, Program


class IrreducibleLoop(Exception):
    """A cycle with no dominating header; the analysis refuses these CFGs."""


class Category(Enum):
    CAT_A = "CatA"
    CAT_B_A = "CatB_a"
    CAT_B_B = "CatB_b"


VIRTUAL_EXIT = -1


@dataclass(frozen=True)
class BasicBlock:
    id: int
    start: int  # first instruction index
    end: int  # one past the last instruction index
    successors: tuple[tuple[int, str], ...]  # (block id, "fallthrough" | "taken")

    @property
    def instructions(self) -> range:
        return range(self.start, self.end)

    @property
    def last(self) -> int:
        return self.end - 1


@dataclass(frozen=True)
class Cfg:
    program: Program
    blocks: tuple[BasicBlock, ...]
    entry: int
    idom: dict[int, int]  # block -> immediate dominator (entry maps to itself)
    block_of: dict[int, int]  # instruction index -> block id
    unreachable: frozenset[int]  # instruction indices excluded from the graph

    def preds(self, bid: int) -> list[int]:
        return self._preds[bid]

    def __post_init__(self):
        preds: dict[int, list[int]] = {b.id: [] for b in self.blocks}
        for b in self.blocks:
            for s, _ in b.successors:
                preds[s].append(b.id)
        object.__setattr__(self, "_preds", preds)

    def dominates(self, a: int, b: int) -> bool:
        while True:
            if a == b:
                return True
            if b == self.entry:
                return False
            b = self.idom[b]


@dataclass
class LoopInfo:
    header: int  # block id
    back_edges: tuple[int, ...]  # tail block ids
    body: frozenset[int]  # block ids, header included
    bound: tuple[int, int] | None = None
    bound_source: str = "unknown"  # annotation | absint | unknown

    def header_label(self, cfg: Cfg) -> str:
        instr = cfg.program.instructions[cfg.blocks[self.header].start]
        return instr.label or f"<block {self.header}>"


def _leaders(p: Program) -> list[int]:
    leaders = {0}
    for instr in p.instructions:
        if instr.is_branch:
            leaders.add(p.target_index(instr))
            if instr.index + 1 < len(p):
                leaders.add(instr.index + 1)
        elif instr.opcode is Opcode.HALT and instr.index + 1 < len(p):
            leaders.add(instr.index + 1)
        elif instr.label is not None:
            leaders.add(instr.index)
    return sorted(leaders)


def build_cfg(p: Program) -> Cfg:
    """Linear-time block construction; unreachable instructions are excluded."""
    leaders = _leaders(p)
    spans = [(s, e) for s, e in zip(leaders, leaders[1:] + [len(p)])]
    span_of_start = {s: k for k, (s, e) in enumerate(spans)}

    def span_successors(start: int, end: int) -> list[tuple[int, str]]:
        last = p.instructions[end - 1]
        succ: list[tuple[int, str]] = []
        if last.opcode is Opcode.HALT:
            return succ
        if last.opcode is Opcode.B:
            return [(span_of_start[p.target_index(last)], "taken")]
        if end < len(p):
            succ.append((span_of_start[end], "fallthrough"))
        if last.is_cond_branch:
            succ.append((span_of_start[p.target_index(last)], "taken"))
        return succ

    # Reachability over spans from the entry span.
    reach: set[int] = set()
    stack = [0]
    while stack:
        k = stack.pop()
        if k in reach:
            continue
        reach.add(k)
        for s, _ in span_successors(*spans[k]):
            stack.append(s)

    renumber = {k: i for i, k in enumerate(sorted(reach))}
    blocks = []
    block_of: dict[int, int] = {}
    for k in sorted(reach):
        start, end = spans[k]
        succ = tuple((renumber[s], kind) for s, kind in span_successors(start, end))
        bid = renumber[k]
        blocks.append(BasicBlock(id=bid, start=start, end=end, successors=succ))
        for i in range(start, end):
            block_of[i] = bid
    unreachable = frozenset(
        i for k, (s, e) in enumerate(spans) if k not in reach for i in range(s, e)
    )

    idom = _dominators(blocks, entry=0)
    return Cfg(
        program=p,
        blocks=tuple(blocks),
        entry=0,
        idom=idom,
        block_of=block_of,
        unreachable=unreachable,
    )


def _rpo(nblocks: int, succs: dict[int, list[int]], entry: int) -> list[int]:
    seen, order = set(), []

    def visit(b: int):
        stack = [(b, iter(succs[b]))]
        seen.add(b)
        while stack:
            node, it = stack[-1]
            advanced = False
            for s in it:
                if s not in seen:
                    seen.add(s)
                    stack.append((s, iter(succs[s])))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()

    visit(entry)
    order.reverse()
    return order


def _dominators(blocks: list[BasicBlock], entry: int) -> dict[int, int]:
    """Cooper-Harvey-Kennedy iterative immediate dominators."""
    succs = {b.id: [s for s, _ in b.successors] for b in blocks}
    preds: dict[int, list[int]] = {b.id: [] for b in blocks}
    for b in blocks:
        for s, _ in b.successors:
            preds[s].append(b.id)
    order = _rpo(len(blocks), succs, entry)
    rpo_index = {b: i for i, b in enumerate(order)}
    idom: dict[int, int] = {entry: entry}

    def intersect(x: int, y: int) -> int:
        while x != y:
            while rpo_index[x] > rpo_index[y]:
                x = idom[x]
            while rpo_index[y] > rpo_index[x]:
                y = idom[y]
        return x

    changed = True
    while changed:
        changed = False
        for b in order:
            if b == entry:
                continue
            candidates = [q for q in preds[b] if q in idom]
            new = candidates[0]
            for q in candidates[1:]:
                new = intersect(new, q)
            if idom.get(b) != new:
                idom[b] = new
                changed = True
    return idom


def find_natural_loops(cfg: Cfg) -> list[LoopInfo]:
    """One LoopInfo per header; raises IrreducibleLoop on non-natural cycles."""
    # A retreating edge (to a gray node in DFS) must target a dominator of
    # its source, otherwise the cycle has no dominating header.
    color: dict[int, int] = {}
    back: dict[int, set[int]] = {}

    def dfs(b: int):
        stack = [(b, iter(s for s, _ in cfg.blocks[b].successors))]
        color[b] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for s in it:
                if color.get(s, 0) == 1:
                    if not cfg.dominates(s, node):
                        raise IrreducibleLoop(
                            f"cycle through block {s} has no dominating header"
                        )
                    back.setdefault(s, set()).add(node)
                elif color.get(s, 0) == 0:
                    color[s] = 1
                    stack.append((s, iter(x for x, _ in cfg.blocks[s].successors)))
                    advanced = True
                    break
            if not advanced:
                color[node] = 2
                stack.pop()

    dfs(cfg.entry)

    loops = []
    for header in sorted(back):
        tails = sorted(back[header])
        body = {header}
        work = [t for t in tails if t != header]
        while work:
            b = work.pop()
            if b in body:
                continue
            body.add(b)
            work.extend(cfg.preds(b))
        loops.append(
            LoopInfo(header=header, back_edges=tuple(tails), body=frozenset(body))
        )
    return loops


def loops_containing(loops: list[LoopInfo], cfg: Cfg, instr_idx: int) -> list[LoopInfo]:
    """Loops whose body contains the instruction, outermost first."""
    bid = cfg.block_of.get(instr_idx)
    if bid is None:
        return []
    found = [lp for lp in loops if bid in lp.body]
    found.sort(key=lambda lp: len(lp.body), reverse=True)
    return found


def loop_exit_branches(cfg: Cfg, loop: LoopInfo) -> list[int]:
    """Conditional branch instructions in the loop with an edge leaving the body."""
    out = []
    for bid in sorted(loop.body):
        block = cfg.blocks[bid]
        last = cfg.program.instructions[block.last]
        if last.is_cond_branch and any(s not in loop.body for s, _ in block.successors):
            out.append(block.last)
    return out


def categorize_instruction(cfg: Cfg, loops: list[LoopInfo], idx: int) -> Category:
    """CatA unless the instruction is a conditional branch; those split into
    loop-causing (header exit test or back-edge source) and forward-only."""
    instr = cfg.program.instructions[idx]
    if not instr.is_cond_branch:
        return Category.CAT_A
    bid = cfg.block_of[idx]
    for lp in loops:
        if bid == lp.header or bid in lp.back_edges:
            if bid in lp.body:
                return Category.CAT_B_B
    return Category.CAT_B_A


def postdominators(cfg: Cfg) -> dict[int, int]:
    """Immediate postdominators over the CFG augmented with a virtual exit.

    Blocks with no successors connect to VIRTUAL_EXIT; blocks on paths that
    never reach an exit keep VIRTUAL_EXIT as a conservative postdominator.
    """
    rsuccs: dict[int, list[int]] = {b.id: [] for b in cfg.blocks}
    rsuccs[VIRTUAL_EXIT] = []
    rpreds: dict[int, list[int]] = {b.id: [] for b in cfg.blocks}
    rpreds[VIRTUAL_EXIT] = []
    for b in cfg.blocks:
        targets = [s for s, _ in b.successors] or [VIRTUAL_EXIT]
        for s in targets:
            # reversed graph: edge s -> b
            rsuccs[s].append(b.id)
            rpreds[b.id].append(s)

    order = _rpo(len(cfg.blocks) + 1, rsuccs, VIRTUAL_EXIT)
    rpo_index = {b: i for i, b in enumerate(order)}
    ipdom: dict[int, int] = {VIRTUAL_EXIT: VIRTUAL_EXIT}

    def intersect(x: int, y: int) -> int:
        while x != y:
            while rpo_index[x] > rpo_index[y]:
                x = ipdom[x]
            while rpo_index[y] > rpo_index[x]:
                y = ipdom[y]
        return x

    changed = True
    while changed:
        changed = False
        for b in order:
            if b == VIRTUAL_EXIT:
                continue
            candidates = [q for q in rpreds[b] if q in ipdom]
            if not candidates:
                continue
            new = candidates[0]
            for q in candidates[1:]:
                new = intersect(new, q)
            if ipdom.get(b) != new:
                ipdom[b] = new
                changed = True
    for b in cfg.blocks:
        ipdom.setdefault(b.id, VIRTUAL_EXIT)
    return ipdom


def control_dependents(cfg: Cfg, ipdom: dict[int, int] | None = None) -> dict[int, set[int]]:
    """Branch block -> blocks control-dependent on it (Ferrante-Ottenstein-Warren)."""
    ipdom = ipdom or postdominators(cfg)
    deps: dict[int, set[int]] = {}
    for b in cfg.blocks:
        if len(b.successors) < 2:
            continue
        stop = ipdom[b.id]
        for s, _ in b.successors:
            runner = s
            while runner != stop and runner != VIRTUAL_EXIT:
                deps.setdefault(b.id, set()).add(runner)
                runner = ipdom[runner]
    return deps


def format_dot(cfg: Cfg, loops: list[LoopInfo] | None = None) -> str:
    """Graphviz text for blocks, edges, and loop membership."""
    lines = ["digraph cfg {", "  node [shape=box, fontname=monospace];"]
    headers = {lp.header for lp in (loops or [])}
    for b in cfg.blocks:
        body = "\\l".join(
            cfg.program.instructions[i].text() for i in b.instructions
        )
        shape = ', style="bold"' if b.id in headers else ""
        lines.append(f'  b{b.id} [label="B{b.id}\\l{body}\\l"{shape}];')
    for b in cfg.blocks:
        for s, kind in b.successors:
            style = "solid" if kind == "taken" else "dashed"
            lines.append(f"  b{b.id} -> b{s} [style={style}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
