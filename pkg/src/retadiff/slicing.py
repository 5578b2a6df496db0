"""Register/flag/memory dependence graph and program slices.

Memory is a single abstract location (any STR may reach any LDR) and the
register stack is another, so data dependences are a sound over-approximation.
Control dependence comes from post-dominance on the CFG with a virtual exit.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .cfg import Cfg, control_dependents, postdominators
from .isa import Instruction, Opcode, Program, defs_and_uses, io_defs


class NotAConditional(Exception):
    pass


@dataclass(frozen=True)
class DependenceGraph:
    data_out: dict[int, frozenset[int]]  # def instruction -> dependent uses
    data_in: dict[int, frozenset[int]]  # use instruction -> reaching defs
    control_out: dict[int, frozenset[int]]  # branch -> control-dependent instrs
    control_in: dict[int, frozenset[int]]


@dataclass(frozen=True)
class SliceSet:
    version: str  # "old" | "new"
    indices: frozenset[int]
    conditionals: frozenset[int]


def _instr_defs_uses(p: Program, instr: Instruction) -> tuple[frozenset, frozenset]:
    d, u = defs_and_uses(instr)
    if instr.opcode is Opcode.IO:
        d = d | io_defs(instr, p.io_channels)
    return d, u


# Weak-update resources: a new definition does not kill earlier ones because
# the abstract location summarizes many concrete cells.
_WEAK = {("mem",), ("stack",)}


def build_dependence_graph(p: Program, cfg: Cfg) -> DependenceGraph:
    """Def-use data edges via reaching definitions, plus control edges."""
    reachable = sorted(cfg.block_of)
    succs: dict[int, list[int]] = {}
    for i in reachable:
        instr = p.instructions[i]
        if instr.opcode is Opcode.HALT:
            succs[i] = []
        elif instr.opcode is Opcode.B:
            succs[i] = [p.target_index(instr)]
        elif instr.is_cond_branch:
            succs[i] = [instr.index + 1, p.target_index(instr)]
        else:
            succs[i] = [instr.index + 1]
    preds: dict[int, list[int]] = {i: [] for i in reachable}
    for i, ss in succs.items():
        for s in ss:
            preds[s].append(i)

    gen: dict[int, frozenset] = {}
    uses: dict[int, frozenset] = {}
    for i in reachable:
        d, u = _instr_defs_uses(p, p.instructions[i])
        gen[i], uses[i] = d, u

    # OUT[i]: resource -> set of definition sites reaching past i.
    out: dict[int, dict[tuple, frozenset[int]]] = {i: {} for i in reachable}
    work = deque(reachable)
    in_state: dict[int, dict[tuple, frozenset[int]]] = {i: {} for i in reachable}
    while work:
        i = work.popleft()
        merged: dict[tuple, frozenset[int]] = {}
        for q in preds[i]:
            for res, defs in out[q].items():
                merged[res] = merged.get(res, frozenset()) | defs
        in_state[i] = merged
        new_out = dict(merged)
        for res in gen[i]:
            if res in _WEAK:
                new_out[res] = new_out.get(res, frozenset()) | {i}
            else:
                new_out[res] = frozenset({i})
        if new_out != out[i]:
            out[i] = new_out
            for s in succs[i]:
                work.append(s)

    data_out: dict[int, set[int]] = {i: set() for i in reachable}
    data_in: dict[int, set[int]] = {i: set() for i in reachable}
    for j in reachable:
        for res in uses[j]:
            for d in in_state[j].get(res, frozenset()):
                data_out[d].add(j)
                data_in[j].add(d)

    ipdom = postdominators(cfg)
    block_deps = control_dependents(cfg, ipdom)
    control_out: dict[int, set[int]] = {i: set() for i in reachable}
    control_in: dict[int, set[int]] = {i: set() for i in reachable}
    for branch_block, dep_blocks in block_deps.items():
        branch_instr = cfg.blocks[branch_block].last
        for db in dep_blocks:
            for j in cfg.blocks[db].instructions:
                control_out[branch_instr].add(j)
                control_in[j].add(branch_instr)

    return DependenceGraph(
        data_out={i: frozenset(s) for i, s in data_out.items()},
        data_in={i: frozenset(s) for i, s in data_in.items()},
        control_out={i: frozenset(s) for i, s in control_out.items()},
        control_in={i: frozenset(s) for i, s in control_in.items()},
    )


def _close(
    p: Program,
    start: frozenset[int],
    neighbors,
) -> frozenset[int]:
    seen = set(start)
    work = deque(start)
    while work:
        i = work.popleft()
        for j in neighbors(i):
            if j not in seen:
                seen.add(j)
                work.append(j)
    return frozenset(seen)


def forward_slice(p: Program, dg: DependenceGraph, criteria: set[int], version: str = "old") -> SliceSet:
    """Everything a change at the criteria can influence: transitive data
    dependents, plus both outcome paths of every conditional that joins."""

    def neighbors(i: int):
        out = dg.data_out.get(i, frozenset())
        if p.instructions[i].is_cond_branch:
            out = out | dg.control_out.get(i, frozenset())
        return out

    indices = _close(p, frozenset(criteria), neighbors)
    conds = frozenset(i for i in indices if p.instructions[i].is_cond_branch)
    return SliceSet(version=version, indices=indices, conditionals=conds)


def backward_slice(p: Program, dg: DependenceGraph, criteria: set[int], version: str = "old") -> SliceSet:
    """Definitions that determine the truth values of the given conditionals."""
    for c in criteria:
        if not p.instructions[c].is_cond_branch:
            raise NotAConditional(f"instruction {c} is not a conditional branch")
    indices = _close(p, frozenset(criteria), lambda i: dg.data_in.get(i, frozenset()))
    conds = frozenset(i for i in indices if p.instructions[i].is_cond_branch)
    return SliceSet(version=version, indices=indices, conditionals=conds)


def combined_slice(
    p: Program, dg: DependenceGraph, deltas: set[int], version: str = "old"
) -> SliceSet:
    """Forward slice from the deltas united with the backward slices of every
    conditional the forward slice contains; the input to categorization."""
    if not deltas:
        return SliceSet(version=version, indices=frozenset(), conditionals=frozenset())
    fwd = forward_slice(p, dg, deltas, version)
    if fwd.conditionals:
        bwd = backward_slice(p, dg, set(fwd.conditionals), version)
        indices = fwd.indices | bwd.indices
    else:
        indices = fwd.indices
    conds = frozenset(i for i in indices if p.instructions[i].is_cond_branch)
    return SliceSet(version=version, indices=indices, conditionals=conds)


def format_slice(p: Program, s: SliceSet) -> str:
    """Program listing with non-slice lines commented out."""
    lines = []
    for instr in p.instructions:
        prefix = f"{instr.label}: " if instr.label else "    "
        text = prefix + instr.text()
        if instr.index not in s.indices:
            text = "; " + text
        lines.append(text)
    return "\n".join(lines) + "\n"
