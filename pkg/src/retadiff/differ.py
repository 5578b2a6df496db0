"""Line diff between two program versions.

Unchanged lines are matched one-to-one by a longest-common-subsequence over
canonical instruction text; everything unmatched is a delta instruction.
Branch targets are canonicalized by a content hash of the target so that
pure re-labeling never produces deltas.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .isa import ChannelRef, Instruction, LabelRef, Program


@dataclass(frozen=True)
class DiffResult:
    deltas_old: frozenset[int]
    deltas_new: frozenset[int]
    equivalence: dict[int, int]  # old index -> new index, injective

    def new_to_old(self) -> dict[int, int]:
        return {j: i for i, j in self.equivalence.items()}


def _hash(text: str) -> str:
    return hashlib.sha1(text.encode()).hexdigest()[:10]


def _placeholder_text(p: Program, instr: Instruction) -> str:
    parts = []
    for op in instr.operands:
        if isinstance(op, LabelRef):
            parts.append("@")
        elif isinstance(op, ChannelRef):
            # A channel's declared cost/range/destination is part of the
            # instruction's meaning: redeclaring it must produce a delta.
            ch = p.io_channels[op.name]
            parts.append(f"io<{ch.cost.min_cycles},{ch.cost.max_cycles},{ch.dst},{ch.lo},{ch.hi}>")
        else:
            parts.append(str(op))
    body = ",".join(parts)
    return f"{instr.opcode.name} {body}" if body else instr.opcode.name


def _label_hashes(p: Program, passes: int = 2) -> list[str]:
    """Iterated content hashing so branch targets compare structurally.

    Two refinement passes resolve branch-to-branch chains up to depth two;
    loops referencing their own headers stabilize because the header's
    non-branch content anchors the hash.
    """
    h = [_hash(_placeholder_text(p, i)) for i in p.instructions]
    for _ in range(passes):
        nxt = []
        for instr in p.instructions:
            if instr.is_branch:
                nxt.append(
                    _hash(_placeholder_text(p, instr) + "->" + h[p.target_index(instr)])
                )
            else:
                nxt.append(h[instr.index])
        h = nxt
    return h


def normalize_line(p: Program, index: int, _hashes: list[str] | None = None) -> str:
    """Canonical text of one instruction, labels replaced by target hashes."""
    instr = p.instructions[index]
    if not instr.is_branch:
        return _placeholder_text(p, instr)
    hashes = _hashes if _hashes is not None else _label_hashes(p)
    return _placeholder_text(p, instr).replace("@", "@" + hashes[p.target_index(instr)])


def normalized_lines(p: Program) -> list[str]:
    hashes = _label_hashes(p)
    return [normalize_line(p, i, hashes) for i in range(len(p))]


def _lcs_pairs(a: list[str], b: list[str]) -> list[tuple[int, int]]:
    """Matched index pairs of a maximal common subsequence.

    Tie-breaking is symmetric under swapping the two sequences (matches are
    always taken; otherwise the side whose current line sorts higher is
    consumed), so diff(old, new) mirrors diff(new, old) exactly.
    """
    n, m = len(a), len(b)
    # L[i][j] = LCS length of a[:i], b[:j]
    L = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        row, prev = L[i], L[i - 1]
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = prev[j] if prev[j] >= row[j - 1] else row[j - 1]
    pairs = []
    i, j = n, m
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1]:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif L[i - 1][j] > L[i][j - 1]:
            i -= 1
        elif L[i - 1][j] < L[i][j - 1]:
            j -= 1
        elif a[i - 1] > b[j - 1]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


def diff_programs(old: Program, new: Program) -> DiffResult:
    """Delta instructions of both versions plus the equivalence map."""
    a = normalized_lines(old)
    b = normalized_lines(new)
    equivalence = dict(_lcs_pairs(a, b))
    deltas_old = frozenset(range(len(old))) - frozenset(equivalence)
    deltas_new = frozenset(range(len(new))) - frozenset(equivalence.values())
    return DiffResult(deltas_old=deltas_old, deltas_new=deltas_new, equivalence=equivalence)


def format_diff(old: Program, new: Program, result: DiffResult | None = None) -> str:
    """Unified-style listing tagging each line `=`, `-`, `+`."""
    result = result or diff_programs(old, new)
    lines = []
    i = j = 0
    pairs = sorted(result.equivalence.items())
    for oi, nj in pairs + [(len(old), len(new))]:
        while i < oi:
            lines.append(f"- {old.instructions[i].text()}")
            i += 1
        while j < nj:
            lines.append(f"+ {new.instructions[j].text()}")
            j += 1
        if oi < len(old):
            lines.append(f"= {old.instructions[oi].text()}")
            i, j = oi + 1, nj + 1
    return "\n".join(lines) + "\n"
