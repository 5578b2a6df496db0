"""Glue from update artifacts to the analysis-cost counters."""

from __future__ import annotations

from .cfg import LoopInfo, loop_exit_branches
from .oracle import ComplexityReport, SliceBundle, complexity_report
from .reta import UpdateArtifacts
from .slicing import backward_slice


def _loop_conditionals(v, lp: LoopInfo) -> set[int]:
    conds = set(loop_exit_branches(v.cfg, lp))
    for t in lp.back_edges:
        last = v.cfg.blocks[t].last
        if v.program.instructions[last].is_cond_branch:
            conds.add(last)
    return conds


def match_loops(art: UpdateArtifacts) -> list[tuple[LoopInfo | None, LoopInfo | None]]:
    """Pair loops across versions through the equivalence of their exit and
    back-edge conditionals; unmatched loops pair with None."""
    pairs: list[tuple[LoopInfo | None, LoopInfo | None]] = []
    used_new: set[int] = set()
    for lp in art.old.loops:
        twin = None
        for e in sorted(_loop_conditionals(art.old, lp)):
            je = art.diff.equivalence.get(e)
            if je is None:
                continue
            for ln in art.new.loops:
                if ln.header in used_new:
                    continue
                if je in _loop_conditionals(art.new, ln):
                    twin = ln
                    break
            if twin is not None:
                break
        if twin is not None:
            used_new.add(twin.header)
        pairs.append((lp, twin))
    for ln in art.new.loops:
        if ln.header not in used_new:
            pairs.append((None, ln))
    return pairs


def update_complexity(art: UpdateArtifacts) -> ComplexityReport:
    slices = SliceBundle(
        forward_old=art.old.forward,
        forward_new=art.new.forward,
        backward_old=art.old.backward,
        backward_new=art.new.backward,
    )
    all_conds_new = {
        i for i in range(len(art.new.program)) if art.new.program.instructions[i].is_cond_branch
    }
    all_conds_new &= set(art.new.cfg.block_of)
    if all_conds_new:
        backward_all = backward_slice(art.new.program, art.new.dg, all_conds_new, "new").indices
    else:
        backward_all = frozenset()
    return complexity_report(
        old=art.old.program,
        new=art.new.program,
        deltas_old=art.diff.deltas_old,
        deltas_new=art.diff.deltas_new,
        slices=slices,
        loop_pairs=match_loops(art),
        cfg_old=art.old.cfg,
        cfg_new=art.new.cfg,
        loops_old=art.old.loops,
        loops_new=art.new.loops,
        backward_all_conditionals_new=backward_all,
    )
