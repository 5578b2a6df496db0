"""The differential engine: slice, categorize, and sum signed contributions.

The execution-time difference is assembled per instruction from interval
execution counts and interval costs, with three refinements that keep the
result tight without giving up per-run soundness:

* paired instructions with identical text share cost draws, so only the
  count difference is charged, and the count difference collapses to zero
  when neither side's count context is touched by the update;
* conditionals that split paths of equal cost contribute nothing: a sliced
  non-loop conditional is charged as one region whose per-outcome path
  costs are hulled per version and subtracted;
* loop-relevant conditionals charge their whole body through per-version
  iteration counts, which reproduces the bound-change arithmetic exactly
  when bounds and body costs are points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import absint
from .absint import AnalysisResult, DomainComparison, branch_outcomes, compare_domains
from .cfg import (
    VIRTUAL_EXIT,
    Category,
    Cfg,
    LoopInfo,
    build_cfg,
    categorize_instruction,
    control_dependents,
    find_natural_loops,
    loop_exit_branches,
    postdominators,
)
from .differ import DiffResult, diff_programs
from .isa import (
    BoundAnnotation,
    CostInterval,
    CycleModel,
    Opcode,
    Program,
    cost_of,
    default_cycle_model,
)
from .oracle import UnboundedLoop
from .slicing import (
    DependenceGraph,
    SliceSet,
    backward_slice,
    build_dependence_graph,
    combined_slice,
    forward_slice,
)


class MissingExecutionCount(UnboundedLoop):
    pass


class IncomparableDomains(Exception):
    pass


Ivl = tuple[int, int]


def _add(a: Ivl, b: Ivl) -> Ivl:
    return (a[0] + b[0], a[1] + b[1])


def _sub(a: Ivl, b: Ivl) -> Ivl:
    return (a[0] - b[1], a[1] - b[0])


def _mul(a: Ivl, b: Ivl) -> Ivl:
    corners = [x * y for x in a for y in b]
    return (min(corners), max(corners))


def _neg(a: Ivl) -> Ivl:
    return (-a[1], -a[0])


def _hull(a: Ivl, b: Ivl) -> Ivl:
    return (min(a[0], b[0]), max(a[1], b[1]))


ZERO: Ivl = (0, 0)


def _ci(c: CostInterval) -> Ivl:
    return (c.min_cycles, c.max_cycles)


@dataclass(frozen=True)
class Contribution:
    version: str  # "old" | "new" | "both"
    instruction: tuple[int | None, int | None]  # (old index, new index)
    category: Category
    cycles: Ivl
    explanation: str


@dataclass(frozen=True)
class TimeDelta:
    optimistic: int
    pessimistic: int
    contributions: tuple[Contribution, ...]
    warnings: tuple[str, ...] = ()


def compose_wcet(measured_old_wcet: int, delta: TimeDelta) -> tuple[int, int]:
    """New-version WCET interval from a measured old WCET plus the delta;
    the upper end is the deployable claim."""
    if measured_old_wcet < 0:
        raise ValueError("measured WCET must be non-negative")
    return (measured_old_wcet + delta.optimistic, measured_old_wcet + delta.pessimistic)


@dataclass
class VersionArtifacts:
    name: str
    program: Program
    cfg: Cfg
    loops: list[LoopInfo]
    dg: DependenceGraph
    slice: SliceSet
    forward: frozenset[int]
    backward: frozenset[int]
    analysis: AnalysisResult
    ipdom: dict[int, int]
    governors: dict[int, frozenset[int]]  # block -> transitive controlling blocks
    relevant_loops: list[LoopInfo]  # loops whose exit conditionals are sliced


@dataclass
class UpdateArtifacts:
    """Everything the engine derived; feeds reporting and complexity accounting."""

    old: VersionArtifacts
    new: VersionArtifacts
    diff: DiffResult
    delta: TimeDelta


def _transitive_governors(cfg: Cfg) -> dict[int, frozenset[int]]:
    deps = control_dependents(cfg)
    direct: dict[int, set[int]] = {b.id: set() for b in cfg.blocks}
    for branch_block, dep_blocks in deps.items():
        for db in dep_blocks:
            if db != branch_block:
                direct[db].add(branch_block)
    closed: dict[int, frozenset[int]] = {}

    def close(b: int, trail: frozenset[int]) -> frozenset[int]:
        if b in closed:
            return closed[b]
        acc = set(direct[b])
        for g in direct[b]:
            if g not in trail:
                acc |= close(g, trail | {b})
        closed[b] = frozenset(acc)
        return closed[b]

    for b in direct:
        close(b, frozenset())
    return closed


def _build_version(
    name: str,
    p: Program,
    criteria: set[int],
    annotations: tuple[BoundAnnotation, ...],
    widen_delay: int,
) -> VersionArtifacts:
    cfg = build_cfg(p)
    loops = find_natural_loops(cfg)
    dg = build_dependence_graph(p, cfg)
    sl = combined_slice(p, dg, criteria, name)
    fwd = forward_slice(p, dg, criteria, name).indices if criteria else frozenset()
    bwd = sl.indices - fwd

    # Loop bounds are needed for execution counts even when the bound chain
    # itself is untouched, so the interval analysis also keeps the backward
    # slices of every loop-exit conditional live.
    exit_conds = {e for lp in loops for e in loop_exit_branches(cfg, lp)}
    analysis_scope = None
    if sl.indices:
        extra = backward_slice(p, dg, exit_conds, name).indices if exit_conds else frozenset()
        analysis_scope = sl.indices | extra | frozenset(exit_conds)
    analysis, _ = absint.analyze_program(
        p, cfg, loops, slice_=analysis_scope, annotations=annotations, widen_delay=widen_delay
    )
    ipdom = postdominators(cfg)
    governors = _transitive_governors(cfg)
    relevant = []
    for lp in loops:
        conds = set(loop_exit_branches(cfg, lp))
        for t in lp.back_edges:
            last = cfg.blocks[t].last
            if p.instructions[last].is_cond_branch:
                conds.add(last)
        if conds & sl.conditionals:
            relevant.append(lp)
    return VersionArtifacts(
        name=name,
        program=p,
        cfg=cfg,
        loops=loops,
        dg=dg,
        slice=sl,
        forward=fwd,
        backward=bwd,
        analysis=analysis,
        ipdom=ipdom,
        governors=governors,
        relevant_loops=relevant,
    )


def _mirrored_slices(
    old: Program,
    new: Program,
    diff: DiffResult,
    annotations: tuple[BoundAnnotation, ...],
    widen_delay: int,
) -> tuple[VersionArtifacts, VersionArtifacts]:
    """Per-version slices, re-closed until each contains the twins of the
    other's members.  Without the mirroring, an update that only adds a
    conditional would leave the old version's slice empty even though the
    guarded code's execution count changes."""
    crit_old = set(diff.deltas_old)
    crit_new = set(diff.deltas_new)
    inverse = {j: i for i, j in diff.equivalence.items()}
    va = _build_version("old", old, crit_old, annotations, widen_delay)
    vb = _build_version("new", new, crit_new, annotations, widen_delay)
    for _ in range(len(old) + len(new)):
        twins_old = {inverse[j] for j in vb.slice.indices if j in inverse}
        twins_new = {diff.equivalence[i] for i in va.slice.indices if i in diff.equivalence}
        grew = False
        if not twins_old <= va.slice.indices:
            crit_old |= twins_old
            va = _build_version("old", old, crit_old, annotations, widen_delay)
            grew = True
        if not twins_new <= vb.slice.indices:
            crit_new |= twins_new
            vb = _build_version("new", new, crit_new, annotations, widen_delay)
            grew = True
        if not grew:
            break
    return va, vb


class _Accountant:
    """Shared count/cost machinery for one version."""

    def __init__(self, v: VersionArtifacts, model: CycleModel):
        self.v = v
        self.model = model
        self._count_cache: dict[int, Ivl] = {}
        self._loop_interval_cache: dict[int, Ivl] = {}
        self._pruned_idom: dict[int, int] | None = None

    def _pruned_dominators(self) -> dict[int, int]:
        """Immediate dominators over the feasibility-pruned CFG: edges the
        interval analysis proves never taken are removed, which makes
        must-execute reasoning see through vacuous branches."""
        if self._pruned_idom is not None:
            return self._pruned_idom
        cfg = self.v.cfg
        succs: dict[int, list[int]] = {}
        for b in cfg.blocks:
            if self.v.analysis.block_out.get(b.id) is None:
                succs[b.id] = []
                continue
            succs[b.id] = [
                s for s, kind in b.successors if self._edge_feasible(b.id, s, kind)
            ]
        preds: dict[int, list[int]] = {b.id: [] for b in cfg.blocks}
        order: list[int] = []
        seen = {cfg.entry}
        stack = [cfg.entry]
        while stack:
            n = stack.pop()
            order.append(n)
            for s in succs[n]:
                preds[s].append(n)
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        rpo: list[int] = []
        visited: set[int] = set()

        def visit(b: int):
            st = [(b, iter(succs[b]))]
            visited.add(b)
            while st:
                node, it = st[-1]
                advanced = False
                for s in it:
                    if s not in visited:
                        visited.add(s)
                        st.append((s, iter(succs[s])))
                        advanced = True
                        break
                if not advanced:
                    rpo.append(node)
                    st.pop()

        visit(cfg.entry)
        rpo.reverse()
        index = {b: i for i, b in enumerate(rpo)}
        idom = {cfg.entry: cfg.entry}

        def intersect(x: int, y: int) -> int:
            while x != y:
                while index[x] > index[y]:
                    x = idom[x]
                while index[y] > index[x]:
                    y = idom[y]
            return x

        changed = True
        while changed:
            changed = False
            for b in rpo:
                if b == cfg.entry:
                    continue
                cands = [q for q in preds[b] if q in idom and q in index]
                if not cands:
                    continue
                new = cands[0]
                for q in cands[1:]:
                    new = intersect(new, q)
                if idom.get(b) != new:
                    idom[b] = new
                    changed = True
        self._pruned_idom = idom
        return idom

    def dominates_pruned(self, a: int, b: int) -> bool:
        idom = self._pruned_dominators()
        if b not in idom:
            return False  # unreachable once infeasible edges are removed
        entry = self.v.cfg.entry
        while True:
            if a == b:
                return True
            if b == entry:
                return False
            b = idom[b]

    # -- costs ---------------------------------------------------------------

    def plain_cost(self, idx: int) -> Ivl:
        instr = self.v.program.instructions[idx]
        return _ci(cost_of(instr, self.model, io_channels=self.v.program.io_channels))

    def branch_hull(self, idx: int) -> Ivl:
        """Feasible-outcome cost hull of a conditional branch."""
        instr = self.v.program.instructions[idx]
        state = self.v.analysis.before.get(idx)
        taken_ok, nt_ok = branch_outcomes(state, instr)
        taken = _ci(cost_of(instr, self.model, outcome="taken"))
        nt = _ci(cost_of(instr, self.model, outcome="not_taken"))
        if taken_ok and not nt_ok:
            return taken
        if nt_ok and not taken_ok:
            return nt
        return _hull(taken, nt)

    def cost_hull(self, idx: int) -> Ivl:
        instr = self.v.program.instructions[idx]
        if instr.is_cond_branch:
            return self.branch_hull(idx)
        return self.plain_cost(idx)

    # -- counts ---------------------------------------------------------------

    def _edge_feasible(self, bid: int, succ: int, kind: str) -> bool:
        out = self.v.analysis.block_out.get(bid)
        if out is None:
            return False
        last = self.v.program.instructions[self.v.cfg.blocks[bid].last]
        from .absint import refine_edge

        return refine_edge(out, last, kind) is not None

    def _feasible_exits(self, lp: LoopInfo) -> set[int]:
        exits = set()
        for b in lp.body:
            for s, kind in self.v.cfg.blocks[b].successors:
                if s not in lp.body and self._edge_feasible(b, s, kind):
                    exits.add(b)
        return exits

    def _loop_factor(self, lp: LoopInfo, bid: int) -> Ivl:
        """Executions of a body block per loop entry.

        The bound counts back-edge-source executions; the header and blocks
        that sit on every iteration path execute once more when the loop can
        exit before reaching a tail, and once regardless of the bound when
        they dominate every feasible exit.
        """
        if lp.bound is None:
            raise MissingExecutionCount(lp.header_label(self.v.cfg))
        lo, hi = lp.bound
        cfg = self.v.cfg
        tails = set(lp.back_edges)
        exit_blocks = {
            b
            for b in lp.body
            if any(s not in lp.body for s, _ in cfg.blocks[b].successors)
        }
        feasible_exits = self._feasible_exits(lp) or exit_blocks
        only_tails = exit_blocks <= tails
        tail_exit = bool(exit_blocks & tails)

        if bid in tails and len(tails) == 1:
            return (lo, hi)  # the bound counts exactly the tail's executions
        if bid == lp.header and not tail_exit and bid not in tails:
            return (lo + 1, hi + 1)  # header runs once more than the tails
        f_hi = hi if only_tails else hi + 1
        f_lo = lo if all(self.dominates_pruned(bid, t) for t in tails) else 0
        if feasible_exits and all(self.dominates_pruned(bid, e) for e in feasible_exits):
            f_lo = max(f_lo, 1)
        return (f_lo, f_hi)

    def block_count(self, bid: int) -> Ivl:
        if bid in self._count_cache:
            return self._count_cache[bid]
        if self.v.analysis.block_in.get(bid) is None:
            self._count_cache[bid] = ZERO  # unreachable under the analysis
            return ZERO
        count: Ivl = (1, 1)
        enclosing = [lp for lp in self.v.loops if bid in lp.body]
        for lp in enclosing:
            count = _mul(count, self._loop_factor(lp, bid))
        bodies = set()
        for lp in enclosing:
            bodies |= lp.body
        for g in self.v.governors.get(bid, frozenset()):
            if g in bodies:
                continue  # iteration counting, covered by the loop factors
            last = self.v.cfg.blocks[g].last
            instr = self.v.program.instructions[last]
            if instr.is_cond_branch:
                taken_ok, nt_ok = branch_outcomes(self.v.analysis.before.get(last), instr)
                if taken_ok and nt_ok:
                    count = (0, count[1])
                    break
            else:
                count = (0, count[1])
                break
        self._count_cache[bid] = count
        return count

    def count(self, idx: int) -> Ivl:
        return self.block_count(self.v.cfg.block_of[idx])

    def coupled(self, idx: int) -> bool:
        """True when this instruction's execution count cannot differ from
        its twin's: no enclosing relevant loop and no sliced governor."""
        bid = self.v.cfg.block_of[idx]
        for lp in self.v.relevant_loops:
            if bid in lp.body:
                return False
        for g in self.v.governors.get(bid, frozenset()):
            branch = self.v.cfg.blocks[g].last
            if branch in self.v.slice.indices:
                return False
        return True

    # -- region path costs ----------------------------------------------------

    def region_blocks(self, cond_idx: int) -> set[int] | None:
        """Blocks strictly between the conditional and its join point."""
        bid = self.v.cfg.block_of[cond_idx]
        join = self.v.ipdom[bid]
        blocks: set[int] = set()
        stack = [s for s, _ in self.v.cfg.blocks[bid].successors if s != join]
        while stack:
            b = stack.pop()
            if b in blocks or b == join:
                continue
            if b == bid:
                return None  # cycle back to the conditional; not a plain region
            blocks.add(b)
            for s, _ in self.v.cfg.blocks[b].successors:
                if s != join:
                    stack.append(s)
        return blocks

    def loop_cycle_interval(self, lp: LoopInfo) -> Ivl:
        """Cycles of one complete entry of the loop (all iterations plus the
        exit pass), as an interval."""
        if lp.header in self._loop_interval_cache:
            return self._loop_interval_cache[lp.header]
        if lp.bound is None:
            raise UnboundedLoop(lp.header_label(self.v.cfg))
        circuit = self._iteration_paths(lp, to_tails=True)
        exit_trip = self._iteration_paths(lp, to_tails=False)
        lo_n, hi_n = lp.bound
        exit_blocks = {
            b
            for b in lp.body
            if any(s not in lp.body for s, _ in self.v.cfg.blocks[b].successors)
        }
        bottom = exit_blocks <= set(lp.back_edges)
        if bottom:
            lo = max(lo_n, 1) - 1
            hi = max(hi_n, 1) - 1
            total = _add(_mul((lo, hi), circuit), exit_trip)
        else:
            total = _add(_mul((lo_n, hi_n), circuit), exit_trip)
        self._loop_interval_cache[lp.header] = total
        return total

    def _inner_loops(self, lp: LoopInfo) -> list[LoopInfo]:
        return [o for o in self.v.loops if o.body < lp.body]

    def _edge_cost(self, bid: int, kind: str) -> Ivl:
        last = self.v.program.instructions[self.v.cfg.blocks[bid].last]
        if last.opcode is Opcode.B:
            return _ci(cost_of(last, self.model, outcome="taken"))
        if last.is_cond_branch:
            return _ci(
                cost_of(last, self.model, outcome="taken" if kind == "taken" else "not_taken")
            )
        return ZERO

    def _block_body_cost(self, bid: int) -> Ivl:
        """Non-branch instruction costs of a block; branches are charged on
        the outgoing edges so the outcome picks the right interval."""
        total = ZERO
        for i in self.v.cfg.blocks[bid].instructions:
            instr = self.v.program.instructions[i]
            if instr.is_branch:
                continue
            total = _add(total, self.plain_cost(i))
        return total

    def _collapsed_view(
        self, region: set[int], loops: list[LoopInfo]
    ) -> tuple[dict[int, list[tuple[int, Ivl]]], dict[int, Ivl], dict[int, int]]:
        """Effective edges, node costs, and block ownership over a block set
        with every fully contained loop collapsed into its header.  Edges
        leaving a collapsed loop cost nothing extra: the exit pass is already
        inside the loop's cycle total."""
        cfg = self.v.cfg
        contained = [lp for lp in loops if lp.body <= region]
        absorbed: dict[int, int] = {}
        for il in sorted(contained, key=lambda l: len(l.body)):
            for b in il.body:
                if b != il.header:
                    absorbed.setdefault(b, il.header)

        def resolve(b: int) -> int:
            while b in absorbed:
                b = absorbed[b]
            return b

        outermost: dict[int, LoopInfo] = {}
        for il in sorted(contained, key=lambda l: len(l.body)):
            if resolve(il.header) == il.header:
                outermost[il.header] = il

        nodes = {resolve(b) for b in region}
        owner = {b: resolve(b) for b in region}
        cost: dict[int, Ivl] = {}
        edges: dict[int, list[tuple[int, Ivl]]] = {n: [] for n in nodes}
        for n in nodes:
            if n in outermost:
                lp = outermost[n]
                cost[n] = self.loop_cycle_interval(lp)
                for b in lp.body:
                    for s, kind in cfg.blocks[b].successors:
                        if s in lp.body:
                            continue
                        edges[n].append((resolve(s) if s in region else s, ZERO))
            else:
                cost[n] = self._block_body_cost(n)
                for s, kind in cfg.blocks[n].successors:
                    target = resolve(s) if s in region else s
                    edges[n].append((target, self._edge_cost(n, kind)))
        return edges, cost, owner

    def _iteration_paths(self, lp: LoopInfo, to_tails: bool) -> Ivl:
        """(shortest, longest) path of one pass: header to a back-edge tail
        with the back edge charged (circuit), or header to an exit edge with
        the exit charged (final pass)."""
        inner = self._inner_loops(lp)
        edges, cost, owner = self._collapsed_view(set(lp.body), inner)
        nodes = set(cost)
        if lp.header not in nodes:
            return ZERO
        header = lp.header
        back_tails = {owner[t] for t in lp.back_edges}

        memo: dict[int, Ivl | None] = {}
        visiting: set[int] = set()

        def best_from(n: int) -> Ivl | None:
            if n in memo:
                return memo[n]
            if n in visiting:
                return None
            visiting.add(n)
            candidates: list[Ivl] = []
            base = cost[n]
            for target, ecost in edges[n]:
                if target == header:
                    if to_tails and n in back_tails:
                        candidates.append(_add(base, ecost))
                    continue
                if target not in nodes:
                    if not to_tails:
                        candidates.append(_add(base, ecost))
                    continue
                sub = best_from(target)
                if sub is not None:
                    candidates.append(_add(base, _add(ecost, sub)))
            visiting.discard(n)
            if not candidates:
                memo[n] = None
                return None
            memo[n] = (min(c[0] for c in candidates), max(c[1] for c in candidates))
            return memo[n]

        result = best_from(header)
        return result if result is not None else ZERO

    def region_outcome_costs(self, cond_idx: int) -> tuple[Ivl | None, Ivl | None] | None:
        """Per-outcome cost of the conditional plus everything to its join
        point, or None when the neighborhood is not a plain fork-join region
        (caller falls back to per-instruction charging).  Infeasible outcomes
        report None in their slot."""
        cfg = self.v.cfg
        bid = self.v.cfg.block_of[cond_idx]
        region = self.region_blocks(cond_idx)
        if region is None:
            return None
        relevant_blocks = set()
        for lp in self.v.relevant_loops:
            relevant_blocks |= lp.body
        if region & relevant_blocks or bid in relevant_blocks:
            return None
        for lp in self.v.loops:
            if (lp.body & region) and not (lp.body <= region):
                return None
        join = self.v.ipdom[bid]
        edges, cost, owner = self._collapsed_view(region, self.v.loops)
        nodes = set(cost)

        memo: dict[int, Ivl | None] = {}
        visiting: set[int] = set()

        def best_from(n: int) -> Ivl | None:
            if n in memo:
                return memo[n]
            if n in visiting:
                return None
            visiting.add(n)
            base = cost[n]
            candidates: list[Ivl] = []
            outgoing = edges[n]
            if not outgoing:
                candidates.append(base)  # halts inside the region
            for target, ecost in outgoing:
                if target == join or target == VIRTUAL_EXIT or target not in nodes:
                    candidates.append(_add(base, ecost))
                    continue
                sub = best_from(target)
                if sub is not None:
                    candidates.append(_add(base, _add(ecost, sub)))
            visiting.discard(n)
            if not candidates:
                memo[n] = None
                return None
            memo[n] = (min(c[0] for c in candidates), max(c[1] for c in candidates))
            return memo[n]

        instr = self.v.program.instructions[cond_idx]
        state = self.v.analysis.before.get(cond_idx)
        taken_ok, nt_ok = branch_outcomes(state, instr)
        results: list[Ivl | None] = [None, None]
        for slot, kind, feasible in (
            (0, "taken", taken_ok),
            (1, "fallthrough", nt_ok),
        ):
            if not feasible:
                continue
            succ = None
            for s, k in cfg.blocks[bid].successors:
                if k == ("taken" if kind == "taken" else "fallthrough"):
                    succ = s
            if succ is None:
                continue
            branch_cost = self._edge_cost(bid, "taken" if kind == "taken" else "fallthrough")
            if succ == join or succ not in nodes:
                results[slot] = branch_cost
            else:
                sub = best_from(succ)
                if sub is None:
                    results[slot] = branch_cost
                else:
                    results[slot] = _add(branch_cost, sub)
        return results[0], results[1]


def _hull_opt(a: Ivl | None, b: Ivl | None) -> Ivl | None:
    if a is None:
        return b
    if b is None:
        return a
    return _hull(a, b)


def _pair_contribution(
    acc_old: "_Accountant",
    acc_new: "_Accountant",
    i: int,
    j: int,
) -> tuple[Ivl, str]:
    """Charge for an equivalence pair: identical text means identical cost
    draws, so only the count difference matters; the difference collapses to
    zero when neither side's count context was touched by the update."""
    instr = acc_old.v.program.instructions[i]
    hull_old = acc_old.cost_hull(i)
    hull_new = acc_new.cost_hull(j)
    point_branch = instr.is_cond_branch and hull_old == hull_new and hull_old[0] == hull_old[1]
    if not instr.is_cond_branch or point_branch:
        if acc_old.coupled(i) and acc_new.coupled(j):
            return ZERO, "paired, execution context untouched"
        dcount = _sub(acc_new.count(j), acc_old.count(i))
        cycles = _mul(hull_old, dcount)
        return cycles, (
            f"paired, count {acc_old.count(i)} -> {acc_new.count(j)} x cost {hull_old}"
        )
    old_term = _mul(acc_old.count(i), hull_old)
    new_term = _mul(acc_new.count(j), hull_new)
    return _sub(new_term, old_term), (
        f"paired conditional, outcome costs {hull_old} x {acc_old.count(i)} -> "
        f"{hull_new} x {acc_new.count(j)}"
    )


def _single_contribution(acc: "_Accountant", idx: int, sign: int) -> tuple[Ivl, str]:
    count = acc.count(idx)
    hull = acc.cost_hull(idx)
    term = _mul(count, hull)
    if sign < 0:
        return _neg(term), f"removed, count {count} x cost {hull}"
    return term, f"added, count {count} x cost {hull}"


def analyze_update_full(
    old: Program,
    new: Program,
    model: CycleModel | None = None,
    annotations: tuple[BoundAnnotation, ...] = (),
    widen_delay: int = 3,
) -> UpdateArtifacts:
    """Full differential pipeline: diff, slice, categorize, and accumulate
    the signed execution-time-difference interval."""
    model = model or default_cycle_model()
    diff = diff_programs(old, new)
    if not diff.deltas_old and not diff.deltas_new:
        va = _build_version("old", old, set(), annotations, widen_delay)
        vb = _build_version("new", new, set(), annotations, widen_delay)
        delta = TimeDelta(0, 0, (), ())
        return UpdateArtifacts(old=va, new=vb, diff=diff, delta=delta)

    va, vb = _mirrored_slices(old, new, diff, annotations, widen_delay)
    acc_old, acc_new = _Accountant(va, model), _Accountant(vb, model)
    warnings: list[str] = []
    inverse = {j: i for i, j in diff.equivalence.items()}

    contributions: list[Contribution] = []
    handled_old: set[int] = set()
    handled_new: set[int] = set()

    # CatB_a regions: a sliced non-loop conditional and the code it guards
    # are charged through per-outcome path hulls so equal-cost forks cancel.
    def loop_member(acc: _Accountant, idx: int) -> bool:
        bid = acc.v.cfg.block_of[idx]
        return any(bid in lp.body for lp in acc.v.relevant_loops)

    region_conds: list[tuple[int | None, int | None]] = []
    seen_new_conds: set[int] = set()
    for i in sorted(va.slice.conditionals):
        if categorize_instruction(va.cfg, va.loops, i) is not Category.CAT_B_A:
            continue
        if loop_member(acc_old, i):
            continue
        j = diff.equivalence.get(i)
        if j is not None and (
            j not in vb.slice.indices
            or categorize_instruction(vb.cfg, vb.loops, j) is not Category.CAT_B_A
            or loop_member(acc_new, j)
        ):
            j = None
        region_conds.append((i, j))
        if j is not None:
            seen_new_conds.add(j)
    for j in sorted(vb.slice.conditionals):
        if j in seen_new_conds:
            continue
        if categorize_instruction(vb.cfg, vb.loops, j) is not Category.CAT_B_A:
            continue
        if loop_member(acc_new, j):
            continue
        if inverse.get(j) is not None and inverse[j] in {c for c, _ in region_conds}:
            continue
        region_conds.append((None, j))

    region_claimed_old: set[int] = set()
    region_claimed_new: set[int] = set()

    def region_instrs(acc: _Accountant, cond: int) -> set[int] | None:
        blocks = acc.region_blocks(cond)
        if blocks is None:
            return None
        instrs = {cond}
        for b in blocks:
            instrs.update(acc.v.cfg.blocks[b].instructions)
        return instrs

    for i, j in region_conds:
        if i is not None and i in region_claimed_old:
            continue
        if j is not None and j in region_claimed_new:
            continue
        costs_old = acc_old.region_outcome_costs(i) if i is not None else None
        costs_new = acc_new.region_outcome_costs(j) if j is not None else None
        if i is not None and costs_old is None:
            continue  # fall back to per-instruction charging
        if j is not None and costs_new is None:
            continue
        members_old = region_instrs(acc_old, i) if i is not None else set()
        members_new = region_instrs(acc_new, j) if j is not None else set()
        hull_old = _hull_opt(*costs_old) if costs_old else None
        hull_new = _hull_opt(*costs_new) if costs_new else None

        dom = compare_domains(
            va.analysis.before.get(i) if i is not None else None,
            vb.analysis.before.get(j) if j is not None else None,
            old.instructions[i] if i is not None else None,
            new.instructions[j] if j is not None else None,
        )
        if dom.relation == "incomparable" and i is not None and j is not None:
            warnings.append(
                f"incomparable branch domains at old:{i}/new:{j}; "
                "charging the full both-path interval"
            )

        if i is not None and j is not None:
            if hull_old is None or hull_new is None:
                continue
            if acc_old.coupled(i) and acc_new.coupled(j):
                shared = _hull(acc_old.count(i), acc_new.count(j))
                cycles = _mul(shared, _sub(hull_new, hull_old))
                note = f"count {shared} x path costs {hull_old} -> {hull_new}"
            else:
                cycles = _sub(
                    _mul(acc_new.count(j), hull_new), _mul(acc_old.count(i), hull_old)
                )
                note = (
                    f"path costs {hull_old} x {acc_old.count(i)} -> "
                    f"{hull_new} x {acc_new.count(j)}"
                )
            version = "both"
        elif i is not None:
            if hull_old is None:
                continue
            cycles = _neg(_mul(acc_old.count(i), hull_old))
            note = f"removed conditional, count {acc_old.count(i)} x paths {hull_old}"
            version = "old"
        else:
            if hull_new is None:
                continue
            cycles = _mul(acc_new.count(j), hull_new)
            note = f"added conditional, count {acc_new.count(j)} x paths {hull_new}"
            version = "new"
        contributions.append(
            Contribution(
                version=version,
                instruction=(i, j),
                category=Category.CAT_B_A,
                cycles=cycles,
                explanation=f"branch domains {dom.relation}; {note}",
            )
        )
        region_claimed_old |= members_old
        region_claimed_new |= members_new
        handled_old |= members_old
        handled_new |= members_new

    # Loop groups: every instruction inside a bound-relevant loop, charged
    # per instruction and aggregated per matched loop pair.
    def loop_conditionals(acc: _Accountant, lp: LoopInfo) -> set[int]:
        conds = set(loop_exit_branches(acc.v.cfg, lp))
        for t in lp.back_edges:
            last = acc.v.cfg.blocks[t].last
            if acc.v.program.instructions[last].is_cond_branch:
                conds.add(last)
        return conds

    matched: list[tuple[LoopInfo | None, LoopInfo | None]] = []
    used_new_loops: set[int] = set()
    for lp in va.relevant_loops:
        twin = None
        for e in sorted(loop_conditionals(acc_old, lp)):
            je = diff.equivalence.get(e)
            if je is None:
                continue
            for ln in vb.relevant_loops:
                if ln.header in used_new_loops:
                    continue
                if je in loop_conditionals(acc_new, ln):
                    twin = ln
                    break
            if twin is not None:
                break
        if twin is not None:
            used_new_loops.add(twin.header)
        matched.append((lp, twin))
    for ln in vb.relevant_loops:
        if ln.header not in used_new_loops:
            matched.append((None, ln))

    def innermost_relevant(acc: _Accountant, idx: int) -> LoopInfo | None:
        bid = acc.v.cfg.block_of[idx]
        best = None
        for lp in acc.v.relevant_loops:
            if bid in lp.body and (best is None or len(lp.body) < len(best.body)):
                best = lp
        return best

    for lp_old, lp_new in matched:
        cycles = ZERO
        members_old = sorted(
            idx
            for idx in va.slice.indices
            if idx not in handled_old
            and lp_old is not None
            and innermost_relevant(acc_old, idx) is lp_old
        )
        members_new = sorted(
            idx
            for idx in vb.slice.indices
            if idx not in handled_new
            and lp_new is not None
            and innermost_relevant(acc_new, idx) is lp_new
        )
        if not members_old and not members_new:
            continue
        total_old, total_new = ZERO, ZERO
        for i in members_old:
            total_old = _add(total_old, _mul(acc_old.count(i), acc_old.cost_hull(i)))
        for j in members_new:
            total_new = _add(total_new, _mul(acc_new.count(j), acc_new.cost_hull(j)))
        members_new_pending = set(members_new)
        for i in members_old:
            j = diff.equivalence.get(i)
            if j is not None and j in members_new_pending and j not in handled_new:
                c, _note = _pair_contribution(acc_old, acc_new, i, j)
                handled_new.add(j)
                members_new_pending.discard(j)
            else:
                c, _note = _single_contribution(acc_old, i, -1)
            handled_old.add(i)
            cycles = _add(cycles, c)
        for j in sorted(members_new_pending):
            if j in handled_new:
                continue
            i = inverse.get(j)
            if i is not None and i not in handled_old and i in va.slice.indices:
                c, _note = _pair_contribution(acc_old, acc_new, i, j)
                handled_old.add(i)
            else:
                c, _note = _single_contribution(acc_new, j, +1)
            handled_new.add(j)
            cycles = _add(cycles, c)
        bound_old = lp_old.bound if lp_old is not None else (0, 0)
        bound_new = lp_new.bound if lp_new is not None else (0, 0)
        head_old = (
            acc_old.v.cfg.blocks[lp_old.header].last if lp_old is not None else None
        )
        head_new = (
            acc_new.v.cfg.blocks[lp_new.header].last if lp_new is not None else None
        )
        contributions.append(
            Contribution(
                version="both" if lp_old and lp_new else ("old" if lp_old else "new"),
                instruction=(head_old, head_new),
                category=Category.CAT_B_B,
                cycles=cycles,
                explanation=(
                    f"loop iterations {bound_old} -> {bound_new}; "
                    f"body cycles {total_old} -> {total_new}"
                ),
            )
        )

    # Everything left: plain per-instruction charges.
    for i in sorted(va.slice.indices - handled_old):
        j = diff.equivalence.get(i)
        if j is not None and j in vb.slice.indices and j not in handled_new:
            cycles, note = _pair_contribution(acc_old, acc_new, i, j)
            handled_new.add(j)
            version = "both"
        else:
            cycles, note = _single_contribution(acc_old, i, -1)
            version = "old"
            j = None
        handled_old.add(i)
        if cycles == ZERO and version == "both" and "untouched" in note:
            continue  # unchanged context: keep the report readable
        contributions.append(
            Contribution(
                version=version,
                instruction=(i, j),
                category=categorize_instruction(va.cfg, va.loops, i),
                cycles=cycles,
                explanation=note,
            )
        )
    for j in sorted(vb.slice.indices - handled_new):
        cycles, note = _single_contribution(acc_new, j, +1)
        handled_new.add(j)
        contributions.append(
            Contribution(
                version="new",
                instruction=(None, j),
                category=categorize_instruction(vb.cfg, vb.loops, j),
                cycles=cycles,
                explanation=note,
            )
        )

    optimistic = sum(c.cycles[0] for c in contributions)
    pessimistic = sum(c.cycles[1] for c in contributions)
    delta = TimeDelta(
        optimistic=optimistic,
        pessimistic=pessimistic,
        contributions=tuple(contributions),
        warnings=tuple(warnings),
    )
    return UpdateArtifacts(old=va, new=vb, diff=diff, delta=delta)


def analyze_update(
    old: Program,
    new: Program,
    model: CycleModel | None = None,
    annotations: tuple[BoundAnnotation, ...] = (),
) -> TimeDelta:
    return analyze_update_full(old, new, model, annotations).delta
