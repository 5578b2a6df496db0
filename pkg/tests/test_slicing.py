import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retadiff import (
    SimInput,
    build_cfg,
    build_dependence_graph,
    backward_slice,
    combined_slice,
    diff_programs,
    forward_slice,
    parse_program,
    simulate_pair,
)
from retadiff.slicing import NotAConditional, format_slice
from retadiff.randprog import generate_pair


def _graph_for(p):
    return build_dependence_graph(p, build_cfg(p))


def test_forward_slice_worked_example(multiply_pair):
    old, _ = multiply_pair
    dg = _graph_for(old)
    s = forward_slice(old, dg, {5})
    # the recomputation of r3 and both compare/branch pairs join the slice
    assert 15 in s.indices  # mov r3, r0
    assert {13, 14, 17, 18} <= s.indices
    assert {14, 18} <= s.conditionals


def test_forward_slice_dead_write():
    p = parse_program(" movi r0, #1\n movi r6, #5\n halt")
    dg = _graph_for(p)
    s = forward_slice(p, dg, {1})
    assert s.indices == {1}


def test_backward_slice_excludes_payload_registers(multiply_pair):
    old, _ = multiply_pair
    dg = _graph_for(old)
    s = backward_slice(old, dg, {14, 18})
    assert {1, 3, 4, 5, 13, 15, 16, 17} <= s.indices
    for i in (8, 11):  # r1 accumulation
        assert i not in s.indices
    for i in (19, 21):  # r5 outcome writes
        assert i not in s.indices


def test_backward_slice_constant_compare():
    p = parse_program(
        " movi r0, #3\n movi r1, #9\n cmp r0, #5\n beq out\n nop\nout: halt"
    )
    dg = _graph_for(p)
    s = backward_slice(p, dg, {3})
    assert s.indices == {0, 2, 3}


def test_backward_slice_rejects_non_conditional():
    p = parse_program(" movi r0, #1\n halt")
    dg = _graph_for(p)
    with pytest.raises(NotAConditional):
        backward_slice(p, dg, {0})


def test_combined_slice_union(multiply_pair):
    old, _ = multiply_pair
    dg = _graph_for(old)
    fwd = forward_slice(old, dg, {5})
    bwd = backward_slice(old, dg, set(fwd.conditionals))
    combined = combined_slice(old, dg, {5})
    assert combined.indices == fwd.indices | bwd.indices


def test_combined_slice_empty_deltas(multiply_pair):
    old, _ = multiply_pair
    dg = _graph_for(old)
    s = combined_slice(old, dg, set())
    assert s.indices == frozenset()


def test_io_fed_loop_bound_pulls_compare_chain(io_loop_pair):
    old, _ = io_loop_pair
    dg = _graph_for(old)
    # a change in the loop body feeds nothing, but a change in the counter
    # increment reaches the loop compare
    inc = next(
        i for i in range(len(old)) if old.instructions[i].text() == "add r1, r1, #1"
    )
    s = combined_slice(old, dg, {inc})
    cmp_idx = next(
        i for i in range(len(old)) if old.instructions[i].text() == "cmp r1, r0"
    )
    io_idx = next(i for i in range(len(old)) if old.instructions[i].opcode.value == "io")
    assert cmp_idx in s.indices
    assert io_idx in s.indices  # limit register feeds the compare


def _closure_oracle(p, dg, criteria, direction):
    """Brute-force transitive closure by repeated single-step expansion."""
    result = set(criteria)
    changed = True
    while changed:
        changed = False
        for i in list(result):
            if direction == "forward":
                step = set(dg.data_out.get(i, ()))
                if p.instructions[i].is_cond_branch:
                    step |= set(dg.control_out.get(i, ()))
            else:
                step = set(dg.data_in.get(i, ()))
            if not step <= result:
                result |= step
                changed = True
    return frozenset(result)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 20000), st.integers(0, 7))
def test_forward_matches_brute_force_closure(seed, pick):
    p = parse_program(generate_pair(seed).old_text)
    dg = _graph_for(p)
    reachable = sorted(build_cfg(p).block_of)
    criteria = {reachable[pick % len(reachable)]}
    s = forward_slice(p, dg, criteria)
    assert s.indices == _closure_oracle(p, dg, criteria, "forward")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 20000), st.integers(0, 7))
def test_backward_matches_brute_force_closure(seed, pick):
    p = parse_program(generate_pair(seed).old_text)
    dg = _graph_for(p)
    conds = [i for i in sorted(build_cfg(p).block_of) if p.instructions[i].is_cond_branch]
    if not conds:
        return
    criteria = {conds[pick % len(conds)]}
    s = backward_slice(p, dg, criteria)
    assert s.indices == _closure_oracle(p, dg, criteria, "backward")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 20000), st.integers(1, 4))
def test_monotonicity_and_idempotence(seed, k):
    p = parse_program(generate_pair(seed).old_text)
    dg = _graph_for(p)
    reachable = sorted(build_cfg(p).block_of)
    rng = random.Random(seed)
    small = set(rng.sample(reachable, min(k, len(reachable))))
    bigger = small | {reachable[0]}
    s_small = forward_slice(p, dg, small)
    s_big = forward_slice(p, dg, bigger)
    assert s_small.indices <= s_big.indices
    again = forward_slice(p, dg, set(s_small.indices))
    assert again.indices == s_small.indices


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 20000))
def test_count_changes_are_sliced(seed):
    """Perturbing one immediate must keep every count-affected instruction
    inside the combined slice (randomized dual simulation)."""
    gp = generate_pair(seed)
    old = parse_program(gp.old_text)
    lines = gp.old_text.splitlines()
    rng = random.Random(seed ^ 0xA5A5)
    candidates = [
        (i, ln)
        for i, ln in enumerate(lines)
        if "movi" in ln and "#" in ln and not ln.lstrip().startswith(".")
    ]
    if not candidates:
        return
    li, line = candidates[rng.randrange(len(candidates))]
    head, _, imm = line.rpartition("#")
    lines[li] = f"{head}#{int(imm) + 3}"
    variant = parse_program("\n".join(lines) + "\n")
    assert len(variant) == len(old)
    delta_idx = next(
        i
        for i in range(len(old))
        if old.instructions[i] != variant.instructions[i]
    )
    dg = _graph_for(old)
    s = combined_slice(old, dg, {delta_idx})
    regs = {r: lo for r, (lo, hi) in gp.domains.items()}
    io = {name: (ch.lo,) * 4 for name, ch in old.io_channels.items()}
    si = SimInput(registers=regs, io_schedule=io, cost_policy="min")
    equiv = {i: i for i in range(len(old))}
    r_old, r_new = simulate_pair(old, variant, equiv, si, fuel=300000)
    for i, (ca, cb) in enumerate(zip(r_old.counts, r_new.counts)):
        if ca != cb:
            assert i in s.indices, f"instruction {i} count changed but not sliced"


def test_format_slice_comments_non_members(multiply_pair):
    old, _ = multiply_pair
    dg = _graph_for(old)
    s = combined_slice(old, dg, {5})
    text = format_slice(old, s)
    lines = text.splitlines()
    assert lines[0].startswith("; ")  # push is outside the slice
    assert not lines[5].startswith("; ")  # the delta itself is inside
