import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retadiff import (
    Category,
    SimInput,
    analyze_update,
    analyze_update_full,
    compose_wcet,
    diff_programs,
    parse_cycle_model,
    parse_program,
    simulate,
    simulate_pair,
)
from retadiff.complexity import update_complexity
from retadiff.oracle import UnboundedLoop, enumerate_inputs
from retadiff.randprog import generate_pair


def test_worked_example_exact(multiply_pair, uniform_model):
    old, new = multiply_pair
    delta = analyze_update(old, new, model=uniform_model)
    assert (delta.optimistic, delta.pessimistic) == (-1360, -1360)
    loop = next(c for c in delta.contributions if c.category is Category.CAT_B_B)
    assert loop.cycles == (-1360, -1360)
    assert "(90, 90) -> (10, 10)" in loop.explanation
    assert "(1530, 1530) -> (170, 170)" in loop.explanation  # 90*17 -> 10*17


def test_worked_example_catBa_cancels(multiply_pair, uniform_model):
    old, new = multiply_pair
    delta = analyze_update(old, new, model=uniform_model)
    cond = next(c for c in delta.contributions if c.category is Category.CAT_B_A)
    assert cond.cycles == (0, 0)
    assert "equal" in cond.explanation


def test_identity_update(multiply_pair):
    old, _ = multiply_pair
    delta = analyze_update(old, old)
    assert (delta.optimistic, delta.pessimistic) == (0, 0)
    assert delta.contributions == ()


def test_inserted_nop_outside_loops():
    old = parse_program(" movi r0, #1\n add r0, r0, #2\n halt")
    new = parse_program(" movi r0, #1\n nop\n add r0, r0, #2\n halt")
    delta = analyze_update(old, new)
    assert (delta.optimistic, delta.pessimistic) == (1, 1)
    only = delta.contributions[0]
    assert only.category is Category.CAT_A
    assert only.version == "new"


def test_deleted_sdiv_inverts_interval():
    old = parse_program(" movi r0, #8\n sdiv r1, r0, #2\n movi r1, #0\n halt")
    new = parse_program(" movi r0, #8\n movi r1, #0\n halt")
    delta = analyze_update(old, new)
    # removing a [2,12]-cycle instruction executed once: min speed-up 2,
    # max speed-up 12
    assert (delta.optimistic, delta.pessimistic) == (-12, -2)


def test_point_cost_straight_line_update_is_exact():
    old = parse_program(" movi r0, #1\n add r0, r0, #2\n str r0, [r7, #0]\n halt")
    new = parse_program(" movi r0, #1\n mul r0, r0, #2\n nop\n str r0, [r7, #0]\n halt")
    delta = analyze_update(old, new)
    d = diff_programs(old, new)
    ro, rn = simulate_pair(old, new, d.equivalence, SimInput(cost_policy="min"))
    sim = rn.total_cycles - ro.total_cycles
    assert delta.optimistic == delta.pessimistic == sim


def test_delete_only_update_sign_coherence():
    old = parse_program(
        " movi r0, #1\n add r0, r0, #2\n nop\n str r0, [r7, #0]\n nop\n halt"
    )
    new = parse_program(" movi r0, #1\n add r0, r0, #2\n str r0, [r7, #0]\n halt")
    delta = analyze_update(old, new)
    assert delta.pessimistic <= 0


def test_appendix_division_path(branch_domain_pair, uniform_model):
    old, new = branch_domain_pair
    d = diff_programs(old, new)
    delta = analyze_update(old, new, model=uniform_model)
    # the division [2,12] replaces the addition [1,1] exactly on the runs
    # where both mode flags are zero
    for policy, expected in (("min", 1), ("max", 11)):
        si = SimInput(cost_policy=policy, io_schedule={"ymode": (0,), "zmode": (0,)})
        ro, rn = simulate_pair(old, new, d.equivalence, si, model=uniform_model)
        assert rn.total_cycles - ro.total_cycles == expected
    assert delta.optimistic <= 1 and delta.pessimistic >= 11
    region = next(
        c
        for c in delta.contributions
        if c.category is Category.CAT_B_A and c.version == "both"
    )
    assert region.cycles == (0, 11)
    assert "less_restrictive" in region.explanation
    # every input combination stays inside the interval
    for y in (0, 1):
        for z in (0, 1):
            for policy in ("min", "max", "seed:9"):
                si = SimInput(
                    cost_policy=policy, io_schedule={"ymode": (y,), "zmode": (z,)}
                )
                ro, rn = simulate_pair(old, new, d.equivalence, si, model=uniform_model)
                diff = rn.total_cycles - ro.total_cycles
                assert delta.optimistic <= diff <= delta.pessimistic


def test_io_bound_loop_body_change(io_loop_pair):
    old, new = io_loop_pair
    ones = parse_cycle_model("BRANCH_TAKEN 1 1\nBRANCH_NOT_TAKEN 1 1")
    delta = analyze_update(old, new, model=ones)
    loop = next(c for c in delta.contributions if c.category is Category.CAT_B_B)
    # per-iteration cost goes 5 -> 6 with the bound interval [0,8] on both
    # sides; the recorded interval must cover every channel value's diff
    assert "(0, 8) -> (0, 8)" in loop.explanation
    assert delta.optimistic == -39 and delta.pessimistic == 49
    d = diff_programs(old, new)
    for v in range(9):
        si = SimInput(cost_policy="min", io_schedule={"count": (v,)})
        ro, rn = simulate_pair(old, new, d.equivalence, si, model=ones)
        assert delta.optimistic <= rn.total_cycles - ro.total_cycles <= delta.pessimistic


def test_matmul_scaling_exact(matmul_programs, uniform_model):
    old, new = matmul_programs["base"], matmul_programs["scaled"]
    delta = analyze_update(old, new, model=uniform_model)
    d = diff_programs(old, new)
    ro, rn = simulate_pair(old, new, d.equivalence, SimInput(cost_policy="min"), model=uniform_model)
    sim = rn.total_cycles - ro.total_cycles
    assert sim == 128  # 64 elements x 2 one-cycle instructions
    assert (delta.optimistic, delta.pessimistic) == (128, 128)


def test_unbounded_loop_refusal():
    old = parse_program(
        "main: movi r4, #0\nlp: ldr r4, [r7, #0]\n cmp r4, #5\n blt lp\n halt\n"
    )
    new = parse_program(
        "main: movi r4, #0\nlp: ldr r4, [r7, #1]\n cmp r4, #5\n blt lp\n halt\n"
    )
    with pytest.raises(UnboundedLoop) as exc:
        analyze_update(old, new)
    assert "lp" in str(exc.value)
    assert ".bound" in str(exc.value)


def test_sum_decomposition(multiply_pair, uniform_model):
    old, new = multiply_pair
    delta = analyze_update(old, new, model=uniform_model)
    assert delta.optimistic == sum(c.cycles[0] for c in delta.contributions)
    assert delta.pessimistic == sum(c.cycles[1] for c in delta.contributions)


def test_compose_wcet():
    class D:
        optimistic = -1360
        pessimistic = -1360

    assert compose_wcet(10000, D) == (8640, 8640)

    class Z:
        optimistic = 0
        pessimistic = 0

    assert compose_wcet(777, Z) == (777, 777)
    with pytest.raises(ValueError):
        compose_wcet(-1, Z)


def test_reverse_composition_contains_original(multiply_pair, uniform_model):
    # subtracting the interval from the new WCET must cover the old WCET
    old, new = multiply_pair
    delta = analyze_update(old, new, model=uniform_model)
    old_wcet = simulate(old, SimInput(cost_policy="max"), model=uniform_model).total_cycles
    new_wcet = simulate(new, SimInput(cost_policy="max"), model=uniform_model).total_cycles
    recovered = (new_wcet - delta.pessimistic, new_wcet - delta.optimistic)
    assert recovered[0] <= old_wcet <= recovered[1]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 30000))
def test_identity_on_generated_programs(seed):
    p = parse_program(generate_pair(seed).old_text)
    delta = analyze_update(p, p)
    assert (delta.optimistic, delta.pessimistic) == (0, 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 30000), st.sampled_from(["min", "max", "seed:3"]))
def test_containment_on_generated_pairs(seed, policy):
    gp = generate_pair(seed)
    old = parse_program(gp.old_text)
    new = parse_program(gp.new_text)
    delta = analyze_update(old, new)
    d = diff_programs(old, new)
    for si in enumerate_inputs(old, gp.domains, io_samples=2, max_exhaustive=6, seed=seed)[:6]:
        run = SimInput(registers=si.registers, io_schedule=si.io_schedule, cost_policy=policy)
        ro, rn = simulate_pair(old, new, d.equivalence, run, fuel=400000)
        diff = rn.total_cycles - ro.total_cycles
        assert delta.optimistic <= diff <= delta.pessimistic


def test_complexity_empty_diff(multiply_pair):
    old, _ = multiply_pair
    art = analyze_update_full(old, old)
    rep = update_complexity(art)
    assert (rep.A, rep.B, rep.D, rep.F, rep.G) == (0, 0, 0, 0, 0)
    assert rep.cc_differential == 0
    assert rep.cc_full > 0
    assert rep.cc_differential == 4 * (rep.A + rep.B) + 3 * rep.D + 3 * rep.F + 5 * rep.G
    assert rep.cc_full == 4 * rep.X + 3 * rep.Y + 5 * rep.Z


def test_complexity_direction_worked_example(multiply_pair, uniform_model):
    old, new = multiply_pair
    art = analyze_update_full(old, new, model=uniform_model)
    rep = update_complexity(art)
    assert rep.cc_differential < rep.cc_full


def test_complexity_reduction_matmul(matmul_programs, uniform_model):
    art = analyze_update_full(
        matmul_programs["base"], matmul_programs["scaled"], model=uniform_model
    )
    rep = update_complexity(art)
    assert rep.cc_differential < rep.cc_full
    # a small localized update keeps the differential cost a fraction of the
    # full cost, the same direction as the published reductions
    assert rep.cc_differential / rep.cc_full < 0.5


def test_complexity_identities_recounted(matmul_programs, uniform_model):
    art = analyze_update_full(
        matmul_programs["base"], matmul_programs["scaled"], model=uniform_model
    )
    rep = update_complexity(art)
    # independent recount of B and D from the diff and the loop bodies
    new = art.new.program
    in_loops = {
        i
        for lp in art.new.loops
        for b in lp.body
        for i in art.new.cfg.blocks[b].instructions
    }
    b_count = len(art.diff.deltas_new & in_loops)
    old_in_loops = {
        i
        for lp in art.old.loops
        for b in lp.body
        for i in art.old.cfg.blocks[b].instructions
    }
    b_count += len(art.diff.deltas_old & old_in_loops)
    d_count = len(art.diff.deltas_new - in_loops) + len(art.diff.deltas_old - old_in_loops)
    assert rep.B == b_count
    assert rep.D == d_count
    assert rep.X == len(in_loops)
    assert rep.Y == len(new) - len(in_loops)
