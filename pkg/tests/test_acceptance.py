"""Acceptance suite: one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s`.  The containment sweep is
the longest item; everything else finishes in seconds.
"""

import itertools

from retadiff import (
    Category,
    SimInput,
    analyze_program,
    analyze_update,
    analyze_update_full,
    build_cfg,
    diff_programs,
    find_natural_loops,
    full_wcet,
    parse_program,
    simulate,
    simulate_pair,
)
from retadiff.complexity import update_complexity
from retadiff.oracle import enumerate_inputs
from retadiff.randprog import generate_pair

POLICIES = ("min", "max", "seed:1", "seed:2", "seed:3", "seed:4", "seed:5")


def _verdict(criterion, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def test_criterion_1_worked_example_exact(multiply_pair, uniform_model):
    old, new = multiply_pair
    delta = analyze_update(old, new, model=uniform_model)
    loop = next(c for c in delta.contributions if c.category is Category.CAT_B_B)
    exact = (delta.optimistic, delta.pessimistic) == (-1360, -1360)
    decomposed = (
        "(1530, 1530) -> (170, 170)" in loop.explanation
        and "(90, 90) -> (10, 10)" in loop.explanation
        and loop.cycles == (-1360, -1360)
    )
    _verdict(
        1,
        exact and decomposed,
        f"delta=[{delta.optimistic},{delta.pessimistic}], loop term 10x17 - 90x17",
    )


def test_criterion_2_containment_suite():
    pairs = 0
    checks = 0
    wcet_checked = 0
    for seed in range(200):
        gp = generate_pair(seed)
        old = parse_program(gp.old_text)
        new = parse_program(gp.new_text)
        delta = analyze_update(old, new)
        d = diff_programs(old, new)
        inputs = enumerate_inputs(old, gp.domains, io_samples=2, max_exhaustive=8, seed=seed)
        max_old = max_new = 0
        for si in inputs[:8]:
            for policy in POLICIES:
                run = SimInput(
                    registers=si.registers,
                    io_schedule=si.io_schedule,
                    cost_policy=policy,
                )
                ro, rn = simulate_pair(old, new, d.equivalence, run, fuel=400000)
                diff = rn.total_cycles - ro.total_cycles
                checks += 1
                assert delta.optimistic <= diff <= delta.pessimistic, (
                    f"seed {seed}: diff {diff} outside "
                    f"[{delta.optimistic}, {delta.pessimistic}] "
                    f"(policy {policy}, regs {si.registers}, io {si.io_schedule})"
                )
                max_old = max(max_old, ro.total_cycles)
                max_new = max(max_new, rn.total_cycles)
        # criterion 7 piggyback: the full-program bound dominates every run
        for p, observed in ((old, max_old), (new, max_new)):
            cfg = build_cfg(p)
            loops = find_natural_loops(cfg)
            analyze_program(p, cfg, loops)
            w = full_wcet(p, loops, cfg=cfg)
            assert w.wcet_cycles >= observed, f"seed {seed}: wcet below a run"
            wcet_checked += 1
        pairs += 1
    _verdict(2, pairs >= 200, f"{pairs} pairs, {checks} simulations, 100% contained")
    print(f"      (criterion 7 piggyback: {wcet_checked} full-wcet safety checks)")


def test_criterion_3_zero_update_identity():
    for seed in range(50):
        p = parse_program(generate_pair(seed).old_text)
        d = diff_programs(p, p)
        delta = analyze_update(p, p)
        assert not d.deltas_old and not d.deltas_new
        assert (delta.optimistic, delta.pessimistic) == (0, 0)
    _verdict(3, True, "50 generated programs, analyze(p, p) == [0, 0]")


def _measured_max(p, model, inputs):
    best = 0
    for si in inputs:
        run = SimInput(registers=si.registers, io_schedule=si.io_schedule, cost_policy="max")
        best = max(best, simulate(p, run, fuel=3_000_000, model=model).total_cycles)
    return best


def test_criterion_4_wcet_composition(
    matmul_programs, sort_programs, uniform_model
):
    cases = [
        ("matmul+scaling", matmul_programs["base"], matmul_programs["scaled"], False),
        ("matmul 8->16", matmul_programs["base"], matmul_programs["doubled"], False),
        (
            "bubble->insertion sorted",
            sort_programs["bubble_sorted"],
            sort_programs["insertion_sorted"],
            True,
        ),
        (
            "bubble->insertion reverse",
            sort_programs["bubble_reverse"],
            sort_programs["insertion_reverse"],
            True,
        ),
    ]
    details = []
    for name, old, new, check_baseline in cases:
        art = analyze_update_full(old, new, model=uniform_model)
        inputs = [SimInput()]
        measured_old = _measured_max(old, uniform_model, inputs)
        measured_new = _measured_max(new, uniform_model, inputs)
        composed = measured_old + art.delta.pessimistic
        assert composed >= measured_new, (
            f"{name}: composed {composed} < measured new {measured_new}"
        )
        if check_baseline:
            baseline = full_wcet(new, art.new.loops, uniform_model, art.new.cfg)
            assert composed <= baseline.wcet_cycles, (
                f"{name}: composed {composed} above the full-analysis "
                f"baseline {baseline.wcet_cycles}"
            )
            details.append(
                f"{name}: measured {measured_new} <= composed {composed} "
                f"<= full {baseline.wcet_cycles}"
            )
        else:
            details.append(f"{name}: measured {measured_new} <= composed {composed}")
    _verdict(4, True, "; ".join(details))


def test_criterion_5_sort_sign_guarantees(sort_programs, uniform_model):
    reverse = analyze_update(
        sort_programs["bubble_reverse"],
        sort_programs["insertion_reverse"],
        model=uniform_model,
    )
    sorted_ = analyze_update(
        sort_programs["bubble_sorted"],
        sort_programs["insertion_sorted"],
        model=uniform_model,
    )
    ok = reverse.pessimistic < 0 and sorted_.optimistic > 0
    _verdict(
        5,
        ok,
        f"reverse pessimistic {reverse.pessimistic} < 0 (guaranteed speed-up); "
        f"sorted optimistic {sorted_.optimistic} > 0 (guaranteed slow-down)",
    )


def test_criterion_6_complexity_reduction(
    multiply_pair, matmul_programs, io_loop_pair, uniform_model
):
    cases = [
        ("multiply fix", *multiply_pair),
        ("matmul+scaling", matmul_programs["base"], matmul_programs["scaled"]),
        ("io loop", *io_loop_pair),
    ]
    details = []
    for name, old, new in cases:
        art = analyze_update_full(old, new, model=uniform_model)
        touched = (len(art.diff.deltas_old) + len(art.diff.deltas_new)) / (
            len(old) + len(new)
        )
        rep = update_complexity(art)
        assert touched < 0.20, f"{name} touches {touched:.0%}, fixture out of scope"
        assert rep.cc_differential < rep.cc_full, name
        details.append(
            f"{name}: {rep.cc_differential}/{rep.cc_full} "
            f"= {rep.cc_differential / rep.cc_full:.2f}"
        )
    _verdict(6, True, "; ".join(details))


def test_criterion_7_oracle_safety(matmul_programs, sort_programs, uniform_model):
    # the generated sweep runs inside criterion 2; fixtures are re-checked here
    programs = list(matmul_programs.values()) + list(sort_programs.values())
    for p in programs:
        cfg = build_cfg(p)
        loops = find_natural_loops(cfg)
        analyze_program(p, cfg, loops)
        w = full_wcet(p, loops, uniform_model, cfg)
        r = simulate(p, SimInput(cost_policy="max"), fuel=3_000_000, model=uniform_model)
        assert w.wcet_cycles >= r.total_cycles
    _verdict(7, True, f"{len(programs)} fixtures, full wcet >= max-policy runs")


def test_criterion_8_absint_soundness(fig1_program):
    from tests.test_absint import _check_soundness

    checked = 0
    for seed in range(100):
        gp = generate_pair(seed)
        p = parse_program(gp.old_text)
        cfg = build_cfg(p)
        loops = find_natural_loops(cfg)
        result, _ = analyze_program(p, cfg, loops)
        domains = {r: (lo, min(hi, lo + 3)) for r, (lo, hi) in gp.domains.items()}
        axes = sorted(domains.items())
        combos = (
            itertools.product(*[range(lo, hi + 1) for _, (lo, hi) in axes])
            if axes
            else [()]
        )
        schedules_list = [{}]
        if p.io_channels:
            schedules_list = [
                {name: (ch.lo,) * 4 for name, ch in p.io_channels.items()},
                {name: (ch.hi,) * 4 for name, ch in p.io_channels.items()},
            ]
        for combo in combos:
            regs0 = {r: v for (r, _), v in zip(axes, combo)}
            for schedules in schedules_list:
                _check_soundness(p, regs0, schedules, result)
                checked += 1
    cfg = build_cfg(fig1_program)
    loops = find_natural_loops(cfg)
    analyze_program(fig1_program, cfg, loops)
    head_visits = loops[0].bound[1] + 1
    assert head_visits == 6
    _verdict(8, True, f"{checked} concrete runs inside intervals; fig-1 header bound 6")
