import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retadiff import (
    SimInput,
    UnboundedLoop,
    analyze_program,
    build_cfg,
    diff_programs,
    find_natural_loops,
    full_wcet,
    parse_program,
    simulate,
    simulate_pair,
)
from retadiff.oracle import DivisionByZero, FuelExhausted, IoScheduleInvalid
from retadiff.randprog import generate_pair


def test_single_instruction_cycle():
    p = parse_program(" movi r0, #0\n halt")
    r = simulate(p, SimInput(cost_policy="min"))
    assert r.total_cycles == 1


def test_worked_example_loop_runs_ninety_times(multiply_pair, uniform_model):
    old, _ = multiply_pair
    for policy in ("min", "max", "seed:1"):
        r = simulate(old, SimInput(cost_policy=policy), model=uniform_model)
        assert r.counts[3] == 90  # first loop-body instruction


def test_paired_diff_is_minus_1360_for_all_policies(multiply_pair, uniform_model):
    old, new = multiply_pair
    d = diff_programs(old, new)
    for policy in ("min", "max", "seed:1", "seed:2", "seed:3"):
        ro, rn = simulate_pair(
            old, new, d.equivalence, SimInput(cost_policy=policy), model=uniform_model
        )
        assert rn.total_cycles - ro.total_cycles == -1360


def test_simulator_determinism(multiply_pair):
    old, _ = multiply_pair
    si = SimInput(cost_policy="seed:42")
    assert simulate(old, si) == simulate(old, si)


def test_trace_totals_match():
    p = parse_program(" movi r0, #0\n add r0, r0, #3\n halt")
    r = simulate(p, SimInput(cost_policy="max"), trace=True)
    assert sum(c for _, _, c in r.trace) == r.total_cycles
    assert [i for i, _, _ in r.trace] == [0, 1, 2]


def test_fuel_exhausted():
    p = parse_program("spin: b spin\n halt")
    with pytest.raises(FuelExhausted):
        simulate(p, SimInput(), fuel=100)


def test_division_by_zero():
    p = parse_program(" movi r0, #0\n sdiv r1, r1, r0\n halt")
    with pytest.raises(DivisionByZero):
        simulate(p, SimInput())


def test_io_schedule_validation():
    p = parse_program(".io s 1 1 r0 0 3\n io s\n halt")
    with pytest.raises(IoScheduleInvalid):
        simulate(p, SimInput(io_schedule={"s": (9,)}))
    with pytest.raises(IoScheduleInvalid):
        simulate(p, SimInput(io_schedule={"nope": (1,)}))
    # exhausted schedules repeat the last value
    p2 = parse_program(
        ".io s 1 1 r0 0 3\n io s\n mov r1, r0\n io s\n add r1, r1, r0\n halt"
    )
    r = simulate(p2, SimInput(io_schedule={"s": (2,)}))
    assert r.registers[1] == 4


def test_memory_wraps_and_starts_zero():
    p = parse_program(
        " movi r0, #4099\n str r0, [r0, #0]\n ldr r1, [r7, #3]\n halt"
    )
    r = simulate(p, SimInput())
    assert r.registers[1] == 4099  # 4099 % 4096 == 3


def test_pop_on_empty_stack_loads_zero():
    p = parse_program(" movi r1, #9\n pop {r1}\n halt")
    r = simulate(p, SimInput())
    assert r.registers[1] == 0


def _wcet_of(p, annotations=()):
    cfg = build_cfg(p)
    loops = find_natural_loops(cfg)
    analyze_program(p, cfg, loops, annotations=annotations)
    return full_wcet(p, loops, cfg=cfg)


def test_full_wcet_straight_line():
    p = parse_program(" movi r0, #1\n add r0, r0, #1\n nop\n halt")
    assert _wcet_of(p).wcet_cycles == 3


def test_full_wcet_fig1_charge(fig1_program):
    # bound 5: the test node is charged 6 times, the body 5 times, at
    # worst-case branch costs (taken max 4 under the default model)
    w = _wcet_of(fig1_program)
    node1 = 1 + 4  # cmp + branch at hull max
    node2 = 1 + 4  # add + unconditional b at taken max
    init = 1
    halt = 0
    assert w.wcet_cycles == init + 5 * (node1 + node2) + node1 + halt


def test_full_wcet_requires_bounds():
    p = parse_program(
        "main: movi r4, #0\nlp: ldr r4, [r7, #0]\n cmp r4, #5\n blt lp\n halt\n"
    )
    cfg = build_cfg(p)
    loops = find_natural_loops(cfg)
    analyze_program(p, cfg, loops)
    with pytest.raises(UnboundedLoop) as exc:
        full_wcet(p, loops, cfg=cfg)
    assert "lp" in str(exc.value)


def test_full_wcet_dominates_simulation_on_sorts(sort_programs, uniform_model):
    for name, p in sort_programs.items():
        cfg = build_cfg(p)
        loops = find_natural_loops(cfg)
        analyze_program(p, cfg, loops)
        w = full_wcet(p, loops, uniform_model, cfg)
        r = simulate(p, SimInput(cost_policy="max"), model=uniform_model, fuel=2_000_000)
        assert w.wcet_cycles >= r.total_cycles, name


def test_full_wcet_strictly_greater_when_paths_alternate(sort_programs, uniform_model):
    # bubble on a sorted array never swaps, the analyzer assumes it might
    p = sort_programs["bubble_sorted"]
    cfg = build_cfg(p)
    loops = find_natural_loops(cfg)
    analyze_program(p, cfg, loops)
    w = full_wcet(p, loops, uniform_model, cfg)
    r = simulate(p, SimInput(cost_policy="max"), model=uniform_model, fuel=2_000_000)
    assert w.wcet_cycles > r.total_cycles


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 30000), st.sampled_from(["min", "max", "seed:5"]))
def test_full_wcet_safety_generated(seed, policy):
    gp = generate_pair(seed)
    p = parse_program(gp.old_text)
    cfg = build_cfg(p)
    loops = find_natural_loops(cfg)
    analyze_program(p, cfg, loops)
    w = full_wcet(p, loops, cfg=cfg)
    regs = {r: hi for r, (lo, hi) in gp.domains.items()}
    io = {name: (ch.hi,) * 4 for name, ch in p.io_channels.items()}
    r = simulate(p, SimInput(registers=regs, io_schedule=io, cost_policy=policy), fuel=400000)
    assert w.wcet_cycles >= r.total_cycles


def test_seeded_pair_diff_stable_across_seeds(multiply_pair, uniform_model):
    # every sliced instruction has a point cost under the uniform model, so
    # the paired diff cannot depend on the seed
    old, new = multiply_pair
    d = diff_programs(old, new)
    diffs = set()
    for seed in range(5):
        ro, rn = simulate_pair(
            old, new, d.equivalence, SimInput(cost_policy=f"seed:{seed}"), model=uniform_model
        )
        diffs.add(rn.total_cycles - ro.total_cycles)
    assert diffs == {-1360}
