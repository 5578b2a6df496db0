from functools import lru_cache

from hypothesis import given, settings
from hypothesis import strategies as st

from retadiff import diff_programs, parse_program
from retadiff.differ import format_diff, normalize_line, normalized_lines
from retadiff.randprog import generate_pair


def _minimal_unmatched(a, b):
    """Textbook recursive LCS as an independent oracle."""

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + rec(i + 1, j + 1)
        return max(rec(i + 1, j), rec(i, j + 1))

    return len(a) + len(b) - 2 * rec(0, 0)


def test_identity_diff(multiply_pair):
    old, _ = multiply_pair
    d = diff_programs(old, old)
    assert not d.deltas_old and not d.deltas_new
    assert d.equivalence == {i: i for i in range(len(old))}


def test_worked_example_single_delta(multiply_pair):
    old, new = multiply_pair
    d = diff_programs(old, new)
    assert d.deltas_old == {5}
    assert d.deltas_new == {5}
    assert d.equivalence == {i: i for i in range(len(old)) if i != 5}


def test_inserted_nop():
    old = parse_program(" movi r0, #1\n add r0, r0, #2\n halt")
    new = parse_program(" movi r0, #1\n nop\n add r0, r0, #2\n halt")
    d = diff_programs(old, new)
    assert d.deltas_old == frozenset()
    assert d.deltas_new == {1}
    a, b = normalized_lines(old), normalized_lines(new)
    assert len(d.deltas_old) + len(d.deltas_new) == _minimal_unmatched(tuple(a), tuple(b))


def test_label_renaming_is_invisible():
    old = parse_program("loop: add r0, r0, #1\n cmp r0, #3\n blt loop\n halt")
    new = parse_program("loop2: add r0, r0, #1\n cmp r0, #3\n blt loop2\n halt")
    assert normalize_line(old, 2) == normalize_line(new, 2)
    d = diff_programs(old, new)
    assert not d.deltas_old and not d.deltas_new


def test_structurally_different_targets_differ():
    a = parse_program(" b x\nx: movi r0, #1\n halt")
    b = parse_program(" b x\nx: movi r0, #2\n halt")
    assert normalize_line(a, 0) != normalize_line(b, 0)


def test_formatting_canonicalization():
    p = parse_program(" add r0, r0, r1\n halt")
    assert normalize_line(p, 0) == "ADD r0,r0,r1"


def test_changed_io_declaration_makes_delta():
    old = parse_program(".io s 1 1 r0 0 3\n io s\n halt")
    new = parse_program(".io s 2 6 r0 0 3\n io s\n halt")
    d = diff_programs(old, new)
    assert d.deltas_old == {0} and d.deltas_new == {0}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 20000))
def test_symmetry(seed):
    gp = generate_pair(seed)
    old = parse_program(gp.old_text)
    new = parse_program(gp.new_text)
    fwd = diff_programs(old, new)
    rev = diff_programs(new, old)
    assert fwd.deltas_old == rev.deltas_new
    assert fwd.deltas_new == rev.deltas_old
    assert {j: i for i, j in rev.equivalence.items()} == fwd.equivalence


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 20000))
def test_minimality_against_recursive_oracle(seed):
    gp = generate_pair(seed)
    old = parse_program(gp.old_text)
    new = parse_program(gp.new_text)
    d = diff_programs(old, new)
    a, b = tuple(normalized_lines(old)), tuple(normalized_lines(new))
    assert len(d.deltas_old) + len(d.deltas_new) == _minimal_unmatched(a, b)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 20000))
def test_equivalence_pairs_have_equal_normal_forms(seed):
    gp = generate_pair(seed)
    old = parse_program(gp.old_text)
    new = parse_program(gp.new_text)
    d = diff_programs(old, new)
    nl_old, nl_new = normalized_lines(old), normalized_lines(new)
    for i, j in d.equivalence.items():
        assert nl_old[i] == nl_new[j]


def test_format_diff_tags(multiply_pair):
    old, new = multiply_pair
    text = format_diff(old, new)
    lines = text.splitlines()
    assert sum(1 for ln in lines if ln.startswith("- ")) == 1
    assert sum(1 for ln in lines if ln.startswith("+ ")) == 1
    assert sum(1 for ln in lines if ln.startswith("= ")) == 23
