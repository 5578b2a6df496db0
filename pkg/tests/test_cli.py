import json

import pytest

from retadiff.cli import main
from tests.conftest import FIXTURES


def fx(name):
    return str(FIXTURES / name)


OLD = fx("multiply_fix_old.asm")
NEW = fx("multiply_fix_new.asm")
MODEL = fx("uniform_branch.model")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_text(capsys):
    code, out, _ = run(capsys, "analyze", OLD, NEW, "--model", MODEL)
    assert code == 0
    assert "optimistic -1360, pessimistic -1360" in out


def test_analyze_identical_files(capsys):
    code, out, _ = run(capsys, "analyze", OLD, OLD)
    assert code == 0
    assert "optimistic 0, pessimistic 0" in out


def test_analyze_json_schema(capsys):
    code, out, _ = run(capsys, "analyze", OLD, NEW, "--model", MODEL, "--format", "json")
    assert code == 0
    report = json.loads(out)
    assert report["optimistic"] == -1360
    assert report["pessimistic"] == -1360
    assert {"category", "version", "old_index", "new_index", "min_delta", "max_delta", "explanation"} <= set(
        report["contributions"][0]
    )
    assert isinstance(report["warnings"], list)


def test_reports_are_reproducible(capsys):
    _, first, _ = run(capsys, "analyze", OLD, NEW, "--model", MODEL, "--format", "json")
    _, second, _ = run(capsys, "analyze", OLD, NEW, "--model", MODEL, "--format", "json")
    assert first == second


def test_budget_gate(capsys):
    code, _, err = run(
        capsys, "analyze", fx("bubble_sorted.asm"), fx("insertion_sorted.asm"),
        "--model", MODEL, "--budget", "100",
    )
    assert code == 3
    assert "budget exceeded" in err
    code, _, _ = run(
        capsys, "analyze", fx("bubble_sorted.asm"), fx("insertion_sorted.asm"),
        "--model", MODEL, "--budget", "100000",
    )
    assert code == 0


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.asm"
    bad.write_text(" frobnicate r0\n halt\n")
    code, _, err = run(capsys, "analyze", str(bad), NEW)
    assert code == 1
    assert "error" in err


def test_unbounded_loop_exit_code(tmp_path, capsys):
    src = "main: movi r4, #0\nlp: ldr r4, [r7, #0]\n cmp r4, #5\n blt lp\n halt\n"
    a = tmp_path / "a.asm"
    b = tmp_path / "b.asm"
    a.write_text(src)
    b.write_text(src.replace("#5", "#6"))
    code, _, err = run(capsys, "analyze", str(a), str(b))
    assert code == 2
    assert "lp" in err
    assert ".bound" in err


def test_diff_listing(capsys):
    code, out, _ = run(capsys, "diff", OLD, NEW)
    assert code == 0
    lines = out.splitlines()
    assert any(ln.startswith("- add r0, r0, #10") for ln in lines)
    assert any(ln.startswith("+ mul r0, r0, #10") for ln in lines)
    assert sum(ln.startswith("= ") for ln in lines) == 23


def test_slice_listing(capsys):
    code, out, _ = run(capsys, "slice", OLD, NEW, "--version", "old")
    assert code == 0
    assert "; main: push" in out or ";     push" in out.replace("main: ", "")
    assert any(
        ln.strip().startswith("add r0, r0, #10") for ln in out.splitlines()
    )


def test_cfg_text_and_dot(capsys):
    code, out, _ = run(capsys, "cfg", OLD)
    assert code == 0
    assert "loop at 'loop'" in out
    code, out, _ = run(capsys, "cfg", OLD, "--dot")
    assert code == 0
    assert out.startswith("digraph")


def test_absint_table(capsys):
    code, out, _ = run(capsys, "absint", fx("fig1_loop.asm"))
    assert code == 0
    assert "bound (5, 5)" in out


def test_simulate_flags(capsys):
    code, out, _ = run(
        capsys, "simulate", fx("io_loop_old.asm"),
        "--io", "count=3", "--policy", "max", "--counts",
    )
    assert code == 0
    assert "total cycles:" in out
    code, out, _ = run(
        capsys, "simulate", fx("fig1_loop.asm"), "--input", "r1=5", "--trace"
    )
    assert code == 0
    assert "movi r0, #0" in out


def test_wcet_single_program(capsys):
    code, out, _ = run(capsys, "wcet", fx("fig1_loop.asm"))
    assert code == 0
    assert "wcet:" in out


def test_wcet_composition(capsys):
    code, out, _ = run(
        capsys, "wcet", OLD, NEW, "--model", MODEL, "--measure", "--baseline"
    )
    assert code == 0
    assert "measured old wcet: 1543" in out
    assert "composed new wcet: [183, 183]" in out
    assert "baseline" in out


def test_wcet_with_given_old(capsys):
    code, out, _ = run(capsys, "wcet", OLD, NEW, "--model", MODEL, "--old-wcet", "10000")
    assert code == 0
    assert "[8640, 8640]" in out


def test_complexity_output(capsys):
    code, out, _ = run(capsys, "complexity", OLD, NEW, "--model", MODEL, "--format", "json")
    assert code == 0
    rep = json.loads(out)
    assert rep["cc_differential"] < rep["cc_full"]
    assert rep["cc_differential"] == 4 * (rep["A"] + rep["B"]) + 3 * rep["D"] + 3 * rep["F"] + 5 * rep["G"]
