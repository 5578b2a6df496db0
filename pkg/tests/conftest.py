import pathlib

import pytest

from retadiff import parse_cycle_model, parse_program

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def load(name):
    return parse_program((FIXTURES / f"{name}.asm").read_text())


@pytest.fixture(scope="session")
def uniform_model():
    return parse_cycle_model((FIXTURES / "uniform_branch.model").read_text())


@pytest.fixture(scope="session")
def multiply_pair():
    return load("multiply_fix_old"), load("multiply_fix_new")


@pytest.fixture(scope="session")
def matmul_programs():
    return {
        "base": load("matmul8_old"),
        "scaled": load("matmul8_scaled"),
        "doubled": load("matmul16"),
    }


@pytest.fixture(scope="session")
def sort_programs():
    return {
        "bubble_sorted": load("bubble_sorted"),
        "insertion_sorted": load("insertion_sorted"),
        "bubble_reverse": load("bubble_reverse"),
        "insertion_reverse": load("insertion_reverse"),
    }


@pytest.fixture(scope="session")
def branch_domain_pair():
    return load("branch_domains_old"), load("branch_domains_new")


@pytest.fixture(scope="session")
def io_loop_pair():
    return load("io_loop_old"), load("io_loop_new")


@pytest.fixture(scope="session")
def fig1_program():
    return load("fig1_loop")
