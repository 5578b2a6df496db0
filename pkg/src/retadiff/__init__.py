"""Differential timing analysis for a small assembly language."""

from .absint import Interval, analyze, analyze_program, compare_domains, loop_bounds
from .cfg import Category, Cfg, IrreducibleLoop, LoopInfo, build_cfg, find_natural_loops
from .differ import DiffResult, diff_programs, normalize_line
from .isa import (
    CostInterval,
    CycleModel,
    IoChannel,
    Opcode,
    Program,
    cost_of,
    default_cycle_model,
    format_program,
    parse_cycle_model,
    parse_program,
)
from .oracle import (
    ComplexityReport,
    FuelExhausted,
    SimInput,
    SimResult,
    UnboundedLoop,
    WcetResult,
    enumerate_inputs,
    full_wcet,
    simulate,
    simulate_pair,
)
from .reta import (
    Contribution,
    TimeDelta,
    analyze_update,
    analyze_update_full,
    compose_wcet,
)
from .slicing import (
    DependenceGraph,
    SliceSet,
    backward_slice,
    build_dependence_graph,
    combined_slice,
    forward_slice,
)

__all__ = [
    "Category",
    "Cfg",
    "ComplexityReport",
    "Contribution",
    "CostInterval",
    "CycleModel",
    "DependenceGraph",
    "DiffResult",
    "FuelExhausted",
    "Interval",
    "IoChannel",
    "IrreducibleLoop",
    "LoopInfo",
    "Opcode",
    "Program",
    "SimInput",
    "SimResult",
    "SliceSet",
    "TimeDelta",
    "UnboundedLoop",
    "WcetResult",
    "analyze",
    "analyze_program",
    "analyze_update",
    "analyze_update_full",
    "backward_slice",
    "build_cfg",
    "build_dependence_graph",
    "combined_slice",
    "compare_domains",
    "compose_wcet",
    "cost_of",
    "default_cycle_model",
    "diff_programs",
    "enumerate_inputs",
    "find_natural_loops",
    "format_program",
    "forward_slice",
    "full_wcet",
    "loop_bounds",
    "normalize_line",
    "parse_cycle_model",
    "parse_program",
    "simulate",
    "simulate_pair",
]
