"""CDCL SAT solving with a graph-network branching policy that hands control to VSIDS."""

from .cnf import Formula, parse_dimacs, write_dimacs
from .solver import RELEASE, SolveResult, Solver, SolverConfig, Status, luby, solve
from .handoff import HandoffController, Strategy, solve_with_strategy

__all__ = [
    "Formula", "parse_dimacs", "write_dimacs",
    "RELEASE", "SolveResult", "Solver", "SolverConfig", "Status", "luby", "solve",
    "HandoffController", "Strategy", "solve_with_strategy",
]
__version__ = "0.1.0"
