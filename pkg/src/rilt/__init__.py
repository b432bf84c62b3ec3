"""Recursive inverse-Laplace series solver for fractional, variable-order and delay IVPs."""
__version__ = "0.1.0"

from .engine import SolveError, SolveReport, convergence_probe, prepare, residual, solve, step_solve
from .problem import ProblemError, load_bundled, load_problem, parse_problem
from .series import Series

__all__ = ["Series", "SolveError", "SolveReport", "ProblemError", "convergence_probe",
           "load_bundled", "load_problem", "parse_problem", "prepare", "residual", "solve",
           "step_solve"]
