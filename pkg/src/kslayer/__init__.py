"""Layered radial steady states of -u'' - (N-1)/r u' + u = lambda e^u on a
ball with Neumann conditions: construction, residual checks and solvers."""

from .core import GridFunction, RadialGrid, Tolerances, build_graded_grid
from .matching import ApproxSolution, Construction, MatchingConstants, build_construction
from .outer import OuterSolution, ProblemParams, solve_outer

__all__ = [
    "ApproxSolution",
    "Construction",
    "GridFunction",
    "MatchingConstants",
    "OuterSolution",
    "ProblemParams",
    "RadialGrid",
    "Tolerances",
    "build_construction",
    "build_graded_grid",
    "solve_outer",
]
