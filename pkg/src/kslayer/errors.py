"""Exception types raised across the package."""

from __future__ import annotations


class ParameterError(ValueError):
    """Invalid input parameters (precondition violated)."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, estimate: float = float("nan"), error: float = float("nan")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class StiffnessError(RuntimeError):
    """The IVP integrator could not advance (step size underflow)."""


class SingularityError(RuntimeError):
    """A linear system is singular or numerically close to it."""


class ConsistencyError(RuntimeError):
    """Two independent routes to the same quantity disagree."""


class InvalidOuterError(ValueError):
    """The outer profile has a non-positive boundary slope."""


class DomainError(ValueError):
    """No admissible solution exists for the requested parameter."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge."""

    def __init__(self, message: str, history: list[float] | None = None):
        super().__init__(message)
        self.history = list(history or [])


class BracketError(ValueError):
    """Shooting bracket does not contain a sign change."""


class TrajectoryError(RuntimeError):
    """An integrated trajectory left the admissible range before r0."""

    def __init__(self, message: str, radius: float = float("nan")):
        super().__init__(message)
        self.radius = radius
