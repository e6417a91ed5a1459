"""Exception types shared across the package."""


class NBVError(Exception):
    """Base class for planning-engine failures."""


class DomainError(NBVError, ValueError):
    """A position or index lies outside the workspace."""


class CollisionError(NBVError):
    """A pose lies inside an obstacle."""


class NoPathError(NBVError):
    """The planner could not connect start and goal."""


class InfeasibleError(NBVError):
    """No feasible candidate viewpoint could be initialized."""


class NumericalError(NBVError, ArithmeticError):
    """A linear solve failed; carries the condition number when known."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ScenarioError(NBVError, ValueError):
    """Malformed scenario document."""
