"""Exception hierarchy shared by every module."""


class CGPlusError(Exception):
    """Base class for all library errors."""


class InvalidGeometryError(CGPlusError, ValueError):
    pass


class DegenerateHullError(InvalidGeometryError):
    pass


class UnsupportedGeometryError(CGPlusError, TypeError):
    pass


class NoContactError(CGPlusError):
    """Raised when a child footprint does not overlap its parent surface."""


class InvalidMassError(CGPlusError, ValueError):
    pass


class GraphIntegrityError(CGPlusError):
    pass


class ActionPreconditionError(CGPlusError):
    """An action was applied to a state that does not satisfy its preconditions.

    ``clause`` names the failing precondition (e.g. ``"accessible"``).
    """

    def __init__(self, message, clause):
        super().__init__(message)
        self.clause = clause


class LayerInfeasibleError(CGPlusError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


class GoalInfeasibleError(CGPlusError):
    def __init__(self, message, best=None, violations=None):
        super().__init__(message)
        self.best = best
        self.violations = violations or []


class NodeSetMismatchError(CGPlusError):
    pass


class InconsistentGoalError(CGPlusError):
    pass


class PlanNotFoundError(CGPlusError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class SceneFormatError(CGPlusError, ValueError):
    """Schema or referential-integrity problem in a scene or plan file."""
