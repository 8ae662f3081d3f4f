"""Exception types shared across the toolkit."""


class Obstacle1DError(Exception):
    """Base class for all toolkit errors."""


class DomainError(Obstacle1DError):
    """Meshes, sets or problem data are inconsistent (endpoints, ordering, signs)."""


class DegreeError(Obstacle1DError):
    """A field exceeds the supported polynomial degree."""


class AdmissibilityError(Obstacle1DError):
    """A primal function violates boundary values or obstacle constraints."""


class FeasibilityError(Obstacle1DError):
    """A flux violates the divergence constraints required by the dual problem.

    ``intervals`` lists (left, right) subintervals where the violation occurs,
    when the caller could localize it.
    """

    def __init__(self, message, intervals=()):
        super().__init__(message)
        self.intervals = tuple(intervals)


class IdentityError(Obstacle1DError):
    """An exact identity failed beyond its floating-point tolerance.

    This signals a quadrature or mesh-alignment bug, not an approximation error.
    """


class ConvergenceError(Obstacle1DError):
    """An iterative solver hit its iteration limit before reaching tolerance."""

    def __init__(self, message, iterations=0, change=float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.change = change
