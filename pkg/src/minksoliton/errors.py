"""Exception hierarchy shared by all modules."""


class SolitonError(Exception):
    """Base class for every error raised by the package."""


class NotSpacelike(SolitonError, ValueError):
    pass


class NotAdmissible(SolitonError, ValueError):
    pass


class OutOfRange(SolitonError, ValueError):
    pass


class InvariantViolated(SolitonError, RuntimeError):
    pass


class NoConvergence(SolitonError, RuntimeError):
    pass


class WindowTooSmall(SolitonError, ValueError):
    pass


class PositivityLost(SolitonError, RuntimeError):
    pass


class StencilIncomplete(SolitonError, IndexError):
    pass


class EllipticityLost(SolitonError, RuntimeError):
    pass


class SolverError(SolitonError, RuntimeError):
    """Failure of a nonlinear solver backend.

    ``sigma`` is filled in by the continuation driver so callers know
    which homotopy step failed.
    """

    def __init__(self, message, sigma=None):
        super().__init__(message)
        self.sigma = sigma


class LineSearchStalled(SolverError):
    pass


class MaxItersExceeded(SolverError):
    pass


class Stagnation(SolverError):
    pass


class BarrierViolated(SolitonError, RuntimeError):
    pass


class DegenerateSamples(SolitonError, ValueError):
    pass


class BarrierCrossing(SolitonError, RuntimeError):
    pass


class SandwichViolated(SolitonError, RuntimeError):
    pass


class SchemaError(SolitonError, ValueError):
    """Configuration rejected; ``violations`` lists ``(path, message)`` pairs."""

    def __init__(self, violations):
        self.violations = list(violations)
        text = "; ".join(f"{p}: {m}" for p, m in self.violations)
        super().__init__(text or "invalid configuration")
