"""Exceptions raised by the solvers; each carries optional step/grid-point indices."""


class KinsplitError(RuntimeError):
    exit_code = 1

    def __init__(self, message: str, *, step: int | None = None, index: int | None = None):
        super().__init__(message)
        self.step = step
        self.index = index

    def as_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self), "step": self.step,
                "index": self.index}


class HypothesisViolation(KinsplitError):
    """A computed state left the property-P neighbourhood."""
    exit_code = 2


class DegenerateWeight(KinsplitError):
    """Weighted Gram matrix is numerically singular."""
    exit_code = 3


class SolverFailure(KinsplitError):
    exit_code = 4


class NoConvergence(SolverFailure):
    pass


class TailUnbounded(KinsplitError):
    """Leading radial coefficient is negative, so no radius makes the tail nonnegative."""
    exit_code = 2
