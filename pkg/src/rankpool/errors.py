"""Exceptions shared across the package."""


class RankPoolError(Exception):
    """Base class for package errors."""


class InvalidSequence(RankPoolError):
    """Sequence violates a structural invariant (empty, ragged, non-finite)."""


class SolverDidNotConverge(RankPoolError):
    """Newton solve hit the iteration cap before the gradient tolerance.

    Carries the best iterate found so far plus its gradient norm, and a
    context dict that callers higher in the stack (hierarchy layers, CLI)
    extend with the window/sequence they were working on.
    """

    def __init__(self, message, solution=None, grad_norm=None):
        super().__init__(message)
        self.solution = solution
        self.grad_norm = grad_norm
        self.context = {}

    def add_context(self, **kwargs):
        self.context.update(kwargs)
        return self


class NotConverged(RankPoolError):
    """A gradient routine was handed a non-stationary rank-pool solution."""


class DegenerateUpdate(RankPoolError):
    """Rank-one inverse update denominator too close to zero."""


class SingularMatrix(RankPoolError):
    """Pivot breakdown during elimination."""


class PrefixTooShort(RankPoolError):
    """Recursive pooling needs at least two frames."""


class DegenerateLabels(RankPoolError):
    """Some class has no training example."""


class DataFormatError(RankPoolError):
    """An input file does not parse as its documented format."""
