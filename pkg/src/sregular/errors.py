"""Exception types shared across the package.

The CLI maps these onto exit codes: bad input values -> 2, violated
preconditions -> 3, exhausted budgets -> 4.
"""


class DomainError(ValueError):
    """An argument is outside the operation's domain (bad value, bad shape)."""


class StructuralError(DomainError):
    """A combinatorial structure is invalid (e.g. a transition matrix that is
    not irreducible and aperiodic)."""


class InsufficientContextError(DomainError):
    """A word is too short to determine every requested evaluation."""


class PreconditionError(RuntimeError):
    """A documented precondition does not hold for the given data
    (e.g. sample resolution too coarse for the requested scale)."""


class AdequacyError(PreconditionError):
    """Sample resolution is too coarse relative to epsilon; counts would
    reflect the sample rather than the underlying set."""


class BudgetError(RuntimeError):
    """A configured node/cell budget was exceeded.

    ``partial`` carries the partial result accumulated before the budget ran
    out, ``visited`` the number of units consumed.
    """

    def __init__(self, message, partial=None, visited=None):
        super().__init__(message)
        self.partial = partial
        self.visited = visited
