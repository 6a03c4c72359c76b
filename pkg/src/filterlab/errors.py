"""Exception types raised across filterlab."""


class FilterLabError(Exception):
    """Base class for all filterlab errors."""


class AllZeroMass(FilterLabError, ValueError):
    """Every weight of a measure is zero, so it cannot be normalized."""


class NegativeWeight(FilterLabError, ValueError):
    pass


class GridMismatch(FilterLabError, ValueError):
    pass


class TruncationExcess(FilterLabError, ValueError):
    """A discretized transition row lost too much mass outside the grid."""


class UnboundedRatio(FilterLabError, ArithmeticError):
    """A density ratio needed by an assumption check is effectively infinite."""


class RecurrenceFailure(FilterLabError):
    """The exponential drift condition does not hold.

    ``witness`` is the grid coordinate where the drift ratio is largest.
    """

    def __init__(self, message, witness=None, rho=None):
        super().__init__(message)
        self.witness = witness
        self.rho = rho


class ParseError(FilterLabError, ValueError):
    pass


class ValidationError(FilterLabError, ValueError):
    pass
