"""Exception types raised across the package."""


class QboundError(Exception):
    """Base class for all package errors."""


class DimensionError(QboundError, ValueError):
    """A layout, dimension or partition does not fit the operation."""


class StateError(QboundError, ValueError):
    """A matrix fails the density-matrix invariants."""


class TruncationError(QboundError, ValueError):
    """A spectrum truncation or state cutoff is too aggressive for the request."""


class ConvergenceError(QboundError, RuntimeError):
    """A numerical search did not settle inside its configured horizon."""
