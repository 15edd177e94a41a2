"""Exception types shared across the solvers and the perturbation engine."""


class WaspdpError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(WaspdpError):
    """A matrix that must be positive definite failed its Cholesky/pivot check."""


class RankDeficientConstraints(WaspdpError):
    """Constraint rows are linearly dependent, or the projected system is singular."""


class NotAtZero(WaspdpError):
    """The operation requires the optimizer to sit at the origin."""


class HasConstraints(WaspdpError):
    """The operation requires a program without equality constraints."""


class Infeasible(WaspdpError):
    """No point satisfies the inequality constraints."""


class IterationLimit(WaspdpError):
    """An iterative solver exhausted its iteration budget."""


class MaxIterations(WaspdpError):
    """The outer multiplier loop exhausted its iteration budget."""


class DimensionMismatch(WaspdpError):
    """Array shapes are inconsistent with the declared dimensions."""


class OutOfGrid(WaspdpError):
    """A query point lies outside the grid hull."""


class TooFewNodes(WaspdpError):
    """The grid has too few nodes along some dimension for the stencil."""


class InconsistentActiveSet(WaspdpError):
    """A multiplier is positive on a strictly slack constraint."""


class RegularityViolated(WaspdpError):
    """Active constraint gradients are rank deficient."""


class NonpositiveState(WaspdpError):
    """A state value that must be positive is not."""


class NotAtOptimum(WaspdpError):
    """The supplied point fails the stationarity / complementarity checks."""


class ExcessiveNodeFailures(WaspdpError):
    """Too large a fraction of grid nodes failed to solve."""


class ConfigError(WaspdpError):
    """An experiment configuration failed validation."""
