"""Exception types raised across the package."""


class BundleHeatError(Exception):
    """Base class for all package errors."""


class OutsideChartError(BundleHeatError, ValueError):
    """A point lies outside the chart domain of a model geometry."""


class OutsideCollarError(BundleHeatError, ValueError):
    """A point lies outside the collar neighbourhood of the boundary."""


class NotOnBoundaryError(BundleHeatError, ValueError):
    """A point that should lie on the boundary does not."""


class BundleInvariantError(BundleHeatError, ValueError):
    """Bundle data violates an algebraic invariant at a sampled point."""

    def __init__(self, message, point=None):
        super().__init__(message if point is None else f"{message} (at point {point})")
        self.point = point


class NonCompliantSectionError(BundleHeatError, ValueError):
    """A section does not satisfy the boundary condition required by an estimator."""


class OracleConvergenceError(BundleHeatError, RuntimeError):
    """A deterministic oracle failed its grid-refinement self check."""


class ConfigError(BundleHeatError, ValueError):
    """Invalid experiment or run configuration."""
