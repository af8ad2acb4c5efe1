"""Exception types shared across the pipeline."""


class InvalidInputError(ValueError):
    """Input that cannot be processed at all (empty image, too few samples)."""


class MalformedSkeletonError(ValueError):
    """Skeleton pixel configuration outside the end/branch/cross vocabulary."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class DegenerateGeometryError(ValueError):
    """Points that admit no ellipse (collinear, coincident, too few)."""


class FitFailure(RuntimeError):
    """Optimizer did not converge; carries the best parameters seen so far."""

    def __init__(self, message, best=None, residual=float("nan")):
        super().__init__(message)
        self.best = best
        self.residual = residual


class NotFoundError(LookupError):
    """Requested structure (e.g. an address block) is absent."""


class LayoutError(ValueError):
    """Synthetic layout cannot be composed on the requested canvas."""


class ConfigError(ValueError):
    """Bad configuration key, value or missing template store."""


class PipelineError(RuntimeError):
    """A batch step could not produce any usable result."""
