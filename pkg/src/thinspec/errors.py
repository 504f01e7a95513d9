"""Exception hierarchy shared by all thinspec modules."""


class ThinSpecError(Exception):
    """Base class for all library errors."""

    code = "error"


class InvalidInputError(ThinSpecError, ValueError):
    code = "invalid-input"


class SearchFailureError(ThinSpecError):
    """Maximum search did not converge; ``best`` holds the last iterate."""

    code = "search-failure"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class UnsupportedGeometryError(ThinSpecError):
    code = "unsupported-geometry"


class DegenerateMaximumError(ThinSpecError):
    code = "degenerate-maximum"


class AccuracyError(ThinSpecError):
    code = "accuracy"


class CapExceededError(ThinSpecError):
    code = "cap-exceeded"


class NumericPathRequired(ThinSpecError):
    """The analytic oscillator ladder only exists for quadratic wells (k = 1)."""

    code = "use-numeric-path"


class InvalidPotentialError(ThinSpecError, ValueError):
    code = "invalid-potential"


class BoxTooSmallError(ThinSpecError):
    code = "box-too-small"


class InvalidLevelError(ThinSpecError, ValueError):
    code = "invalid-level"


class DegenerateDomainError(ThinSpecError):
    code = "degenerate-domain"


class FloorViolationError(ThinSpecError):
    code = "floor-violation"


class ConvergenceError(ThinSpecError):
    """Iterative solve failed; ``trace`` holds per-iteration diagnostics."""

    code = "convergence"

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class AccuracyRefusedError(ThinSpecError):
    code = "accuracy-refused"
