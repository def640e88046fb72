"""Exception hierarchy shared by all kklab modules."""


class KKLabError(Exception):
    """Base class for every error raised by kklab."""


class MatrixError(KKLabError, ValueError):
    """Malformed input: wrong shape or non-finite entries."""


class DomainError(KKLabError, ValueError):
    """A matrix function was evaluated outside its domain."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class GapError(KKLabError, ValueError):
    """The spectrum touches a line or band that must be avoided."""

    def __init__(self, message, distance=None):
        super().__init__(message)
        self.distance = distance


class ConvergenceError(KKLabError, RuntimeError):
    """An iterative method hit its iteration cap."""


class ValidationError(KKLabError, ValueError):
    """A cycle or witness failed one of its defining conditions."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StepSizeError(KKLabError, ValueError):
    """Consecutive path samples are too far apart for the construction."""


class DimensionCapError(KKLabError, ValueError):
    """A requested object exceeds the configured dimension cap."""

    def __init__(self, message, required=None, cap=None):
        super().__init__(message)
        self.required = required
        self.cap = cap
