"""Exception hierarchy shared by the whole package."""


class ToneAllocError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(ToneAllocError, ValueError):
    """Malformed input: bad scenario fields, bad ranges, bad arguments."""


class SizeError(ValidationError):
    """Instance too large for an exhaustive solver."""


class UnboundedProblemError(ToneAllocError):
    """A best response has no finite maximizer (free power, no reachable cap)."""


class NumericalError(ToneAllocError):
    """NaN/inf reached in solver state, or an iteration failed to converge."""
