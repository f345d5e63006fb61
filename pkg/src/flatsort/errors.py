"""Exception types shared across the package."""


class FlatsortError(Exception):
    """Base class for all package errors."""


class ContractViolationError(FlatsortError):
    """A caller broke a documented precondition (unsorted input, bad index, ...)."""


class UnsupportedSizeError(FlatsortError):
    """The region is too small for the requested representation."""


class UnsupportedRegimeError(FlatsortError):
    """The key range or word shape is outside the algorithm's supported regime."""


class CapacityError(FlatsortError):
    """A declared scratch or bookkeeping area cannot hold what is required."""


class CorruptionError(FlatsortError):
    """A compressed representation failed its internal consistency checks."""


class InternalInvariantError(FlatsortError):
    """A runtime self-check failed; indicates a bug, not a usage error."""
