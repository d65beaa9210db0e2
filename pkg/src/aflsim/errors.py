"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """A run configuration is inconsistent or references missing files."""


class IdxParseError(ValueError):
    """Base class for IDX dataset file problems; message names the file."""


class IdxMagicError(IdxParseError):
    """File does not start with the expected IDX magic number."""


class IdxTruncatedError(IdxParseError):
    """File ends before the payload announced in its header."""


class IdxCountMismatchError(IdxParseError):
    """Image and label files disagree on the number of items."""


class PartitionInfeasibleError(ValueError):
    """A client would receive zero samples; retry with another seed."""


class SchedulerInvariantError(RuntimeError):
    """An internal scheduling invariant was violated; the run must abort."""
