"""
Error hierarchy of the bounds application.

Every error carries the process exit code the management commands report
when it aborts a command.
"""

EXIT_USAGE = 1
EXIT_MODEL = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4


class BoundsError(Exception):
    """Base class for all errors raised by the bounds library."""

    exit_code = EXIT_MODEL


class InvalidArgumentError(BoundsError, ValueError):
    """An argument is outside the documented range of an operation."""


class DomainViolationError(BoundsError):
    """A point lies outside the domain box of a partition or model."""


class DegenerateKernelError(BoundsError):
    """A successor box has zero volume after truncation to the domain."""


class ConsistencyError(BoundsError):
    """A partition cell straddles the boundary of a terminal region."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class InvalidSequenceError(BoundsError):
    """A list of grid widths does not describe nested partitions."""


class InfeasibleCredalError(BoundsError):
    """An interval credal set admits no probability distribution."""


class UndefinedStrategyError(BoundsError):
    """A strategy has no action for a region reached during simulation."""

    def __init__(self, message, region=None):
        super().__init__(message)
        self.region = region


class OversizeError(BoundsError):
    """An instance exceeds the size limits of exhaustive enumeration."""


class ParseError(BoundsError):
    """A document could not be parsed; ``line`` is set for line-based formats."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConvergenceError(BoundsError):
    """Value iteration stopped at its iteration budget above tolerance."""

    exit_code = EXIT_NONCONVERGENCE
