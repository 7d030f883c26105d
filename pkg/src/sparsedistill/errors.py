"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class DomainError(ValueError):
    """A value lies outside the mathematical domain of an operation."""


class FormatError(ValueError):
    """A file does not match its expected binary or text layout."""


class LengthError(FormatError):
    """A file payload is shorter or longer than its header promises."""


class ConsistencyError(ValueError):
    """Two artifacts that must agree (counts, shapes, digests) do not."""


class StalenessError(ConsistencyError):
    """A cached artifact no longer matches the checkpoint that produced it."""


class TrainingError(RuntimeError):
    """Training produced a non-finite loss or gradient.

    Carries enough context (epoch, batch, parameter path) to locate the
    failing step.
    """

    def __init__(self, message, epoch=None, batch=None, param=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.param = param


class UsageError(ValueError):
    """Bad command-line arguments or missing input files."""
