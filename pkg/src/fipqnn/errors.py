"""Exception hierarchy shared by all modules."""


class FipqnnError(Exception):
    """Base class for package errors."""


class InvalidInputError(FipqnnError, ValueError):
    """Arguments violate a documented precondition."""


class OutOfRangeError(FipqnnError, ValueError):
    """A value falls outside the domain of a piecewise function."""


class ModelBuildError(FipqnnError):
    """The optimization model cannot be built for the given network/data."""


class SizeLimitError(FipqnnError):
    """Problem too large for an exhaustive routine."""


class IdxParseError(FipqnnError):
    """Base class for IDX container errors."""


class BadMagicError(IdxParseError):
    pass


class TruncatedFileError(IdxParseError):
    pass


class CountMismatchError(IdxParseError):
    pass


class TrainingDivergedError(FipqnnError):
    """Baseline training produced a non-finite loss."""

    def __init__(self, epoch: int):
        super().__init__(f"loss became non-finite at epoch {epoch}")
        self.epoch = epoch
