"""Exception hierarchy shared by every ecgpipe module."""


class EcgError(Exception):
    """Base class for all errors raised by ecgpipe."""


class FormatError(EcgError, ValueError):
    """A file or header does not follow the expected layout."""


class TruncationError(FormatError):
    """A payload holds fewer (or more) values than its header announces."""


class DataError(EcgError, ValueError):
    """Sample values are unusable (non-finite, non-numeric, out of range)."""


class DomainError(EcgError, ValueError):
    """Arguments fall outside the domain an operation is defined on."""


class TrainingError(EcgError, RuntimeError):
    """Optimisation diverged or could not proceed."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
