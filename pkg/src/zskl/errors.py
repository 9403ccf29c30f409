"""Exception hierarchy shared by the library and the command line."""


class ZsklError(ValueError):
    """Base class for every error raised on bad data, specs or numerics."""


class DataError(ZsklError):
    """Malformed, inconsistent or non-finite dataset content."""


class SpecError(ZsklError):
    """Invalid kernel, objective or training configuration."""


class TrainingError(ZsklError):
    """Raised when optimisation produces non-finite values."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
