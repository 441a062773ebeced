class SPSLError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(SPSLError, ValueError):
    pass


class InvalidConfigError(SPSLError, ValueError):
    pass


class UndefinedMetricError(SPSLError, ValueError):
    pass


class TrainingDivergenceError(SPSLError, RuntimeError):
    """Raised when a loss or activation becomes non-finite.

    ``last_good_epoch`` is the last epoch that finished with a finite loss
    (-1 if none did).
    """

    def __init__(self, message: str, last_good_epoch: int = -1):
        super().__init__(message)
        self.last_good_epoch = last_good_epoch
