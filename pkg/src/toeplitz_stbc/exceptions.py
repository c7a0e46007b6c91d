"""Exception hierarchy shared by the library and the command line."""


class StbcError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(StbcError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericalError(StbcError, ArithmeticError):
    """A numerical routine met a non-finite value or failed to converge."""


class SingularChannelError(NumericalError):
    """The equivalent channel is not of full column rank."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap.

    The best iterate found so far is kept on ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class CapacityError(StbcError):
    """A search space (candidate list or trellis) exceeds its guard size."""
