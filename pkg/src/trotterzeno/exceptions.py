"""Exception types raised by the package."""


class TruncationError(ValueError):
    """A state or operator does not fit the Fock-space cutoff."""


class DenseLimitError(ValueError):
    """The flattened superoperator would exceed the configured dense size."""


class FitError(ValueError):
    """Too few usable points for a convergence-order fit."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""


class NumericalError(RuntimeError):
    """A numerical routine produced non-finite values or failed to converge."""


class StepSizeUnderflow(NumericalError):
    """Adaptive integration could not meet its tolerance.

    Attributes
    ----------
    last_time : float
        Last time point at which a step was accepted.
    """

    def __init__(self, message, last_time):
        super().__init__(message)
        self.last_time = last_time
