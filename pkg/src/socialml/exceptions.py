"""Exception hierarchy.

Everything raised on purpose by this package derives from :class:`SMLError`,
so callers (and the CLI) can separate domain failures from bugs.
"""


class SMLError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SMLError, ValueError):
    """Malformed arrays, labels, dimensions or parameters."""


class InvalidTopologyError(InvalidInputError):
    """A combination matrix or adjacency violates the network assumptions."""


class PreconditionError(SMLError, ValueError):
    """An operation was called outside its domain of validity."""


class UnsupportedLossError(InvalidInputError):
    pass


class MarginTooLargeError(PreconditionError):
    """Requested margin is at or beyond ``delta_max`` for the given target risk."""

    def __init__(self, delta, delta_max):
        self.delta = delta
        self.delta_max = delta_max
        super().__init__(
            f"margin delta={delta:.6g} must be below delta_max={delta_max:.6g}"
        )


class OutOfRegimeError(PreconditionError):
    """Stream length is below kappa / delta, where no bound is asserted."""


class NumericalError(SMLError, ArithmeticError):
    """Base class for numeric failures (CLI exit code 3)."""


class DivergedTrainingError(NumericalError):
    def __init__(self, epoch, message="non-finite loss"):
        self.epoch = epoch
        super().__init__(f"training diverged at epoch {epoch}: {message}")


class ConvergenceError(NumericalError):
    """Iteration budget exhausted; ``state`` holds the last iterate."""

    def __init__(self, message, state=None, rounds=None):
        self.state = state
        self.rounds = rounds
        super().__init__(message)


class ConfigError(SMLError):
    """Experiment configuration is invalid (CLI exit code 2)."""
