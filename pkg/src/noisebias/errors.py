"""Exception types shared across the package."""


class InputError(ValueError):
    """An argument violated a documented precondition."""


class SpaceMismatchError(InputError):
    """Vectors, trials, or accumulators from different feature spaces were mixed."""


class EstimationError(RuntimeError):
    """A template estimate was requested from insufficient data.

    The message names the empty response cell(s).
    """
