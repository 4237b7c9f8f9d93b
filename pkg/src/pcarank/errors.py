"""Exception hierarchy shared by the package."""


class PcarankError(Exception):
    """Base class for all errors raised by pcarank."""


class InputError(PcarankError, ValueError):
    """Malformed or non-finite input data."""


class ParameterError(PcarankError, ValueError):
    """An argument is outside its admissible range."""


class UnsupportedError(PcarankError, ValueError):
    """The request is well formed but deliberately not supported."""


class DegenerateError(PcarankError, ArithmeticError):
    """The input makes the requested quantity undefined."""


class NumericalError(PcarankError, ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    Attributes
    ----------
    estimate : float or None
        Best value obtained before giving up.
    achieved : float or None
        Error level actually reached.
    """

    def __init__(self, message, estimate=None, achieved=None):
        super().__init__(message)
        self.estimate = estimate
        self.achieved = achieved
