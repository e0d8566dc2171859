"""Exception types shared across the package.

The CLI maps these onto process exit codes: bad input -> 2, numeric
failure -> 3, corrupt container -> 4.
"""


class InputError(ValueError):
    """An argument or input datum violates a documented precondition."""


class NumericError(ArithmeticError):
    """An iterative numeric routine failed to converge or diverged.

    ``last_estimate`` carries the final iterate of a power iteration,
    ``iteration`` the step index of a descent loop, when applicable.
    """

    def __init__(self, message, last_estimate=None, iteration=None):
        super().__init__(message)
        self.last_estimate = last_estimate
        self.iteration = iteration


class CorruptDataError(ValueError):
    """A serialized container failed structural validation.

    Raised for bad magic, unknown version, checksum mismatch, truncation,
    trailing bytes, or indices that point outside their codebook.
    """
