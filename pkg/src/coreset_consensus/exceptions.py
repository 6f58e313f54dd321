"""Exception types raised across the package."""


class InvalidProblemError(ValueError):
    """A problem instance violates a precondition of its reduction."""


class UnsupportedSizeError(ValueError):
    """An exact oracle was asked to handle an instance it cannot enumerate."""


class SolverError(RuntimeError):
    """The MEB solver hit its iteration cap before reaching tolerance.

    The best iterate found is kept on ``ball`` so callers may recover.
    """

    def __init__(self, message, ball=None):
        super().__init__(message)
        self.ball = ball


class InvalidSolutionError(ValueError):
    """A solution cannot be turned into a usable model."""
