class GhostMomentsError(Exception):
    """Base class; ``code`` maps to the CLI exit status."""

    code = 1


class InputError(GhostMomentsError, ValueError):
    code = 2


class GridMismatchError(InputError):
    pass


class SingularMatrixError(GhostMomentsError, ArithmeticError):
    code = 3
