"""Exception hierarchy."""


class LtiKernelsError(Exception):
    """Base class for all package errors."""


class ParseError(LtiKernelsError, ValueError):
    """Malformed kernel string, config file or CSV input."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class NumericalError(LtiKernelsError, ArithmeticError):
    """A computation could not deliver a trustworthy number."""


class QuadratureError(NumericalError):
    """Panel refinement did not reach the requested accuracy."""


class IllConditionedError(NumericalError):
    """Cholesky factorization failed even after diagonal jitter."""


class DegenerateSmootherError(NumericalError):
    """trace(I - H) vanished in a GCV evaluation."""


class SelectionError(NumericalError):
    """No usable point on a regularization grid."""


class UndefinedScoreError(NumericalError):
    """A fit score has a zero denominator."""
