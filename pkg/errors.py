"""Exception hierarchy shared by the cycrir modules and the CLI exit codes."""

from typing import Dict


class CycrirError(Exception):
    """Base class for every error raised on purpose by cycrir."""

    kind = "error"
    exit_code = 1


class ValidationError(CycrirError, ValueError):
    """Input that does not describe a valid network, perturbation or option."""

    kind = "validation"
    exit_code = 2


class NumericalError(CycrirError, ArithmeticError):
    """Floating point computation that cannot be trusted (cancellation, residuals)."""

    kind = "numerical"
    exit_code = 3


class PreconditionError(CycrirError, ValueError):
    """An operation was called on an input outside its domain of definition."""

    kind = "precondition"
    exit_code = 4


class PoleEvaluationError(NumericalError):
    """A rational function was evaluated at (or numerically at) one of its poles."""

    def __init__(self, pole: complex):
        self.pole = complex(pole)
        super().__init__(f"evaluation at a pole: s = {self.pole.real:.17g}{self.pole.imag:+.17g}j")


def error_payload(exc: BaseException) -> Dict[str, object]:
    """Machine-readable description of an error, as written by the CLI on stderr."""
    if isinstance(exc, CycrirError):
        return {"error": exc.kind, "message": str(exc), "exit_code": exc.exit_code}
    return {"error": "internal", "message": f"{type(exc).__name__}: {exc}", "exit_code": 1}
