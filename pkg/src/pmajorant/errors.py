"""Exception types shared across the package."""


class PMajorantError(Exception):
    """Base class for all package errors."""


class CoeffSyntaxError(PMajorantError, SyntaxError):
    """Malformed coefficient expression; ``offset`` is a 0-based byte offset."""

    def __init__(self, message, text, offset):
        super().__init__(f"{message} at byte {offset}")
        self.text = text
        self.offset = offset
        self.msg = message


class UnknownIdentifier(PMajorantError):
    def __init__(self, name, offset):
        super().__init__(f"unknown identifier {name!r} at byte {offset}")
        self.name = name
        self.offset = offset


class DomainError(PMajorantError, ArithmeticError):
    """Expression evaluated outside its domain; ``x`` is the offending coordinate."""

    def __init__(self, message, x=None):
        super().__init__(message if x is None else f"{message} at x={x!r}")
        self.x = x


class InvalidExponent(PMajorantError, ValueError):
    pass


class ProblemError(PMajorantError, ValueError):
    """Inconsistent problem data (non-zero-mean Neumann load, bad obstacle...)."""


class DimensionMismatch(PMajorantError, ValueError):
    pass


class GridMismatch(PMajorantError, ValueError):
    pass


class NotDivergenceFree(PMajorantError, ValueError):
    pass


class NoConvergence(PMajorantError, RuntimeError):
    pass


class UncertifiedConstant(PMajorantError, ValueError):
    pass


class SingularityNotIntegrable(PMajorantError, ValueError):
    pass


class NotImplementedForOrder(PMajorantError, NotImplementedError):
    pass


class InfeasibleExponent(PMajorantError, ValueError):
    pass


class ConfigError(PMajorantError, ValueError):
    """Invalid run configuration; ``pointer`` is a JSON pointer to the bad field."""

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
