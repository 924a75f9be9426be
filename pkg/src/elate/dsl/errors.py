"""Exception types raised while parsing and validating feature programs."""

from __future__ import annotations


class DslError(Exception):
    pass


class DslSyntaxError(DslError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class UnterminatedStringError(DslSyntaxError):
    pass


class EmptyProgramError(DslError):
    pass


class DslValidationError(DslError):
    pass


class UnknownColumnError(DslValidationError):
    pass


class UnknownFunctionError(DslValidationError):
    pass


class KindMismatchError(DslValidationError):
    pass


class NameCollisionError(DslValidationError):
    pass


class NonLiteralWindowError(DslValidationError):
    pass
