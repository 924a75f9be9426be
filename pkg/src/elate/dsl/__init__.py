"""A small, closed language for time-series feature transforms.

Programs are parsed into an AST, validated against a column schema, and
executed against a TimeFrame. See GRAMMAR_REFERENCE for the surface syntax.
"""

from .errors import (
    DslError,
    DslSyntaxError,
    DslValidationError,
    EmptyProgramError,
    KindMismatchError,
    NameCollisionError,
    NonLiteralWindowError,
    UnknownColumnError,
    UnknownFunctionError,
    UnterminatedStringError,
)
from .formatter import format_expr, format_program
from .grammar import FUNCTIONS, GRAMMAR_REFERENCE
from .interpreter import execute
from .nodes import (
    BinOp,
    Binding,
    Call,
    ColumnRef,
    Const,
    DslProgram,
    Expr,
    Neg,
    StringLit,
    iter_exprs,
    referenced_columns,
)
from .parser import parse, tokenize
from .validator import validate

__all__ = [
    "BinOp",
    "Binding",
    "Call",
    "ColumnRef",
    "Const",
    "DslError",
    "DslProgram",
    "DslSyntaxError",
    "DslValidationError",
    "EmptyProgramError",
    "Expr",
    "FUNCTIONS",
    "GRAMMAR_REFERENCE",
    "KindMismatchError",
    "NameCollisionError",
    "Neg",
    "NonLiteralWindowError",
    "StringLit",
    "UnknownColumnError",
    "UnknownFunctionError",
    "UnterminatedStringError",
    "execute",
    "format_expr",
    "format_program",
    "iter_exprs",
    "parse",
    "referenced_columns",
    "tokenize",
    "validate",
]
