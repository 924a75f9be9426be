"""Schema validation for parsed feature programs."""

from __future__ import annotations

from typing import Mapping

from .errors import (
    KindMismatchError,
    NameCollisionError,
    NonLiteralWindowError,
    UnknownColumnError,
    UnknownFunctionError,
)
from .grammar import CATCOL, COUNT, FUNCTIONS, LEVEL, SERIES
from .nodes import BinOp, Call, ColumnRef, Const, DslProgram, Expr, Neg, StringLit

Schema = Mapping[str, str]  # column name -> "numeric" | "categorical"


def validate(program: DslProgram, schema: Schema) -> DslProgram:
    """Check a program against a column schema; returns it unchanged.

    Enforces: all referenced names exist (let-bound or schema columns),
    categorical columns appear only as by= targets or onehot subjects,
    windows/lags are positive integer literals, and the new feature name does
    not collide with an existing column.
    """
    if program.feature_name in schema:
        raise NameCollisionError(
            f"feature name {program.feature_name!r} is already a column"
        )
    bound: set[str] = set()
    for binding in program.bindings:
        if binding.name in schema:
            raise NameCollisionError(
                f"binding {binding.name!r} shadows a dataset column"
            )
        _check(binding.expr, schema, bound)
        bound.add(binding.name)
    _check(program.feature_expr, schema, bound)
    return program


def _check_series_ref(name: str, schema: Schema, bound: set[str]) -> None:
    if name in bound:
        return
    kind = schema.get(name)
    if kind is None:
        raise UnknownColumnError(f"unknown column or binding {name!r}")
    if kind != "numeric":
        raise KindMismatchError(
            f"categorical column {name!r} may only appear in by= or onehot"
        )


def _check(expr: Expr, schema: Schema, bound: set[str]) -> None:
    if isinstance(expr, ColumnRef):
        _check_series_ref(expr.name, schema, bound)
    elif isinstance(expr, Const):
        pass
    elif isinstance(expr, StringLit):
        raise KindMismatchError("string literal is only valid as onehot's level")
    elif isinstance(expr, Neg):
        _check(expr.operand, schema, bound)
    elif isinstance(expr, BinOp):
        _check(expr.left, schema, bound)
        _check(expr.right, schema, bound)
    elif isinstance(expr, Call):
        _check_call(expr, schema, bound)
    else:  # pragma: no cover - exhaustiveness guard
        raise TypeError(f"unexpected node {type(expr).__name__}")


def _check_call(call: Call, schema: Schema, bound: set[str]) -> None:
    sig = FUNCTIONS.get(call.func)
    if sig is None:
        raise UnknownFunctionError(f"unknown function {call.func!r}")
    # arity is parser-enforced for known functions; re-check for hand-built ASTs
    if len(call.args) != len(sig.args):
        raise KindMismatchError(
            f"{call.func} expects {len(sig.args)} argument(s), got {len(call.args)}"
        )
    for arg, kind in zip(call.args, sig.args):
        if kind == SERIES:
            _check(arg, schema, bound)
        elif kind == COUNT:
            if not isinstance(arg, Const) or not arg.is_int or arg.value < 1:
                raise NonLiteralWindowError(
                    f"{call.func} window/lag must be a positive integer literal"
                )
        elif kind == CATCOL:
            if not isinstance(arg, ColumnRef):
                raise KindMismatchError(f"{call.func} expects a bare column name")
            col_kind = schema.get(arg.name)
            if arg.name in bound or col_kind == "numeric":
                raise KindMismatchError(
                    f"{call.func} expects a categorical column, {arg.name!r} is numeric"
                )
            if col_kind is None:
                raise UnknownColumnError(f"unknown column {arg.name!r}")
        elif kind == LEVEL:
            if not isinstance(arg, StringLit):
                raise KindMismatchError(f"{call.func} level must be a quoted string")
    if call.by is not None:
        if not sig.by_allowed:
            raise KindMismatchError(f"{call.func} does not accept by=")
        by_kind = schema.get(call.by)
        if call.by in bound or by_kind == "numeric":
            raise KindMismatchError(f"by= column {call.by!r} must be categorical")
        if by_kind is None:
            raise UnknownColumnError(f"unknown by= column {call.by!r}")
