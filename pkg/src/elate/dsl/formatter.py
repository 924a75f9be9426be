"""Canonical text form for feature programs.

format_program(parse(text)) normalizes whitespace while keeping comments;
parse(format_program(p)) is structurally equal to p.
"""

from __future__ import annotations

from .nodes import BinOp, Call, ColumnRef, Const, DslProgram, Expr, Neg, StringLit

_PRECEDENCE = {"<": 1, ">": 1, "<=": 1, ">=": 1, "+": 2, "-": 2, "*": 3, "/": 3}
_UNARY_PRECEDENCE = 4


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _format_const(const: Const) -> str:
    if const.is_int:
        return str(int(const.value))
    return repr(const.value)


def format_expr(expr: Expr) -> str:
    return _fmt(expr, parent_prec=0, right_side=False)


def _fmt(expr: Expr, parent_prec: int, right_side: bool) -> str:
    if isinstance(expr, ColumnRef):
        return expr.name
    if isinstance(expr, Const):
        return _format_const(expr)
    if isinstance(expr, StringLit):
        return _quote(expr.value)
    if isinstance(expr, Neg):
        text = "-" + _fmt(expr.operand, _UNARY_PRECEDENCE, False)
        if parent_prec > _UNARY_PRECEDENCE:
            return f"({text})"
        return text
    if isinstance(expr, Call):
        parts = [_fmt(a, 0, False) for a in expr.args]
        if expr.by is not None:
            parts.append(f"by={expr.by}")
        return f"{expr.func}({', '.join(parts)})"
    if isinstance(expr, BinOp):
        prec = _PRECEDENCE[expr.op]
        left = _fmt(expr.left, prec, False)
        right = _fmt(expr.right, prec, True)
        text = f"{left} {expr.op} {right}"
        if prec < parent_prec or (prec == parent_prec and right_side):
            return f"({text})"
        return text
    raise TypeError(f"cannot format {type(expr).__name__}")  # pragma: no cover


def format_program(program: DslProgram) -> str:
    lines: list[str] = []
    for binding in program.bindings:
        lines.extend(f"#{c}" for c in binding.comments)
        lines.append(f"let {binding.name} = {format_expr(binding.expr)}")
    lines.extend(f"#{c}" for c in program.feature_comments)
    lines.append(
        f"feature {_quote(program.feature_name)}: {format_expr(program.feature_expr)}"
    )
    return "\n".join(lines)
