"""AST node types for the feature DSL."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union


@dataclass(frozen=True)
class Loc:
    line: int = 0
    col: int = 0


NO_LOC = Loc()


@dataclass(frozen=True)
class ColumnRef:
    name: str
    loc: Loc = field(default=NO_LOC, compare=False, repr=False)


@dataclass(frozen=True)
class Const:
    value: float
    is_int: bool = False
    loc: Loc = field(default=NO_LOC, compare=False, repr=False)


@dataclass(frozen=True)
class StringLit:
    value: str
    loc: Loc = field(default=NO_LOC, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    loc: Loc = field(default=NO_LOC, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / < > <= >=
    left: "Expr"
    right: "Expr"
    loc: Loc = field(default=NO_LOC, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]
    by: str | None = None
    loc: Loc = field(default=NO_LOC, compare=False, repr=False)


Expr = Union[ColumnRef, Const, StringLit, Neg, BinOp, Call]


@dataclass(frozen=True)
class Binding:
    name: str
    expr: Expr
    comments: tuple[str, ...] = ()
    loc: Loc = field(default=NO_LOC, compare=False, repr=False)


@dataclass(frozen=True)
class DslProgram:
    """A parsed program: zero or more let bindings and one feature declaration.

    `source_text` keeps the original text (comments included) and is excluded
    from structural equality.
    """

    bindings: tuple[Binding, ...]
    feature_name: str
    feature_expr: Expr
    feature_comments: tuple[str, ...] = ()
    source_text: str = field(default="", compare=False, repr=False)

    @property
    def comment(self) -> str | None:
        """First comment in program order (the feature's utility note), if any."""
        for binding in self.bindings:
            if binding.comments:
                return binding.comments[0].strip()
        if self.feature_comments:
            return self.feature_comments[0].strip()
        return None


def iter_exprs(expr: Expr) -> Iterator[Expr]:
    """Yield expr and every sub-expression, depth first."""
    yield expr
    if isinstance(expr, Neg):
        yield from iter_exprs(expr.operand)
    elif isinstance(expr, BinOp):
        yield from iter_exprs(expr.left)
        yield from iter_exprs(expr.right)
    elif isinstance(expr, Call):
        for arg in expr.args:
            yield from iter_exprs(arg)


def referenced_columns(program: DslProgram) -> set[str]:
    """Dataset columns a program reads (let-bound names excluded), including
    by= group columns."""
    bound = {b.name for b in program.bindings}
    refs: set[str] = set()
    exprs = [b.expr for b in program.bindings] + [program.feature_expr]
    for root in exprs:
        for node in iter_exprs(root):
            if isinstance(node, ColumnRef) and node.name not in bound:
                refs.add(node.name)
            elif isinstance(node, Call) and node.by is not None:
                refs.add(node.by)
    return refs
