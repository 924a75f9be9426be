"""Tokenizer and recursive-descent parser for the feature DSL."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DslSyntaxError, EmptyProgramError, UnterminatedStringError
from .grammar import CATCOL, COUNT, FUNCTIONS, KEYWORDS, LEVEL
from .nodes import (
    BinOp,
    Binding,
    Call,
    ColumnRef,
    Const,
    DslProgram,
    Expr,
    Loc,
    Neg,
    StringLit,
)

_TOKEN = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>\#[^\n]*)
    | (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<string>"(?:[^"\\\n]|\\.)*")
    | (?P<op><=|>=|[()+\-*/<>,:=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int

    @property
    def loc(self) -> Loc:
        return Loc(self.line, self.col)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        match = _TOKEN.match(source, pos)
        if match is None:
            col = pos - line_start + 1
            if source[pos] == '"':
                raise UnterminatedStringError("unterminated string literal", line, col)
            raise DslSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        kind = match.lastgroup
        text = match.group()
        col = pos - line_start + 1
        if kind != "ws":
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = match.end()
    return tokens


def _unquote(lexeme: str) -> str:
    return re.sub(r"\\(.)", r"\1", lexeme[1:-1])


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def advance(self) -> Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else Token("op", "", 1, 1)
            raise DslSyntaxError("unexpected end of program", last.line, last.col)
        self.pos += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.advance()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            raise DslSyntaxError(f"expected {want!r}, got {tok.text!r}", tok.line, tok.col)
        return tok

    def at_op(self, *texts: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "op" and tok.text in texts

    # expression grammar, lowest precedence first

    def parse_expr(self) -> Expr:
        left = self.parse_additive()
        while self.at_op("<", ">", "<=", ">="):
            op = self.advance()
            right = self.parse_additive()
            left = BinOp(op.text, left, right, loc=op.loc)
        return left

    def parse_additive(self) -> Expr:
        left = self.parse_term()
        while self.at_op("+", "-"):
            op = self.advance()
            right = self.parse_term()
            left = BinOp(op.text, left, right, loc=op.loc)
        return left

    def parse_term(self) -> Expr:
        left = self.parse_unary()
        while self.at_op("*", "/"):
            op = self.advance()
            right = self.parse_unary()
            left = BinOp(op.text, left, right, loc=op.loc)
        return left

    def parse_unary(self) -> Expr:
        if self.at_op("-"):
            op = self.advance()
            return Neg(self.parse_unary(), loc=op.loc)
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        tok = self.advance()
        if tok.kind == "number":
            is_int = not any(c in tok.text for c in ".eE")
            return Const(float(tok.text), is_int=is_int, loc=tok.loc)
        if tok.kind == "string":
            return StringLit(_unquote(tok.text), loc=tok.loc)
        if tok.kind == "ident":
            if tok.text in KEYWORDS:
                raise DslSyntaxError(f"{tok.text!r} is a reserved word", tok.line, tok.col)
            if self.at_op("("):
                return self.parse_call(tok)
            return ColumnRef(tok.text, loc=tok.loc)
        if tok.kind == "op" and tok.text == "(":
            inner = self.parse_expr()
            self.expect("op", ")")
            return inner
        raise DslSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)

    def parse_call(self, name: Token) -> Expr:
        self.expect("op", "(")
        args: list[Expr] = []
        by: str | None = None
        if not self.at_op(")"):
            while True:
                nxt = self.peek()
                if (
                    nxt is not None
                    and nxt.kind == "ident"
                    and nxt.text == "by"
                    and self.pos + 1 < len(self.tokens)
                    and self.tokens[self.pos + 1].kind == "op"
                    and self.tokens[self.pos + 1].text == "="
                ):
                    self.advance()
                    self.advance()
                    group = self.expect("ident")
                    by = group.text
                    break
                args.append(self.parse_expr())
                if self.at_op(","):
                    self.advance()
                    continue
                break
        self.expect("op", ")")
        call = Call(name.text, tuple(args), by=by, loc=name.loc)
        self._check_shape(call, name)
        return call

    def _check_shape(self, call: Call, name: Token) -> None:
        """Arity and argument-shape checks for known functions; unknown names
        are left to the validator."""
        sig = FUNCTIONS.get(call.func)
        if sig is None:
            return
        if len(call.args) != len(sig.args):
            raise DslSyntaxError(
                f"{call.func} expects {len(sig.args)} argument(s), got {len(call.args)}",
                name.line,
                name.col,
            )
        if call.by is not None and not sig.by_allowed:
            raise DslSyntaxError(f"{call.func} does not accept by=", name.line, name.col)
        for arg, kind in zip(call.args, sig.args):
            if kind == COUNT and isinstance(arg, StringLit):
                raise DslSyntaxError(
                    f"{call.func} window/lag must be a number", name.line, name.col
                )
            if kind == LEVEL and not isinstance(arg, StringLit):
                raise DslSyntaxError(
                    f"{call.func} expects a quoted level string", name.line, name.col
                )
            if kind == CATCOL and not isinstance(arg, ColumnRef):
                raise DslSyntaxError(
                    f"{call.func} expects a bare categorical column name", name.line, name.col
                )

    # statements

    def parse_program(self, source: str) -> DslProgram:
        bindings: list[Binding] = []
        feature: tuple[str, Expr] | None = None
        feature_comments: list[str] = []
        pending: list[str] = []
        seen = set()
        while True:
            tok = self.peek()
            if tok is None:
                break
            if tok.kind == "comment":
                self.advance()
                text = tok.text[1:].rstrip("\n")
                if feature is None:
                    pending.append(text)
                else:
                    feature_comments.append(text)
                continue
            if feature is not None:
                raise DslSyntaxError(
                    "unexpected tokens after the feature declaration", tok.line, tok.col
                )
            if tok.kind == "ident" and tok.text == "let":
                self.advance()
                name = self.expect("ident")
                if name.text in KEYWORDS:
                    raise DslSyntaxError(
                        f"{name.text!r} is a reserved word", name.line, name.col
                    )
                if name.text in seen:
                    raise DslSyntaxError(
                        f"duplicate binding {name.text!r}", name.line, name.col
                    )
                seen.add(name.text)
                self.expect("op", "=")
                expr = self.parse_expr()
                bindings.append(Binding(name.text, expr, tuple(pending), loc=name.loc))
                pending = []
                continue
            if tok.kind == "ident" and tok.text == "feature":
                self.advance()
                name_tok = self.expect("string")
                feature_name = _unquote(name_tok.text)
                if not feature_name:
                    raise DslSyntaxError("feature name is empty", name_tok.line, name_tok.col)
                self.expect("op", ":")
                expr = self.parse_expr()
                feature = (feature_name, expr)
                feature_comments = pending
                pending = []
                continue
            raise DslSyntaxError(
                f"expected 'let' or 'feature', got {tok.text!r}", tok.line, tok.col
            )
        if feature is None:
            last = self.tokens[-1]
            raise DslSyntaxError("missing feature declaration", last.line, last.col)
        return DslProgram(
            bindings=tuple(bindings),
            feature_name=feature[0],
            feature_expr=feature[1],
            feature_comments=tuple(feature_comments),
            source_text=source,
        )


def parse(source: str) -> DslProgram:
    """Parse DSL text into a program. Whitespace (including newlines) is not
    significant; statements are delimited by the let/feature keywords."""
    tokens = tokenize(source)
    if not any(t.kind != "comment" for t in tokens):
        raise EmptyProgramError("program has no statements")
    return _Parser(tokens).parse_program(source)
