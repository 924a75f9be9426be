"""Function signatures and the grammar reference embedded in LLM prompts."""

from __future__ import annotations

from typing import NamedTuple

# argument kinds
SERIES = "series"  # numeric expression
COUNT = "count"  # positive integer literal (window / lag length)
CATCOL = "catcol"  # bare categorical column name
LEVEL = "level"  # quoted string


class FunctionSig(NamedTuple):
    args: tuple[str, ...]
    by_allowed: bool


FUNCTIONS: dict[str, FunctionSig] = {
    "lag": FunctionSig((SERIES, COUNT), True),
    "diff": FunctionSig((SERIES, COUNT), True),
    "rolling_mean": FunctionSig((SERIES, COUNT), True),
    "rolling_sum": FunctionSig((SERIES, COUNT), True),
    "rolling_min": FunctionSig((SERIES, COUNT), True),
    "rolling_max": FunctionSig((SERIES, COUNT), True),
    "rolling_std": FunctionSig((SERIES, COUNT), True),
    "cumsum": FunctionSig((SERIES,), True),
    "abs": FunctionSig((SERIES,), False),
    "log": FunctionSig((SERIES,), False),
    "sqrt": FunctionSig((SERIES,), False),
    "exp": FunctionSig((SERIES,), False),
    "min": FunctionSig((SERIES, SERIES), False),
    "max": FunctionSig((SERIES, SERIES), False),
    "onehot": FunctionSig((CATCOL, LEVEL), False),
}

KEYWORDS = {"let", "feature", "by"}

GRAMMAR_REFERENCE = """\
Feature DSL reference
---------------------

program  := { "let" IDENT "=" expr } "feature" STRING ":" expr
expr     := additive { ("<" | ">" | "<=" | ">=") additive }
additive := term { ("+" | "-") term }
term     := unary { ("*" | "/") unary }
unary    := "-" unary | primary
primary  := NUMBER | IDENT | call | "(" expr ")"
call     := FUNC "(" expr { "," expr } [ "," "by" "=" IDENT ] ")"

Comments run from "#" to end of line. Start the program with a one-line
comment saying why the feature may help. `let` names hold intermediate
series; the final statement declares the feature and its quoted string
becomes the new column name. Window and lag arguments must be positive
integer literals.

Functions:
  lag(x, k)            value of x from k rows back (k >= 1); first k values NaN
  diff(x, k)           x minus its value k rows back
  rolling_mean(x, w)   mean of the trailing w rows (first w-1 values NaN)
  rolling_sum(x, w)    sum over the trailing w rows
  rolling_min(x, w)    minimum over the trailing w rows
  rolling_max(x, w)    maximum over the trailing w rows
  rolling_std(x, w)    sample standard deviation over the trailing w rows
  cumsum(x)            running sum from the first row
  abs(x), log(x), sqrt(x), exp(x)   elementwise transforms
  min(a, b), max(a, b) elementwise extremes of two series
  onehot(c, "level")   1.0 where categorical column c equals "level", else 0.0

lag, diff, rolling_*, and cumsum accept a trailing by=<categorical column>
argument to compute within groups (for example per symbol).

Arithmetic: + - * /; comparisons < > <= >= return 0.0 or 1.0. Division by
zero, log of a non-positive value, and sqrt of a negative value give NaN;
NaN propagates through every operation. Categorical columns may appear only
as by= targets or as onehot's first argument. Reference only declared
dataset columns and earlier let names; the raw target column is not
available (use Target_Tminus1 for the most recent known target value).

Example:

    # ratio of the latest move to the recent trading range
    let rng = rolling_max(high, 5) - rolling_min(low, 5)
    feature "move_vs_range_5": diff(close, 1) / rng
"""
