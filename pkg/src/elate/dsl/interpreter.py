"""Evaluation of validated feature programs against a TimeFrame.

Execution never raises on numeric content: division by zero, log of a
non-positive value, and sqrt of a negative value produce NaN, and NaN
propagates through every operation. Windowed functions are trailing and
require a full window (first w-1 positions NaN, per group when by= is
given); lag/diff leave k leading NaNs per group. rolling_std is the sample
standard deviation. cumsum skips NaN inputs but leaves NaN at those rows.
"""

from __future__ import annotations

import math

import numpy as np
import pandas as pd

from ..data import TimeFrame
from .errors import UnknownColumnError
from .nodes import (
    BinOp,
    Call,
    ColumnRef,
    Const,
    DslProgram,
    Expr,
    Neg,
    referenced_columns,
)

_ROLLING = {
    "rolling_mean": "mean",
    "rolling_sum": "sum",
    "rolling_min": "min",
    "rolling_max": "max",
    "rolling_std": "std",
}

_COMPARE = {
    "<": np.less,
    ">": np.greater,
    "<=": np.less_equal,
    ">=": np.greater_equal,
}


def execute(program: DslProgram, frame: TimeFrame) -> np.ndarray:
    """Evaluate a validated program, returning one float64 value per row."""
    missing = referenced_columns(program) - set(frame.columns)
    if missing:
        raise UnknownColumnError(f"frame is missing columns {sorted(missing)}")
    ctx = _Context(frame)
    for binding in program.bindings:
        ctx.env[binding.name] = ctx.eval(binding.expr)
    result = ctx.eval(program.feature_expr)
    return result.to_numpy(dtype=np.float64, copy=True)


class _Context:
    def __init__(self, frame: TimeFrame):
        self.frame = frame
        self.m = frame.m
        self.env: dict[str, pd.Series] = {}
        self._groups: dict[str, pd.Series] = {}

    def _series(self, values: np.ndarray) -> pd.Series:
        return pd.Series(values, index=pd.RangeIndex(self.m), dtype=np.float64)

    def _group(self, name: str) -> pd.Series:
        if name not in self._groups:
            self._groups[name] = pd.Series(
                self.frame.columns[name], index=pd.RangeIndex(self.m), dtype=object
            )
        return self._groups[name]

    def eval(self, expr: Expr) -> pd.Series:
        if isinstance(expr, ColumnRef):
            if expr.name in self.env:
                return self.env[expr.name]
            return self._series(self.frame.columns[expr.name])
        if isinstance(expr, Const):
            return self._series(np.full(self.m, expr.value))
        if isinstance(expr, Neg):
            return -self.eval(expr.operand)
        if isinstance(expr, BinOp):
            return self._binop(expr)
        if isinstance(expr, Call):
            return self._call(expr)
        raise TypeError(f"cannot evaluate {type(expr).__name__}")  # pragma: no cover

    def _binop(self, expr: BinOp) -> pd.Series:
        left = self.eval(expr.left)
        right = self.eval(expr.right)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if expr.op == "/":
            with np.errstate(all="ignore"):
                out = left.to_numpy() / right.to_numpy()
            out[right.to_numpy() == 0] = np.nan
            return self._series(out)
        la, ra = left.to_numpy(), right.to_numpy()
        out = _COMPARE[expr.op](la, ra).astype(np.float64)
        out[np.isnan(la) | np.isnan(ra)] = np.nan
        return self._series(out)

    def _call(self, call: Call) -> pd.Series:
        name = call.func
        if name == "onehot":
            return self._onehot(call)
        if name in ("min", "max"):
            a = self.eval(call.args[0]).to_numpy()
            b = self.eval(call.args[1]).to_numpy()
            out = np.minimum(a, b) if name == "min" else np.maximum(a, b)
            return self._series(out)
        if name in ("abs", "log", "sqrt", "exp"):
            arr = self.eval(call.args[0]).to_numpy()
            with np.errstate(all="ignore"):
                if name == "abs":
                    out = np.abs(arr)
                elif name == "log":
                    out = np.full_like(arr, np.nan)
                    positive = arr > 0
                    out[positive] = np.log(arr[positive])
                elif name == "sqrt":
                    out = np.sqrt(arr)  # negatives become NaN
                else:
                    out = np.exp(arr)
            return self._series(out)

        series = self.eval(call.args[0])
        group = self._group(call.by) if call.by is not None else None
        if name == "lag":
            k = int(call.args[1].value)
            return series.shift(k) if group is None else series.groupby(group).shift(k)
        if name == "diff":
            k = int(call.args[1].value)
            return series.diff(k) if group is None else series.groupby(group).diff(k)
        if name == "cumsum":
            return series.cumsum() if group is None else series.groupby(group).cumsum()
        if name in _ROLLING:
            w = int(call.args[1].value)
            agg = _ROLLING[name]
            if group is None:
                return getattr(series.rolling(w, min_periods=w), agg)()
            rolled = getattr(series.groupby(group).rolling(w, min_periods=w), agg)()
            rolled = rolled.reset_index(level=0, drop=True)
            return rolled.reindex(pd.RangeIndex(self.m))
        raise TypeError(f"cannot execute function {name!r}")  # pragma: no cover

    def _onehot(self, call: Call) -> pd.Series:
        column = self.frame.columns[call.args[0].name]
        level = call.args[1].value
        out = np.empty(self.m, dtype=np.float64)
        for i, v in enumerate(column):
            if isinstance(v, float) and math.isnan(v):
                out[i] = np.nan
            else:
                out[i] = 1.0 if v == level else 0.0
        return self._series(out)
