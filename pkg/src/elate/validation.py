"""Input checks shared by the public estimator surface."""

from __future__ import annotations

from typing import Iterable

from .data import TimeFrame


def check_timeframe(value) -> TimeFrame:
    if not isinstance(value, TimeFrame):
        raise TypeError(
            f"expected a TimeFrame, got {type(value).__name__}; build one with "
            "load_csv, load_csv_inferred, or the TimeFrame constructor"
        )
    return value


def require_columns(frame: TimeFrame, names: Iterable[str]) -> None:
    missing = sorted(set(names) - set(frame.columns))
    if missing:
        raise ValueError(f"frame is missing columns: {missing}")
