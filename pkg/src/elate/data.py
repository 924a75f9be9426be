"""Timestamp-indexed columnar data: loading, target lagging, chronological splits."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd

TARGET_LAG_COLUMN = "Target_Tminus1"

NUMERIC_KINDS = {"numeric", "number", "float", "int", "integer", "real"}
CATEGORICAL_KINDS = {"categorical", "category", "string", "str", "text"}


@dataclass(frozen=True)
class TimeFrame:
    """A columnar table sorted by timestamp with one designated target column.

    Numeric columns are float64, categorical columns are object arrays of
    strings (NaN for missing). Arrays are frozen after construction; derived
    frames are new objects.
    """

    timestamps: np.ndarray
    columns: dict[str, np.ndarray]
    target_name: str
    horizon: int = 1
    group_keys: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        m = len(self.timestamps)
        for name, values in self.columns.items():
            if len(values) != m:
                raise ValueError(f"column {name!r} has {len(values)} rows, expected {m}")
        if m > 1 and np.any(self.timestamps[1:] < self.timestamps[:-1]):
            raise ValueError("timestamps must be sorted ascending")
        if self.target_name not in self.columns:
            raise ValueError(f"target column {self.target_name!r} not present")
        if self.columns[self.target_name].dtype != np.float64:
            raise ValueError("target column must be numeric")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        unknown = self.group_keys - set(self.categorical_names())
        if unknown:
            raise ValueError(f"group keys are not categorical columns: {sorted(unknown)}")
        self.timestamps.flags.writeable = False
        for values in self.columns.values():
            values.flags.writeable = False

    @property
    def m(self) -> int:
        return len(self.timestamps)

    def numeric_names(self) -> list[str]:
        return [n for n, v in self.columns.items() if v.dtype == np.float64]

    def categorical_names(self) -> list[str]:
        return [n for n, v in self.columns.items() if v.dtype != np.float64]

    def schema(self) -> dict[str, str]:
        """Column name -> "numeric" | "categorical"."""
        return {
            n: ("numeric" if v.dtype == np.float64 else "categorical")
            for n, v in self.columns.items()
        }

    def feature_schema(self) -> dict[str, str]:
        """Schema visible to feature programs: everything except the raw target."""
        out = self.schema()
        out.pop(self.target_name, None)
        return out

    @property
    def target(self) -> np.ndarray:
        return self.columns[self.target_name]

    def slice_rows(self, start: int, stop: int) -> "TimeFrame":
        return TimeFrame(
            timestamps=self.timestamps[start:stop],
            columns={n: v[start:stop] for n, v in self.columns.items()},
            target_name=self.target_name,
            horizon=self.horizon,
            group_keys=self.group_keys,
        )

    def with_columns(self, new: dict[str, np.ndarray]) -> "TimeFrame":
        merged = dict(self.columns)
        for name, values in new.items():
            if name in merged:
                raise ValueError(f"column {name!r} already exists")
            merged[name] = np.asarray(values)
        return TimeFrame(
            timestamps=self.timestamps,
            columns=merged,
            target_name=self.target_name,
            horizon=self.horizon,
            group_keys=self.group_keys,
        )

    def to_dataframe(self) -> pd.DataFrame:
        out = pd.DataFrame({n: v for n, v in self.columns.items()})
        out.insert(0, "__timestamp__", self.timestamps)
        return out


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    kind: str  # "numeric" | "categorical"
    has_nan: bool
    description: str


@dataclass(frozen=True)
class DatasetDescription:
    """Parsed dataset description file; `text` keeps the raw form for prompts."""

    text: str
    header: str
    columns: tuple[ColumnInfo, ...]

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def kinds(self) -> dict[str, str]:
        return {c.name: c.kind for c in self.columns}


_COLUMN_LINE = re.compile(
    r"^\s*(?P<name>[^()\s](?:[^()]*[^()\s])?)\s*"
    r"\(\s*(?P<kind>[A-Za-z]+)\s*,\s*nan\s*=\s*(?P<nan>yes|no)\s*\)\s*:\s*(?P<desc>.*)$"
)


def parse_description(text: str) -> DatasetDescription:
    """Parse a description file: a free-text header paragraph followed by one
    line per column, ``name (type, nan=yes|no): description``.
    """
    header_lines: list[str] = []
    columns: list[ColumnInfo] = []
    for line in text.splitlines():
        match = _COLUMN_LINE.match(line)
        if match is None:
            if columns and line.strip():
                raise ValueError(f"unparseable column line after column section began: {line!r}")
            header_lines.append(line)
            continue
        kind_raw = match["kind"].lower()
        if kind_raw in NUMERIC_KINDS:
            kind = "numeric"
        elif kind_raw in CATEGORICAL_KINDS:
            kind = "categorical"
        else:
            raise ValueError(f"unknown column type {match['kind']!r} for {match['name']!r}")
        columns.append(
            ColumnInfo(
                name=match["name"].strip(),
                kind=kind,
                has_nan=match["nan"] == "yes",
                description=match["desc"].strip(),
            )
        )
    if not columns:
        raise ValueError("description file declares no columns")
    names = [c.name for c in columns]
    if len(set(names)) != len(names):
        raise ValueError("duplicate column names in description")
    return DatasetDescription(
        text=text, header="\n".join(header_lines).strip(), columns=tuple(columns)
    )


def load_description(path: str) -> DatasetDescription:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_description(fh.read())


def _parse_timestamps(raw: pd.Series) -> np.ndarray:
    stripped = raw.astype(str).str.strip()
    if stripped.str.match(r"^-?\d+$").all():
        return stripped.astype(np.int64).to_numpy()
    try:
        return pd.to_datetime(stripped).to_numpy()
    except (ValueError, TypeError):
        pass
    try:
        return pd.to_datetime(stripped, format="mixed").to_numpy()
    except (ValueError, TypeError) as exc:
        raise ValueError(f"cannot parse timestamp column: {exc}") from exc


def _check_unique_header(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = next(csv.reader(fh))
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise ValueError(f"duplicate column names in CSV header: {dupes}")
    return header


def _categorical_array(raw: pd.Series) -> np.ndarray:
    values = raw.astype(str).to_numpy(dtype=object)
    out = np.empty(len(values), dtype=object)
    for i, v in enumerate(values):
        out[i] = np.nan if v == "" else v
    return out


def load_csv(
    path: str,
    description_path: str,
    *,
    timestamp_col: str,
    target_col: str,
    horizon: int = 1,
) -> tuple[TimeFrame, DatasetDescription]:
    """Load a CSV plus its column-description file into a TimeFrame.

    Rows are stably sorted by timestamp (file order preserved within ties).
    Numeric cells that fail to parse become NaN; empty categorical cells
    become NaN. The description's column list must match the CSV's
    non-timestamp columns exactly.
    """
    description = load_description(description_path)
    header = _check_unique_header(path)
    if timestamp_col not in header:
        raise ValueError(f"timestamp column {timestamp_col!r} not in CSV")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)

    data_cols = [c for c in raw.columns if c != timestamp_col]
    described = description.column_names()
    if set(data_cols) != set(described):
        missing = sorted(set(data_cols) - set(described))
        extra = sorted(set(described) - set(data_cols))
        raise ValueError(
            f"description/CSV column mismatch (undescribed: {missing}, not in CSV: {extra})"
        )
    if target_col not in data_cols:
        raise ValueError(f"target column {target_col!r} not in CSV")

    kinds = description.kinds()
    if kinds[target_col] != "numeric":
        raise ValueError("target column must be described as numeric")

    timestamps = _parse_timestamps(raw[timestamp_col])
    order = np.argsort(timestamps, kind="stable")
    timestamps = timestamps[order]

    columns: dict[str, np.ndarray] = {}
    for name in data_cols:
        series = raw[name].iloc[order].reset_index(drop=True)
        if kinds[name] == "numeric":
            columns[name] = pd.to_numeric(series, errors="coerce").to_numpy(dtype=np.float64)
        else:
            columns[name] = _categorical_array(series)

    frame = TimeFrame(
        timestamps=timestamps,
        columns=columns,
        target_name=target_col,
        horizon=horizon,
        group_keys=frozenset(n for n in data_cols if kinds[n] == "categorical"),
    )
    return frame, description


def load_csv_inferred(
    path: str,
    *,
    timestamp_col: str,
    target_col: str | None = None,
    horizon: int = 1,
) -> TimeFrame:
    """Load a CSV without a description, inferring column kinds from content.

    A column is numeric when every non-empty cell parses as a number.
    Used by `elate transform` when no config file is supplied.
    """
    header = _check_unique_header(path)
    if timestamp_col not in header:
        raise ValueError(f"timestamp column {timestamp_col!r} not in CSV")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)

    timestamps = _parse_timestamps(raw[timestamp_col])
    order = np.argsort(timestamps, kind="stable")
    timestamps = timestamps[order]

    columns: dict[str, np.ndarray] = {}
    for name in (c for c in raw.columns if c != timestamp_col):
        series = raw[name].iloc[order].reset_index(drop=True)
        numeric = pd.to_numeric(series.replace("", None), errors="coerce")
        non_empty = series.str.strip() != ""
        if non_empty.any() and numeric[non_empty].notna().all():
            columns[name] = numeric.to_numpy(dtype=np.float64)
        else:
            columns[name] = _categorical_array(series)

    if target_col is None:
        # transform-only flows just need some numeric column as the nominal target
        numeric_names = [n for n, v in columns.items() if v.dtype == np.float64]
        if not numeric_names:
            raise ValueError("no numeric column available to stand in as target")
        target_col = numeric_names[0]
    elif target_col not in columns:
        raise ValueError(f"target column {target_col!r} not in CSV")

    return TimeFrame(
        timestamps=timestamps,
        columns=columns,
        target_name=target_col,
        horizon=horizon,
        group_keys=frozenset(n for n, v in columns.items() if v.dtype != np.float64),
    )


def attach_target_lag(frame: TimeFrame) -> TimeFrame:
    """Append TARGET_LAG_COLUMN = target shifted down by the frame's horizon.

    Row t gets y[t - horizon]; the first `horizon` rows are NaN.
    """
    if TARGET_LAG_COLUMN in frame.columns:
        raise ValueError(f"{TARGET_LAG_COLUMN} already attached")
    h = frame.horizon
    lagged = np.full(frame.m, np.nan)
    if frame.m > h:
        lagged[h:] = frame.target[:-h]
    return frame.with_columns({TARGET_LAG_COLUMN: lagged})


@dataclass(frozen=True)
class SplitSpec:
    """Row boundaries of a chronological train/validation/test split.

    Ends are exclusive: train = [0, train_end), validation =
    [train_end, validation_end), test = [validation_end, test_end).
    """

    train_end: int
    validation_end: int
    test_end: int
    fold_count: int = 5

    def __post_init__(self):
        if not (0 < self.train_end < self.validation_end < self.test_end):
            raise ValueError("split boundaries must be strictly increasing and non-empty")
        if self.fold_count < 1:
            raise ValueError("fold_count must be >= 1")


def chronological_split(
    frame: TimeFrame, test_frac: float = 0.10, val_frac: float = 0.10, fold_count: int = 5
) -> SplitSpec:
    """Split on distinct timestamp values: the last `test_frac` of dates are
    test, the previous `val_frac` are validation. Rows sharing a date never
    straddle a boundary.
    """
    if not (0 < test_frac < 1 and 0 < val_frac < 1 and test_frac + val_frac < 1):
        raise ValueError("fractions must be in (0,1) and sum below 1")
    dates = np.unique(frame.timestamps)
    d = len(dates)
    if d < 3:
        raise ValueError(f"need at least 3 distinct dates, got {d}")
    n_test = max(1, math.floor(d * test_frac))
    n_val = max(1, math.floor(d * val_frac))
    n_train = d - n_val - n_test
    if n_train < 1:
        raise ValueError("split leaves no training dates")
    train_end = int(np.searchsorted(frame.timestamps, dates[n_train], side="left"))
    validation_end = int(np.searchsorted(frame.timestamps, dates[n_train + n_val], side="left"))
    return SplitSpec(
        train_end=train_end,
        validation_end=validation_end,
        test_end=frame.m,
        fold_count=fold_count,
    )


class Fold(NamedTuple):
    train: tuple[int, int]  # [start, stop) rows used for fitting
    eval: tuple[int, int]  # [start, stop) rows scored


def walk_forward_folds(
    eval_start: int, eval_end: int, fold_count: int, train_start: int = 0
) -> list[Fold]:
    """Expanding-window folds over [eval_start, eval_end).

    The evaluation range is cut into `fold_count` contiguous blocks in time
    order; fold k trains on every row before its block.
    """
    if fold_count < 1:
        raise ValueError("fold_count must be >= 1")
    n_eval = eval_end - eval_start
    if n_eval < fold_count:
        raise ValueError(f"evaluation range has {n_eval} rows, fewer than {fold_count} folds")
    if eval_start - train_start < 1:
        raise ValueError("no training rows before the evaluation range")
    blocks = np.array_split(np.arange(eval_start, eval_end), fold_count)
    folds = []
    for block in blocks:
        start, stop = int(block[0]), int(block[-1]) + 1
        folds.append(Fold(train=(train_start, start), eval=(start, stop)))
    return folds


def describe_frame(frame: TimeFrame) -> DatasetDescription:
    """Synthesize a minimal description from a frame (fallback when the
    caller has no description file)."""
    lines = []
    for name, kind in frame.schema().items():
        values = frame.columns[name]
        if kind == "numeric":
            has_nan = bool(np.isnan(values).any())
        else:
            has_nan = any(isinstance(v, float) and math.isnan(v) for v in values)
        lines.append(f"{name} ({kind}, nan={'yes' if has_nan else 'no'}): no description available")
    text = "Dataset columns:\n" + "\n".join(lines)
    return parse_description(text)
