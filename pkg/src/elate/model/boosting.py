"""Squared-error gradient-boosted trees built from scratch.

Exact greedy splits on presorted features, mean-residual leaf values,
median imputation fitted on the training fold. Deterministic: ties in split
gain resolve to the lowest feature index, then the earliest position.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..data import Fold, TimeFrame
from ..dsl import execute
from ..dsl.nodes import DslProgram

_GAIN_EPS = 1e-12


@dataclass(frozen=True)
class GbtParams:
    n_trees: int = 100
    max_depth: int = 4
    learning_rate: float = 0.1
    min_samples_leaf: int = 20

    def __post_init__(self):
        if self.n_trees < 0 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("invalid boosting parameters")
        if not (0 < self.learning_rate <= 1):
            raise ValueError("learning_rate must be in (0, 1]")


@dataclass
class Tree:
    feature: np.ndarray  # int32; -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # leaf predictions (raw residual means)


@dataclass
class GbtModel:
    trees: list[Tree]
    base_score: float
    learning_rate: float
    impute_values: np.ndarray
    feature_names: tuple[str, ...] = ()

    @property
    def n_features(self) -> int:
        return len(self.impute_values)


class _TreeBuilder:
    def __init__(self, X, residuals, sort_idx, params: GbtParams):
        self.X = X
        self.r = residuals
        self.sort_idx = sort_idx
        self.params = params
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def build(self, mask: np.ndarray) -> int:
        return self._grow(mask, depth=0)

    def _grow(self, mask: np.ndarray, depth: int) -> int:
        node = self._new_node()
        n_node = int(mask.sum())
        min_leaf = self.params.min_samples_leaf
        if depth >= self.params.max_depth or n_node < 2 * min_leaf:
            self.value[node] = float(self.r[mask].mean())
            return node

        best_gain = _GAIN_EPS
        best: tuple[int, float] | None = None
        for j in range(self.X.shape[1]):
            order = self.sort_idx[:, j]
            sel = order[mask[order]]
            v = self.X[sel, j]
            rs = self.r[sel]
            total = rs.sum()
            left_sizes = np.arange(1, n_node)
            left_sums = np.cumsum(rs)[:-1]
            valid = (
                (left_sizes >= min_leaf)
                & (n_node - left_sizes >= min_leaf)
                & (v[1:] > v[:-1])
            )
            if not valid.any():
                continue
            right_sizes = n_node - left_sizes
            with np.errstate(invalid="ignore"):
                gains = (
                    left_sums**2 / left_sizes
                    + (total - left_sums) ** 2 / right_sizes
                    - total**2 / n_node
                )
            gains = np.where(valid, gains, -np.inf)
            pos = int(np.argmax(gains))
            if gains[pos] > best_gain:
                best_gain = float(gains[pos])
                threshold = (v[pos] + v[pos + 1]) / 2.0
                if not (v[pos] < threshold):  # adjacent floats: midpoint collapsed
                    threshold = v[pos + 1]
                best = (j, threshold)

        if best is None:
            self.value[node] = float(self.r[mask].mean())
            return node

        j, threshold = best
        self.feature[node] = j
        self.threshold[node] = threshold
        go_left = mask & (self.X[:, j] < threshold)
        self.left[node] = self._grow(go_left, depth + 1)
        self.right[node] = self._grow(mask & ~go_left, depth + 1)
        return node

    def to_tree(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
        )


def fit_gbt(
    X,
    y,
    params: GbtParams = GbtParams(),
    feature_names: Sequence[str] | None = None,
) -> GbtModel:
    """Fit a boosted ensemble of regression trees on (X, y).

    NaN cells are imputed with per-column training medians (kept on the model
    for prediction and SHAP backgrounds). A constant target yields a
    base-score-only model with zero trees.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    n, d = X.shape
    if n == 0 or d == 0:
        raise ValueError("empty training set")
    if len(y) != n:
        raise ValueError("X and y row counts differ")
    if not np.isfinite(y).all():
        raise ValueError("target contains non-finite values")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        medians = np.nanmedian(X, axis=0)
    if not np.isfinite(medians).all():
        bad = [i for i in range(d) if not np.isfinite(medians[i])]
        raise ValueError(f"columns with no observed values: {bad}")
    X = np.where(np.isnan(X), medians, X)

    base = float(y.mean())
    names = tuple(feature_names) if feature_names is not None else ()
    model = GbtModel(
        trees=[],
        base_score=base,
        learning_rate=params.learning_rate,
        impute_values=medians,
        feature_names=names,
    )
    if np.all(y == y[0]) or n < 2 * params.min_samples_leaf:
        return model

    sort_idx = np.argsort(X, axis=0, kind="stable")
    pred = np.full(n, base)
    all_rows = np.ones(n, dtype=bool)
    for _ in range(params.n_trees):
        builder = _TreeBuilder(X, y - pred, sort_idx, params)
        builder.build(all_rows)
        tree = builder.to_tree()
        model.trees.append(tree)
        pred += params.learning_rate * _predict_tree(tree, X)
    return model


def _predict_tree(tree: Tree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(len(X), dtype=np.int32)
    while True:
        feats = tree.feature[node]
        internal = feats >= 0
        if not internal.any():
            break
        rows = np.flatnonzero(internal)
        cur = node[rows]
        go_left = X[rows, tree.feature[cur]] < tree.threshold[cur]
        node[rows] = np.where(go_left, tree.left[cur], tree.right[cur])
    return tree.value[node]


def predict(model: GbtModel, X) -> np.ndarray:
    """Ensemble prediction: base score plus learning-rate-scaled tree sums."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"X must have {model.n_features} columns")
    X = np.where(np.isnan(X), model.impute_values, X)
    out = np.full(len(X), model.base_score)
    for tree in model.trees:
        out += model.learning_rate * _predict_tree(tree, X)
    return out


def design_matrix(
    frame: TimeFrame, programs: Sequence[DslProgram] = ()
) -> tuple[np.ndarray, list[str]]:
    """Model inputs: base numeric columns (target excluded) then one column
    per program, executed over the full frame. Non-finite values become NaN
    so downstream imputation handles them."""
    names = [n for n in frame.numeric_names() if n != frame.target_name]
    columns = [frame.columns[n] for n in names]
    for program in programs:
        if program.feature_name in names:
            raise ValueError(f"duplicate feature column {program.feature_name!r}")
        columns.append(execute(program, frame))
        names.append(program.feature_name)
    if not columns:
        raise ValueError("no model inputs: frame has no numeric feature columns")
    X = np.column_stack(columns).astype(np.float64)
    X[~np.isfinite(X)] = np.nan
    return X, names


@dataclass
class WalkForwardResult:
    rmse: float
    mae: float
    fold_scores: list[tuple[float, float]] = field(default_factory=list)


def _train_scaling(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Min-max statistics per column; constant or unobserved columns scale
    to zero via a unit range and matching offset."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        lo = np.nanmin(values, axis=0)
        hi = np.nanmax(values, axis=0)
    lo = np.where(np.isfinite(lo), lo, 0.0)
    hi = np.where(np.isfinite(hi), hi, 0.0)
    rng = hi - lo
    rng = np.where(rng > 0, rng, 1.0)
    return lo, rng


def walk_forward_score(
    frame: TimeFrame,
    programs: Sequence[DslProgram],
    folds: Sequence[Fold],
    params: GbtParams = GbtParams(),
) -> WalkForwardResult:
    """Expanding-window evaluation of base + program features.

    Each fold fits on its training range and predicts its evaluation block;
    target and features are min-max scaled with that fold's training
    statistics only, and errors are pooled across folds in scaled space.
    """
    if not folds:
        raise ValueError("no folds given")
    X, names = design_matrix(frame, programs)
    y = np.asarray(frame.target, dtype=np.float64)

    sq_all: list[np.ndarray] = []
    abs_all: list[np.ndarray] = []
    fold_scores: list[tuple[float, float]] = []
    for (train_start, train_end), (eval_start, eval_end) in folds:
        train = slice(train_start, train_end)
        keep_train = ~np.isnan(y[train])
        X_train = X[train][keep_train]
        y_train = y[train][keep_train]
        if len(y_train) == 0:
            raise ValueError("fold has no usable training rows")

        x_lo, x_rng = _train_scaling(X_train)
        y_lo, y_rng = _train_scaling(y_train[:, None])
        X_train_s = (X_train - x_lo) / x_rng
        y_train_s = (y_train - y_lo[0]) / y_rng[0]

        eval_rows = slice(eval_start, eval_end)
        keep_eval = ~np.isnan(y[eval_rows])
        X_eval_s = (X[eval_rows][keep_eval] - x_lo) / x_rng
        y_eval_s = (y[eval_rows][keep_eval] - y_lo[0]) / y_rng[0]

        # a column can be entirely unobserved on an early fold (window longer
        # than the training range): carry it as zeros rather than failing
        unobserved = np.all(np.isnan(X_train_s), axis=0)
        if unobserved.any():
            X_train_s[:, unobserved] = 0.0
            X_eval_s[:, unobserved] = 0.0

        model = fit_gbt(X_train_s, y_train_s, params, feature_names=names)
        if len(y_eval_s) == 0:
            continue
        pred = predict(model, X_eval_s)
        err = pred - y_eval_s
        sq_all.append(err**2)
        abs_all.append(np.abs(err))
        fold_scores.append(
            (float(np.sqrt(np.mean(err**2))), float(np.mean(np.abs(err))))
        )

    if not sq_all:
        raise ValueError("no evaluable rows in any fold")
    sq = np.concatenate(sq_all)
    ab = np.concatenate(abs_all)
    return WalkForwardResult(
        rmse=float(np.sqrt(sq.mean())), mae=float(ab.mean()), fold_scores=fold_scores
    )


def regression_errors(y_true, y_pred) -> tuple[float, float]:
    """(RMSE, MAE) over finite pairs."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    keep = np.isfinite(y_true) & np.isfinite(y_pred)
    if not keep.any():
        raise ValueError("no finite pairs")
    err = y_pred[keep] - y_true[keep]
    return float(np.sqrt(np.mean(err**2))), float(np.mean(np.abs(err)))
