"""Exact interventional Shapley values for boosted tree ensembles.

For each (tree, background row) pair the coalition game is
v(S) = tree(x_S combined with z outside S). A leaf is reached exactly when
every path feature where only x satisfies the splits is inside the coalition
and every feature where only z satisfies them is outside; features both
points satisfy are free. With a x-only features and b z-only features on a
leaf's path, the leaf's value contributes weight a!*b!/(a+b+1)! per member,
positive through x-only features and negative through z-only ones. Summing
leaves and averaging over the background gives exact Shapley values of the
interventional game; phi rows sum to model(x) minus the mean background
prediction (checked on every call).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .boosting import GbtModel, Tree, predict

BACKGROUND_CAP = 100
LOCAL_ACCURACY_TOL = 1e-6


@dataclass
class ShapMatrix:
    values: np.ndarray  # (n_foreground, n_features)
    base_value: float  # mean model prediction over the background
    feature_names: tuple[str, ...] = ()


def _coalition_weights(max_count: int) -> np.ndarray:
    """W[a, b] = a! * b! / (a + b + 1)!"""
    size = max_count + 1
    table = np.empty((size, size))
    for a in range(size):
        for b in range(size):
            table[a, b] = factorial(a) * factorial(b) / factorial(a + b + 1)
    return table


def _leaf_paths(tree: Tree) -> list[tuple[float, list[tuple[int, float, bool]]]]:
    paths: list[tuple[float, list[tuple[int, float, bool]]]] = []

    def walk(node: int, conds: list[tuple[int, float, bool]]):
        feat = int(tree.feature[node])
        if feat < 0:
            paths.append((float(tree.value[node]), list(conds)))
            return
        threshold = float(tree.threshold[node])
        conds.append((feat, threshold, True))
        walk(int(tree.left[node]), conds)
        conds.pop()
        conds.append((feat, threshold, False))
        walk(int(tree.right[node]), conds)
        conds.pop()

    walk(0, [])
    return paths


def _satisfies(points: np.ndarray, conds: list[tuple[float, bool]], feat: int) -> np.ndarray:
    """Whether each point passes every split on `feat` along one path."""
    ok = np.ones(len(points), dtype=bool)
    for threshold, go_left in conds:
        side = points[:, feat] < threshold
        ok &= side if go_left else ~side
    return ok


def uniform_background(X: np.ndarray, cap: int = BACKGROUND_CAP) -> np.ndarray:
    """Up to `cap` uniformly spaced rows of X, in row order."""
    if len(X) <= cap:
        return X
    idx = np.unique(np.round(np.linspace(0, len(X) - 1, cap)).astype(int))
    return X[idx]


def tree_shap(
    model: GbtModel,
    foreground,
    background,
    background_cap: int = BACKGROUND_CAP,
) -> ShapMatrix:
    """Interventional Shapley values of `model` at each foreground row.

    `background` supplies the off-coalition feature values; above
    `background_cap` rows it is thinned to uniformly spaced rows. NaNs in
    either input are imputed with the model's training medians, matching
    training. Raises AssertionError if local accuracy degrades beyond 1e-6.
    """
    fg = np.asarray(foreground, dtype=np.float64)
    bg = np.asarray(background, dtype=np.float64)
    if fg.ndim != 2 or bg.ndim != 2:
        raise ValueError("foreground and background must be 2-dimensional")
    if fg.shape[1] != model.n_features or bg.shape[1] != model.n_features:
        raise ValueError(f"inputs must have {model.n_features} columns")
    if len(bg) == 0:
        raise ValueError("background is empty")
    fg = np.where(np.isnan(fg), model.impute_values, fg)
    bg = np.where(np.isnan(bg), model.impute_values, bg)
    bg = uniform_background(bg, background_cap)

    n_fg, d = fg.shape
    n_bg = len(bg)
    phi = np.zeros((n_fg, d))
    weights = _coalition_weights(_max_distinct_path_features(model))
    lr = model.learning_rate

    for tree in model.trees:
        for leaf_value, conds in _leaf_paths(tree):
            if not conds:  # single-leaf tree: constant shift, no attribution
                continue
            by_feat: dict[int, list[tuple[float, bool]]] = {}
            for feat, threshold, go_left in conds:
                by_feat.setdefault(feat, []).append((threshold, go_left))
            feats = sorted(by_feat)
            x_ok = np.stack([_satisfies(fg, by_feat[f], f) for f in feats])
            z_ok = np.stack([_satisfies(bg, by_feat[f], f) for f in feats])

            x_pair = x_ok[:, :, None]  # (F, n_fg, 1)
            z_pair = z_ok[:, None, :]  # (F, 1, n_bg)
            x_only = x_pair & ~z_pair  # (F, n_fg, n_bg)
            z_only = ~x_pair & z_pair
            dead = (~x_pair & ~z_pair).any(axis=0)
            alive = ~dead
            if not alive.any():
                continue
            a = x_only.sum(axis=0)
            b = z_only.sum(axis=0)
            w_x = weights[np.maximum(a - 1, 0), b]
            w_z = weights[a, np.maximum(b - 1, 0)]
            scale = lr * leaf_value / n_bg
            for fi, feat in enumerate(feats):
                xo = x_only[fi] & alive
                zo = z_only[fi] & alive
                if xo.any():
                    phi[:, feat] += scale * (w_x * xo).sum(axis=1)
                if zo.any():
                    phi[:, feat] -= scale * (w_z * zo).sum(axis=1)

    base_value = float(predict(model, bg).mean())
    reconstructed = base_value + phi.sum(axis=1)
    gap = float(np.max(np.abs(reconstructed - predict(model, fg)))) if n_fg else 0.0
    if gap >= LOCAL_ACCURACY_TOL:
        raise AssertionError(f"local accuracy violated: max gap {gap:.3e}")
    return ShapMatrix(values=phi, base_value=base_value, feature_names=model.feature_names)


def _max_distinct_path_features(model: GbtModel) -> int:
    """Longest root-to-leaf path over the ensemble bounds distinct features."""
    deepest = 0
    for tree in model.trees:
        depth = np.zeros(len(tree.feature), dtype=int)
        for node in range(len(tree.feature)):
            if tree.feature[node] >= 0:
                depth[tree.left[node]] = depth[node] + 1
                depth[tree.right[node]] = depth[node] + 1
        if len(depth):
            deepest = max(deepest, int(depth.max()))
    return deepest
