"""Population filters that cut a candidate pool down to a kept feature set.

Two strategies are provided. The Shapley filter repeatedly fits a boosted
tree model on the base columns plus every surviving candidate, aggregates
normalized attribution magnitudes across walk-forward folds, removes
candidates that are nearly collinear with a better-scoring survivor, and
drops the weakest tenth of the pool until the target size is reached. The
significance filter skips model training entirely and keeps the candidates
with the smallest multiplicity-adjusted rank-correlation p-values.

Candidates are duck-typed: each must expose ``name``, ``program`` and
``created_seq`` attributes, plus ``pvalue`` for the significance filter.
All filters preserve the input order of survivors; ranking only decides
who survives, and ties always favor the earlier-created candidate.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .data import Fold, TimeFrame
from .dsl import execute
from .evaluators import benjamini_yekutieli
from .model import (
    BACKGROUND_CAP,
    GbtParams,
    design_matrix,
    fit_gbt,
    tree_shap,
    uniform_background,
)

CORRELATION_LIMIT = 0.9
PRUNE_DIVISOR = 10  # each round drops floor(n / 10) candidates, at least one


def prune_schedule(start: int, keep: int) -> list[int]:
    """Population size after each drop round, correlation pruning aside.

    Every round removes min(max(1, n // 10), n - keep) candidates, so the
    pool never undershoots the target.
    """
    if start < 1 or keep < 1:
        raise ValueError("sizes must be positive")
    sizes = [start]
    n = start
    while n > keep:
        n -= min(max(1, n // PRUNE_DIVISOR), n - keep)
        sizes.append(n)
    return sizes


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pairwise-complete correlation; 0.0 when degenerate or constant."""
    keep = np.isfinite(a) & np.isfinite(b)
    if keep.sum() < 2:
        return 0.0
    x = a[keep]
    y = b[keep]
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))


def aggregate_shap_importance(
    frame: TimeFrame,
    candidates: Sequence,
    folds: Sequence[Fold],
    params: GbtParams = GbtParams(),
    background_cap: int = BACKGROUND_CAP,
) -> dict[str, float]:
    """Mean share of attribution mass each candidate earns on held-out rows.

    Per fold, a model is fit on base columns plus all candidates over the
    training range (raw values; the model imputes) and Shapley values are
    computed for the evaluation block against up to ``background_cap``
    uniformly spaced training rows. Each evaluation row's absolute
    attributions are normalized to sum to one across candidate columns
    only, then averaged over rows and folds. Base columns anchor the model
    but never compete for importance.
    """
    if not candidates:
        raise ValueError("no candidates given")
    if not folds:
        raise ValueError("no folds given")
    programs = [c.program for c in candidates]
    X, names = design_matrix(frame, programs)
    positions = {name: i for i, name in enumerate(names)}
    cand_idx = np.array([positions[c.name] for c in candidates])
    y = np.asarray(frame.target, dtype=np.float64)

    fold_means: list[np.ndarray] = []
    for (train_start, train_end), (eval_start, eval_end) in folds:
        if eval_end <= eval_start:
            continue
        keep_train = ~np.isnan(y[train_start:train_end])
        X_train = X[train_start:train_end][keep_train]
        y_train = y[train_start:train_end][keep_train]
        if len(y_train) == 0:
            raise ValueError("fold has no usable training rows")
        X_eval = X[eval_start:eval_end].copy()

        unobserved = np.all(np.isnan(X_train), axis=0)
        if unobserved.any():
            X_train[:, unobserved] = 0.0
            X_eval[:, unobserved] = 0.0

        model = fit_gbt(X_train, y_train, params, feature_names=names)
        background = uniform_background(X_train, background_cap)
        shap = tree_shap(model, X_eval, background, background_cap)
        magnitude = np.abs(shap.values[:, cand_idx])
        totals = magnitude.sum(axis=1, keepdims=True)
        share = np.divide(
            magnitude, totals, out=np.zeros_like(magnitude), where=totals > 0
        )
        fold_means.append(share.mean(axis=0))

    if not fold_means:
        raise ValueError("no evaluable rows in any fold")
    mean_share = np.mean(fold_means, axis=0)
    return {c.name: float(mean_share[i]) for i, c in enumerate(candidates)}


def prune_correlated(
    frame: TimeFrame,
    candidates: Sequence,
    importance: dict[str, float],
    limit: float = CORRELATION_LIMIT,
) -> list:
    """Drop candidates nearly collinear with a more important survivor.

    Candidates are scanned in descending importance (earlier creation wins
    ties) and kept only when their values stay within the correlation limit
    against every candidate kept so far, so of any correlated cluster the
    best-ranked member survives.
    """
    ordered = sorted(
        candidates, key=lambda c: (-importance.get(c.name, 0.0), c.created_seq)
    )
    kept_names: set[str] = set()
    kept_values: list[np.ndarray] = []
    for cand in ordered:
        values = np.asarray(execute(cand.program, frame), dtype=np.float64)
        if all(abs(_pearson(values, other)) <= limit for other in kept_values):
            kept_names.add(cand.name)
            kept_values.append(values)
    return [c for c in candidates if c.name in kept_names]


def shap_filter(
    frame: TimeFrame,
    candidates: Sequence,
    folds: Sequence[Fold],
    keep: int,
    params: GbtParams = GbtParams(),
    correlation_limit: float = CORRELATION_LIMIT,
    background_cap: int = BACKGROUND_CAP,
) -> list:
    """Shrink the pool to at most ``keep`` candidates by attribution rank.

    Each round recomputes importance from scratch on the current pool,
    removes correlated duplicates, and then drops the weakest tenth
    (clamped so the pool never falls below ``keep``). Correlation pruning
    may legitimately land below ``keep``; the size target only bounds the
    drop step.
    """
    if keep < 1:
        raise ValueError("keep must be positive")
    population = list(candidates)
    while len(population) > keep:
        importance = aggregate_shap_importance(
            frame, population, folds, params, background_cap
        )
        population = prune_correlated(frame, population, importance, correlation_limit)
        if len(population) <= keep:
            break
        cut = min(max(1, len(population) // PRUNE_DIVISOR), len(population) - keep)
        ranked = sorted(
            population, key=lambda c: (-importance[c.name], c.created_seq)
        )
        dropped = {c.name for c in ranked[len(ranked) - cut :]}
        population = [c for c in population if c.name not in dropped]
    return population


def fresh_filter(candidates: Sequence, keep: int) -> list:
    """Keep the ``keep`` candidates with the smallest adjusted p-values.

    P-values are adjusted for multiplicity with the dependence-safe
    Benjamini-Yekutieli correction before ranking; ties favor earlier
    creation. No models are trained. Raises if any candidate lacks a
    stored p-value.
    """
    if keep < 1:
        raise ValueError("keep must be positive")
    population = list(candidates)
    if len(population) <= keep:
        return population
    raw = []
    for cand in population:
        if cand.pvalue is None:
            raise ValueError(f"candidate {cand.name!r} has no stored p-value")
        raw.append(cand.pvalue)
    adjusted = benjamini_yekutieli(np.asarray(raw, dtype=np.float64))
    ranked = sorted(
        range(len(population)),
        key=lambda i: (adjusted[i], population[i].created_seq),
    )
    winners = set(ranked[:keep])
    return [c for i, c in enumerate(population) if i in winners]
