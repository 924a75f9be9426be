"""Relevance scores between a candidate feature series and the target.

Two evaluators: a lag-based linear predictability test (Granger-style OLS
F-test, returning |b1| when significant) and a Kraskov k-nearest-neighbor
mutual information estimate. Their arithmetic mean is the feature's score; a
feature is dead when every component is zero. A Kendall tau-b p-value and a
Benjamini-Yekutieli adjustment support the significance-test filter mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree
from scipy.special import digamma

GRANGER_ALPHA = 0.05
GRANGER_MIN_POINTS_PER_LAG = 10
GRANGER_MIN_EXTRA_POINTS = 20
MI_MIN_POINTS = 50
MI_NEIGHBORS = 3
KENDALL_MIN_POINTS = 30


@dataclass(frozen=True)
class EvalScore:
    """Per-evaluator values plus their arithmetic mean."""

    per_evaluator: dict[str, float]

    @property
    def mean(self) -> float:
        values = list(self.per_evaluator.values())
        return float(sum(values) / len(values))

    @property
    def is_dead(self) -> bool:
        return all(v == 0.0 for v in self.per_evaluator.values())


def _aligned(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise-complete finite observations, as float64 arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("series lengths differ")
    keep = np.isfinite(x) & np.isfinite(y)
    return x[keep], y[keep]


def _is_constant(a: np.ndarray) -> bool:
    return a.size == 0 or bool(np.all(a == a[0]))


def _minmax(a: np.ndarray) -> np.ndarray:
    lo, hi = a.min(), a.max()
    return (a - lo) / (hi - lo)


def _lag_matrix(a: np.ndarray, lags: int) -> np.ndarray:
    """Columns a[t-1], ..., a[t-lags] for t = lags..n-1."""
    return np.column_stack([a[lags - k : len(a) - k] for k in range(1, lags + 1)])


def granger_score(x, y, lags: int = 4) -> float:
    """Linear lag-predictability of y from x.

    Fits y_t on an intercept and p lags of y (restricted) versus an intercept,
    p lags of y, and p lags of x (unrestricted); compares residual sums of
    squares with an F test on (p, n - 2p) degrees of freedom. Returns 0 when
    the test is not significant at 0.05 (or on degenerate input), otherwise
    |b1|, the magnitude of the first x-lag coefficient. Never raises on
    numeric content.
    """
    if lags < 1:
        raise ValueError("lags must be >= 1")
    x, y = _aligned(x, y)
    n_points = len(x)
    if n_points < GRANGER_MIN_POINTS_PER_LAG * lags + GRANGER_MIN_EXTRA_POINTS:
        return 0.0
    if _is_constant(x) or _is_constant(y):
        return 0.0

    y_t = y[lags:]
    n = len(y_t)
    intercept = np.ones((n, 1))
    y_lags = _lag_matrix(y, lags)
    x_lags = _lag_matrix(x, lags)
    restricted = np.hstack([intercept, y_lags])
    unrestricted = np.hstack([intercept, y_lags, x_lags])

    beta_r, _, rank_r, _ = np.linalg.lstsq(restricted, y_t, rcond=None)
    beta_u, _, rank_u, _ = np.linalg.lstsq(unrestricted, y_t, rcond=None)
    if rank_r < restricted.shape[1] or rank_u < unrestricted.shape[1]:
        return 0.0

    rss_restricted = float(np.sum((y_t - restricted @ beta_r) ** 2))
    rss_unrestricted = float(np.sum((y_t - unrestricted @ beta_u) ** 2))
    df2 = n - 2 * lags
    if df2 <= 0:
        return 0.0
    improvement = max(rss_restricted - rss_unrestricted, 0.0)
    if rss_unrestricted <= 0.0:
        p_value = 0.0 if improvement > 0.0 else 1.0
    else:
        f_stat = (improvement / lags) / (rss_unrestricted / df2)
        p_value = float(stats.f.sf(f_stat, lags, df2))
    if p_value >= GRANGER_ALPHA:
        return 0.0
    b1 = beta_u[1 + lags]  # first x-lag coefficient
    return float(abs(b1))


def mi_score(x, y, k: int = MI_NEIGHBORS) -> float:
    """Kraskov KSG-1 mutual information estimate in nats, clamped at 0.

    Both marginals are min-max normalized first, so the estimate is
    bit-identical under shifts and positive rescalings of either input.
    Returns 0 on insufficient data or a constant series.
    """
    x, y = _aligned(x, y)
    n = len(x)
    if n < MI_MIN_POINTS or _is_constant(x) or _is_constant(y):
        return 0.0
    x = _minmax(x)
    y = _minmax(y)

    points = np.column_stack([x, y])
    tree = cKDTree(points)
    # k+1 because each point is its own nearest neighbor
    dist, _ = tree.query(points, k=k + 1, p=np.inf)
    eps = dist[:, k]

    nx = _strict_radius_counts(x, eps)
    ny = _strict_radius_counts(y, eps)
    estimate = (
        digamma(k)
        + digamma(n)
        - float(np.mean(digamma(nx + 1) + digamma(ny + 1)))
    )
    return max(float(estimate), 0.0)


def _strict_radius_counts(values: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """For each i, count j != i with |values[j] - values[i]| < eps[i]."""
    order = np.sort(values)
    hi = np.searchsorted(order, values + eps, side="left")
    lo = np.searchsorted(order, values - eps, side="right")
    return np.maximum(hi - lo - 1, 0)


def combined_score(x, y, lags: int = 4) -> EvalScore:
    """Score a feature series against the target with both evaluators.

    The feature series is min-max normalized to [0,1] first so the Granger
    |b1| component lives on a scale comparable to the MI component.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    finite = x[np.isfinite(x)]
    if finite.size and not _is_constant(finite):
        lo, hi = finite.min(), finite.max()
        x = (x - lo) / (hi - lo)
    return EvalScore(
        per_evaluator={
            "granger": granger_score(x, y, lags=lags),
            "mi": mi_score(x, y),
        }
    )


def kendall_pvalue(x, y) -> float:
    """Two-sided Kendall tau-b p-value via the tie-corrected normal
    approximation. Returns 1.0 on constant series or fewer than 30 pairs."""
    x, y = _aligned(x, y)
    if len(x) < KENDALL_MIN_POINTS or _is_constant(x) or _is_constant(y):
        return 1.0
    result = stats.kendalltau(x, y, method="asymptotic")
    p_value = float(result.pvalue)
    if np.isnan(p_value):
        return 1.0
    return p_value


def benjamini_yekutieli(p_values) -> np.ndarray:
    """Benjamini-Yekutieli adjusted p-values (any dependency structure).

    adj_(i) = min over j >= rank(i) of min(1, p_(j) * m * c(m) / j) with
    c(m) = sum_{k=1..m} 1/k; input order is preserved in the output.
    """
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("p_values must be a non-empty 1-d sequence")
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    c_m = float(np.sum(1.0 / np.arange(1, m + 1)))
    order = np.argsort(p, kind="stable")
    ranked = p[order]
    scaled = np.minimum(ranked * m * c_m / np.arange(1, m + 1), 1.0)
    # enforce monotonicity from the largest rank down
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = adjusted
    return out
