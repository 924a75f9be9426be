"""Gradient boosted trees, walk-forward scoring, and Shapley attribution."""

from .boosting import (
    GbtModel,
    GbtParams,
    Tree,
    WalkForwardResult,
    design_matrix,
    fit_gbt,
    predict,
    regression_errors,
    walk_forward_score,
)
from .shap import (
    BACKGROUND_CAP,
    ShapMatrix,
    tree_shap,
    uniform_background,
)

__all__ = [
    "BACKGROUND_CAP",
    "GbtModel",
    "GbtParams",
    "ShapMatrix",
    "Tree",
    "WalkForwardResult",
    "design_matrix",
    "fit_gbt",
    "predict",
    "regression_errors",
    "tree_shap",
    "uniform_background",
    "walk_forward_score",
]
