"""Evolutionary LLM-assisted feature engineering for time-series forecasting."""

from . import dsl
from .config import EngineConfig, load_config, parse_config
from .data import (
    TARGET_LAG_COLUMN,
    DatasetDescription,
    Fold,
    SplitSpec,
    TimeFrame,
    attach_target_lag,
    chronological_split,
    describe_frame,
    load_csv,
    load_csv_inferred,
    load_description,
    parse_description,
    walk_forward_folds,
)
from .dsl import GRAMMAR_REFERENCE, execute, parse, validate
from .engine import (
    Elate,
    GenerationStats,
    RunReport,
    build_zero_shot_prompt,
    execute_feature_set,
    run_fit,
    run_transform,
    run_zero_shot,
)
from .evaluators import (
    EvalScore,
    benjamini_yekutieli,
    combined_score,
    granger_score,
    kendall_pvalue,
    mi_score,
)
from .featuredb import (
    DEFAULT_SEED_SOURCES,
    DEFAULT_TEMPLATE,
    FeatureDb,
    FeatureSpec,
    temperature,
)
from .filters import (
    aggregate_shap_importance,
    fresh_filter,
    prune_correlated,
    prune_schedule,
    shap_filter,
)
from .io import (
    format_feature_set,
    parse_feature_set,
    read_feature_set,
    write_feature_set,
)
from .llm import HttpChatBackend, LlmError, MockBackend, TokenUsage, extract_code
from .model import (
    GbtModel,
    GbtParams,
    ShapMatrix,
    design_matrix,
    fit_gbt,
    predict,
    tree_shap,
    walk_forward_score,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_SEED_SOURCES",
    "DEFAULT_TEMPLATE",
    "DatasetDescription",
    "Elate",
    "EngineConfig",
    "EvalScore",
    "FeatureDb",
    "FeatureSpec",
    "Fold",
    "GRAMMAR_REFERENCE",
    "GbtModel",
    "GbtParams",
    "GenerationStats",
    "HttpChatBackend",
    "LlmError",
    "MockBackend",
    "RunReport",
    "ShapMatrix",
    "SplitSpec",
    "TARGET_LAG_COLUMN",
    "TimeFrame",
    "TokenUsage",
    "aggregate_shap_importance",
    "attach_target_lag",
    "benjamini_yekutieli",
    "build_zero_shot_prompt",
    "chronological_split",
    "combined_score",
    "describe_frame",
    "design_matrix",
    "dsl",
    "execute",
    "execute_feature_set",
    "extract_code",
    "fit_gbt",
    "format_feature_set",
    "fresh_filter",
    "granger_score",
    "kendall_pvalue",
    "load_config",
    "load_csv",
    "load_csv_inferred",
    "load_description",
    "mi_score",
    "parse",
    "parse_config",
    "parse_description",
    "parse_feature_set",
    "predict",
    "prune_correlated",
    "prune_schedule",
    "read_feature_set",
    "run_fit",
    "run_transform",
    "run_zero_shot",
    "shap_filter",
    "temperature",
    "tree_shap",
    "validate",
    "walk_forward_folds",
    "walk_forward_score",
    "write_feature_set",
]
