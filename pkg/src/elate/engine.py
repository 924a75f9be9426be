"""The evolutionary feature-engineering engine and its run-level entry points.

``Elate`` is a scikit-learn style estimator: ``fit`` runs the full
propose-evaluate-filter loop against a time frame, ``transform`` executes
the best feature set on any compatible frame. ``run_fit``/``run_transform``
wrap the estimator with file loading, chronological splitting, held-out
test scoring, and persistence for the command line.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import EngineConfig
from .data import (
    TARGET_LAG_COLUMN,
    TimeFrame,
    attach_target_lag,
    chronological_split,
    describe_frame,
    load_csv,
    load_csv_inferred,
    walk_forward_folds,
)
from .dsl import (
    GRAMMAR_REFERENCE,
    DslError,
    DslValidationError,
    execute,
    parse,
    validate,
)
from .evaluators import (
    GRANGER_MIN_EXTRA_POINTS,
    GRANGER_MIN_POINTS_PER_LAG,
    KENDALL_MIN_POINTS,
    MI_MIN_POINTS,
    EvalScore,
    combined_score,
    kendall_pvalue,
)
from .featuredb import (
    DEFAULT_SEED_SOURCES,
    DEFAULT_TEMPLATE,
    FeatureDb,
    FeatureSpec,
)
from .io import (
    FEATURE_SET_FILENAME,
    REPORT_FILENAME,
    read_feature_set,
    resolve_feature_set_path,
    write_feature_set,
    write_json,
)
from .llm import HttpChatBackend, MockBackend, extract_code
from .model import GbtParams, walk_forward_score
from .validation import check_timeframe

logger = logging.getLogger("elate")


@dataclass
class GenerationStats:
    """Proposal accounting for one generation."""

    generation: int
    proposed: int = 0
    parse_failed: int = 0
    validation_failed: int = 0
    dead_score: int = 0
    accepted: int = 0


@dataclass
class RunReport:
    """Everything a run produced, minus wall-clock time.

    ``wall_clock_s`` is carried in memory and logged but deliberately kept
    out of the JSON serialization so identical runs write identical bytes.
    """

    base_validation_rmse: float
    generations: list[dict]
    token_usage: dict
    test_rmse: float | None = None
    test_mae: float | None = None
    wall_clock_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "base_validation_rmse": self.base_validation_rmse,
            "generations": self.generations,
            "token_usage": self.token_usage,
            "test_rmse": self.test_rmse,
            "test_mae": self.test_mae,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RunReport":
        return cls(
            base_validation_rmse=payload["base_validation_rmse"],
            generations=list(payload["generations"]),
            token_usage=dict(payload["token_usage"]),
            test_rmse=payload.get("test_rmse"),
            test_mae=payload.get("test_mae"),
        )


class Elate(BaseEstimator, TransformerMixin):
    """Evolutionary LLM-driven feature engineering for time series.

    ``fit`` grows a population of candidate features proposed by the
    language-model backend, scores each against the target on the
    validation region, and maintains a best set whose walk-forward RMSE
    never regresses between generations. ``transform`` executes the best
    set on a new frame and returns the feature columns.
    """

    def __init__(
        self,
        backend=None,
        description: str | None = None,
        max_features: int = 100,
        keep_features: int = 50,
        generations: int = 10,
        examples_per_prompt: int = 3,
        responses_per_prompt: int = 4,
        temp_start: float = 10.0,
        temp_decay: float = 5.0,
        temp_floor: float = 0.1,
        filter_mode: str = "shap",
        correlation_limit: float = 0.9,
        background_cap: int = 100,
        granger_lags: int = 4,
        validation_folds: int = 5,
        max_stalled_rounds: int = 10,
        gbt_params: GbtParams | None = None,
        prompt_template: str | None = None,
        seed_sources: tuple | None = None,
        random_seed: int = 0,
    ):
        self.backend = backend
        self.description = description
        self.max_features = max_features
        self.keep_features = keep_features
        self.generations = generations
        self.examples_per_prompt = examples_per_prompt
        self.responses_per_prompt = responses_per_prompt
        self.temp_start = temp_start
        self.temp_decay = temp_decay
        self.temp_floor = temp_floor
        self.filter_mode = filter_mode
        self.correlation_limit = correlation_limit
        self.background_cap = background_cap
        self.granger_lags = granger_lags
        self.validation_folds = validation_folds
        self.max_stalled_rounds = max_stalled_rounds
        self.gbt_params = gbt_params
        self.prompt_template = prompt_template
        self.seed_sources = seed_sources
        self.random_seed = random_seed

    # fitting ---------------------------------------------------------------

    def _evaluate(self, source: str, program, frame, validation_start: int, db) -> FeatureSpec:
        """Score a parsed candidate on the validation region."""
        values = execute(program, frame)
        x = values[validation_start:]
        y = frame.target[validation_start:]
        if self.filter_mode == "fresh":
            p = kendall_pvalue(x, y)
            scores = EvalScore({"significance": 1.0 - p})
            pvalue = p
        else:
            scores = combined_score(x, y, lags=self.granger_lags)
            pvalue = None
        return FeatureSpec(
            source=source,
            name=program.feature_name,
            program=program,
            scores=scores,
            pvalue=pvalue,
            created_seq=db.next_seq(),
        )

    def _seed(self, db: FeatureDb, frame: TimeFrame, validation_start: int) -> None:
        sources = self.seed_sources if self.seed_sources else DEFAULT_SEED_SOURCES
        schema = frame.feature_schema()
        for source in sources:
            program = parse(source)
            validate(program, schema)
            spec = self._evaluate(source, program, frame, validation_start, db)
            if spec.scores.is_dead:
                logger.warning("seed feature %r scored dead; skipped", spec.name)
                continue
            db.add(spec)

    def fit(self, frame: TimeFrame, y=None, validation_start: int | None = None):
        """Run the full loop; the frame must end at the validation boundary.

        ``validation_start`` is the row index where the scoring region
        begins (defaults to the last fifth of the frame). Rows at and after
        it drive candidate scores and best-set selection; rows before it
        train the fold models.
        """
        started = time.perf_counter()
        frame = check_timeframe(frame)
        if self.backend is None:
            raise ValueError("no backend: pass MockBackend or HttpChatBackend")
        if TARGET_LAG_COLUMN not in frame.columns:
            frame = attach_target_lag(frame)
        if validation_start is None:
            validation_start = max(1, frame.m - max(self.validation_folds, frame.m // 5))
        folds = walk_forward_folds(validation_start, frame.m, self.validation_folds)
        n_val = frame.m - validation_start
        if self.filter_mode == "fresh":
            needed = KENDALL_MIN_POINTS
        else:
            needed = max(
                MI_MIN_POINTS,
                GRANGER_MIN_POINTS_PER_LAG * self.granger_lags + GRANGER_MIN_EXTRA_POINTS,
            )
        if n_val < needed:
            logger.warning(
                "validation region has %d rows but the evaluators need %d for "
                "non-zero scores; every candidate will score dead",
                n_val,
                needed,
            )
        description = (
            self.description if self.description is not None else describe_frame(frame).text
        )
        db = FeatureDb(
            description=description,
            frame=frame,
            folds=folds,
            template=self.prompt_template or DEFAULT_TEMPLATE,
            max_features=self.max_features,
            keep_features=self.keep_features,
            generations=self.generations,
            examples_per_prompt=self.examples_per_prompt,
            temp_start=self.temp_start,
            temp_decay=self.temp_decay,
            temp_floor=self.temp_floor,
            filter_mode=self.filter_mode,
            gbt_params=self.gbt_params or GbtParams(),
            correlation_limit=self.correlation_limit,
            background_cap=self.background_cap,
            rng=np.random.default_rng(self.random_seed),
        )
        stats: dict[int, GenerationStats] = {}

        def stats_for(generation: int) -> GenerationStats:
            if generation not in stats:
                stats[generation] = GenerationStats(generation=generation)
            return stats[generation]

        self._seed(db, frame, validation_start)
        schema = frame.feature_schema()
        backend = self.backend
        stalled = 0
        seen_generation = db.generation
        while db.generation < self.generations:
            if db.generation != seen_generation:
                backend.clear_history()
                seen_generation = db.generation
            prompt = db.build_prompt()
            replies = backend.draw_samples(prompt, self.responses_per_prompt)
            accepted_now = 0
            for reply in replies:
                if db.generation >= self.generations:
                    break  # generation budget reached mid-batch; drop the rest
                row = stats_for(db.generation)
                row.proposed += 1
                code = extract_code(reply)
                try:
                    program = parse(code)
                except DslError:
                    row.parse_failed += 1
                    continue
                try:
                    validate(program, schema)
                except DslValidationError:
                    row.validation_failed += 1
                    continue
                name = program.feature_name
                if name in db.names() or name == frame.target_name:
                    row.validation_failed += 1
                    continue
                try:
                    spec = self._evaluate(code, program, frame, validation_start, db)
                except DslError:
                    row.validation_failed += 1
                    continue
                if spec.scores.is_dead:
                    row.dead_score += 1
                    continue
                row.accepted += 1
                accepted_now += 1
                db.add(spec)
            if accepted_now == 0:
                stalled += 1
                if stalled >= self.max_stalled_rounds:
                    logger.warning(
                        "no acceptance in %d consecutive rounds; stopping early",
                        stalled,
                    )
                    break
            else:
                stalled = 0

        if db.is_dirty:
            db.update_best()

        generation_rows = []
        for outcome in db.outcomes:
            row = stats_for(outcome.generation)
            generation_rows.append(
                {
                    "generation": outcome.generation,
                    "validation_rmse": outcome.validation_rmse,
                    "best_feature_names": list(outcome.best_names),
                    "proposed": row.proposed,
                    "parse_failed": row.parse_failed,
                    "validation_failed": row.validation_failed,
                    "dead_score": row.dead_score,
                    "accepted": row.accepted,
                }
            )
        usage = backend.token_usage
        self.feature_db_ = db
        self.best_features_ = db.best_features
        self.base_validation_rmse_ = db.base_validation_rmse()
        self.generation_stats_ = [stats[g] for g in sorted(stats)]
        self.report_ = RunReport(
            base_validation_rmse=self.base_validation_rmse_,
            generations=generation_rows,
            token_usage={
                "prompt_tokens": usage.prompt_tokens,
                "completion_tokens": usage.completion_tokens,
                "requests": usage.requests,
            },
            wall_clock_s=time.perf_counter() - started,
        )
        logger.info(
            "fit finished in %.2fs: %d generations, best set of %d features",
            self.report_.wall_clock_s,
            len(db.residuals),
            len(self.best_features_),
        )
        return self

    # applying --------------------------------------------------------------

    def transform(self, frame: TimeFrame) -> pd.DataFrame:
        """Execute the best feature set on a frame.

        Returns a DataFrame with a timestamp column followed by one column
        per best feature. The frame must carry every column the programs
        reference (the target lag column is attached automatically).
        """
        check_is_fitted(self, "best_features_")
        frame = check_timeframe(frame)
        if TARGET_LAG_COLUMN not in frame.columns:
            frame = attach_target_lag(frame)
        return execute_feature_set(self.best_features_, frame)


def execute_feature_set(specs: list[FeatureSpec], frame: TimeFrame) -> pd.DataFrame:
    """Validate and run stored programs against a frame."""
    schema = dict(frame.feature_schema())
    out: dict[str, np.ndarray] = {"timestamp": frame.timestamps}
    for spec in specs:
        if spec.name == "timestamp":
            raise ValueError("feature named 'timestamp' collides with the output column")
        validate(spec.program, schema)
        out[spec.name] = execute(spec.program, frame)
    return pd.DataFrame(out)


# run-level entry points ------------------------------------------------------


def build_backend(config: EngineConfig):
    if config.llm_backend == "mock":
        if not config.llm_script:
            raise ValueError("llm_backend=mock needs llm_script=<responses file>")
        return MockBackend.from_script(config.llm_script)
    return HttpChatBackend(
        endpoint=config.llm_endpoint,
        model=config.llm_model,
        temperature=config.llm_temperature,
        timeout=config.llm_timeout,
    )


def _load_frame(config: EngineConfig) -> tuple[TimeFrame, str]:
    """Frame plus prompt description text, per the config's data settings."""
    if not config.data:
        raise ValueError("config needs data=<csv path>")
    if config.description:
        if not config.target:
            raise ValueError("config needs target=<column> when a description is given")
        frame, description = load_csv(
            config.data,
            config.description,
            timestamp_col=config.timestamp_col,
            target_col=config.target,
            horizon=config.horizon,
        )
        return frame, description.text
    frame = load_csv_inferred(
        config.data,
        timestamp_col=config.timestamp_col,
        target_col=config.target or None,
        horizon=config.horizon,
    )
    return frame, describe_frame(frame).text


def _estimator_from_config(config: EngineConfig, description: str) -> Elate:
    template = None
    if config.prompt_template:
        template = Path(config.prompt_template).read_text(encoding="utf-8")
    return Elate(
        backend=build_backend(config),
        description=description,
        max_features=config.max_features,
        keep_features=config.keep_features,
        generations=config.generations,
        examples_per_prompt=config.examples_per_prompt,
        responses_per_prompt=config.responses_per_prompt,
        temp_start=config.temp_start,
        temp_decay=config.temp_decay,
        temp_floor=config.temp_floor,
        filter_mode=config.filter_mode,
        correlation_limit=config.correlation_limit,
        background_cap=config.background_cap,
        granger_lags=config.granger_lags,
        validation_folds=config.validation_folds,
        max_stalled_rounds=config.max_stalled_rounds,
        gbt_params=GbtParams(
            n_trees=config.gbt_trees,
            max_depth=config.gbt_depth,
            learning_rate=config.gbt_learning_rate,
            min_samples_leaf=config.gbt_min_leaf,
        ),
        prompt_template=template,
        seed_sources=config.seed_features or None,
        random_seed=config.random_seed,
    )


def run_fit(config: EngineConfig) -> tuple[Elate, RunReport]:
    """Full run: load, split, fit, score the test region once, persist."""
    started = time.perf_counter()
    frame, description = _load_frame(config)
    if not config.target:
        raise ValueError("config needs target=<column> for fit")
    frame = attach_target_lag(frame)
    split = chronological_split(
        frame,
        test_frac=config.test_fraction,
        val_frac=config.validation_fraction,
        fold_count=config.validation_folds,
    )
    fit_frame = frame.slice_rows(0, split.validation_end)
    estimator = _estimator_from_config(config, description)
    estimator.fit(fit_frame, validation_start=split.train_end)

    test_folds = walk_forward_folds(
        split.validation_end, split.test_end, config.test_folds
    )
    programs = [s.program for s in estimator.best_features_]
    test_result = walk_forward_score(
        frame, programs, test_folds, estimator.gbt_params or GbtParams()
    )
    report = estimator.report_
    report.test_rmse = test_result.rmse
    report.test_mae = test_result.mae
    report.wall_clock_s = time.perf_counter() - started

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_feature_set(out_dir / FEATURE_SET_FILENAME, estimator.best_features_)
    write_json(out_dir / REPORT_FILENAME, report.to_dict())
    logger.info("run_fit wrote %s in %.2fs", out_dir, report.wall_clock_s)
    return estimator, report


def run_transform(db_path, data_path, out_path, config: EngineConfig | None = None) -> pd.DataFrame:
    """Execute a stored feature set on a CSV and write the feature columns."""
    specs = read_feature_set(resolve_feature_set_path(db_path))
    if config is not None and config.description:
        frame, _ = load_csv(
            data_path,
            config.description,
            timestamp_col=config.timestamp_col,
            target_col=config.target,
            horizon=config.horizon,
        )
    else:
        timestamp_col = config.timestamp_col if config else "timestamp"
        frame = load_csv_inferred(
            data_path,
            timestamp_col=timestamp_col,
            target_col=(config.target or None) if config else None,
            horizon=config.horizon if config else 1,
        )
    if TARGET_LAG_COLUMN not in frame.columns:
        frame = attach_target_lag(frame)
    table = execute_feature_set(specs, frame)
    table.to_csv(out_path, index=False)
    return table


def build_zero_shot_prompt(description: str, seed_sources: tuple | None = None) -> str:
    """One-shot prompt: the fit template with seeds as examples, no history."""
    sources = seed_sources if seed_sources else DEFAULT_SEED_SOURCES
    prompt = DEFAULT_TEMPLATE
    prompt = prompt.replace("@@description@@", description)
    prompt = prompt.replace("@@examples@@", "\n\n".join(sources))
    prompt = prompt.replace("@@generated features@@", "")
    return prompt + "\n" + GRAMMAR_REFERENCE


def run_zero_shot(config: EngineConfig, k: int) -> tuple[list[FeatureSpec], dict]:
    """Draw k proposals from one prompt, keep the valid ones, persist them.

    No evolution, no scoring: programs that parse, validate, and execute
    against the data are written with `score: none`.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    frame, description = _load_frame(config)
    frame = attach_target_lag(frame)
    backend = build_backend(config)
    prompt = build_zero_shot_prompt(description, config.seed_features or None)
    replies = backend.draw_samples(prompt, k)
    schema = frame.feature_schema()
    stats = {"proposed": len(replies), "parse_failed": 0, "validation_failed": 0, "kept": 0}
    specs: list[FeatureSpec] = []
    names: set[str] = set()
    for reply in replies:
        code = extract_code(reply)
        try:
            program = parse(code)
        except DslError:
            stats["parse_failed"] += 1
            continue
        try:
            validate(program, schema)
            if program.feature_name in names or program.feature_name == frame.target_name:
                raise DslValidationError("duplicate feature name")
            execute(program, frame)
        except DslError:
            stats["validation_failed"] += 1
            continue
        names.add(program.feature_name)
        specs.append(
            FeatureSpec(
                source=code,
                name=program.feature_name,
                program=program,
                scores=None,
                pvalue=None,
                created_seq=len(specs) + 1,
            )
        )
        stats["kept"] += 1
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_feature_set(out_dir / FEATURE_SET_FILENAME, specs)
    logger.info("zero-shot kept %d/%d proposals", stats["kept"], stats["proposed"])
    return specs, stats
