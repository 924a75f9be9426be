"""Run configuration: a flat key=value file, one setting per line.

Blank lines and full-line # comments are ignored; values keep everything
after the first equals sign. `seed_feature` may repeat, each occurrence
adding one seed program (one line each); every other key may appear once.
API credentials never appear here: the HTTP backend reads its key from
the ELATE_API_KEY environment variable only.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import get_type_hints


@dataclass
class EngineConfig:
    # data
    data: str = ""
    description: str | None = None
    timestamp_col: str = "timestamp"
    target: str = ""
    horizon: int = 1

    # search loop
    max_features: int = 100
    keep_features: int = 50
    generations: int = 10
    examples_per_prompt: int = 3
    responses_per_prompt: int = 4
    temp_start: float = 10.0
    temp_decay: float = 5.0
    temp_floor: float = 0.1
    filter_mode: str = "shap"
    correlation_limit: float = 0.9
    background_cap: int = 100
    granger_lags: int = 4
    max_stalled_rounds: int = 10
    random_seed: int = 0

    # chronological split and scoring folds
    validation_fraction: float = 0.10
    test_fraction: float = 0.10
    validation_folds: int = 5
    test_folds: int = 5

    # boosted tree model
    gbt_trees: int = 100
    gbt_depth: int = 4
    gbt_learning_rate: float = 0.1
    gbt_min_leaf: int = 20

    # language model backend
    llm_backend: str = "mock"
    llm_script: str = ""
    llm_endpoint: str = ""
    llm_model: str = ""
    llm_temperature: float = 1.0
    llm_timeout: float = 60.0

    # prompting
    prompt_template: str = ""  # path; empty = built-in template
    seed_features: tuple[str, ...] = ()  # empty = built-in seeds

    # outputs
    output_dir: str = "elate_out"

    def __post_init__(self):
        positive = (
            "horizon",
            "max_features",
            "keep_features",
            "generations",
            "responses_per_prompt",
            "granger_lags",
            "validation_folds",
            "test_folds",
            "gbt_trees",
            "gbt_depth",
            "gbt_min_leaf",
            "background_cap",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.examples_per_prompt < 0 or self.max_stalled_rounds < 1:
            raise ValueError("examples_per_prompt must be >= 0 and max_stalled_rounds >= 1")
        if self.keep_features > self.max_features:
            raise ValueError("keep_features cannot exceed max_features")
        if self.filter_mode not in ("shap", "fresh"):
            raise ValueError(f"unknown filter_mode {self.filter_mode!r}")
        if self.llm_backend not in ("mock", "http"):
            raise ValueError(f"unknown llm_backend {self.llm_backend!r}")
        if not (0 < self.validation_fraction < 1 and 0 < self.test_fraction < 1):
            raise ValueError("split fractions must be in (0, 1)")
        if not (0 < self.gbt_learning_rate <= 1) or self.temp_floor <= 0:
            raise ValueError("gbt_learning_rate must be in (0, 1] and temp_floor positive")


_SEED_KEY = "seed_feature"


def parse_config(text: str) -> EngineConfig:
    """Parse key=value lines into an EngineConfig."""
    hints = get_type_hints(EngineConfig)
    known = {f.name for f in fields(EngineConfig)}
    values: dict[str, str] = {}
    seeds: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == _SEED_KEY:
            seeds.append(value)
            continue
        if key not in known or key == "seed_features":
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = value

    kwargs: dict[str, object] = {}
    for key, value in values.items():
        hint = hints[key]
        try:
            if hint is int:
                kwargs[key] = int(value)
            elif hint is float:
                kwargs[key] = float(value)
            else:  # str and str | None fields take the raw text
                kwargs[key] = value
        except ValueError as exc:
            raise ValueError(f"config key {key!r}: {exc}") from exc
    if seeds:
        kwargs["seed_features"] = tuple(seeds)
    return EngineConfig(**kwargs)


def load_config(path) -> EngineConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
