"""Feature population store driving the propose-evaluate-filter loop.

The database holds every accepted candidate for the current generation,
samples prompt examples with a temperature that cools as the population
fills, and maintains the best feature set found so far under a strict
no-regression rule: the best set's validation error never increases from
one generation to the next because a challenger only replaces the
incumbent when its walk-forward error is strictly lower.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Fold, TimeFrame
from .dsl import GRAMMAR_REFERENCE, DslProgram
from .evaluators import EvalScore
from .filters import CORRELATION_LIMIT, fresh_filter, shap_filter
from .model import BACKGROUND_CAP, GbtParams, walk_forward_score

PROMPT_HISTORY_LIMIT = 250
DESCRIPTION_PLACEHOLDER = "@@description@@"
EXAMPLES_PLACEHOLDER = "@@examples@@"
HISTORY_PLACEHOLDER = "@@generated features@@"

DEFAULT_TEMPLATE = """You are writing features for a model that forecasts the column Target_Tminus1 one step ahead. Features are short programs in a small feature language; the grammar and the list of allowed functions follow at the end of this message.

Dataset description:
@@description@@

Example features:
@@examples@@

Features generated so far, with their usefulness scores (higher is better):
@@generated features@@

Propose one new feature that is likely to carry predictive signal the existing features miss. Combine columns, lags, differences, rolling windows, or group-wise variants in ways that plausibly relate to the target. Do not repeat a feature name that was already generated.

Reply with a single fenced code block containing exactly one program: optional let bindings, then one feature declaration. Start the program with a short comment describing the idea.
"""

SEED_WEEK_MEAN = (
    "# trailing week average of the lagged target\n"
    'feature "target_week_mean": rolling_mean(Target_Tminus1, 7)'
)
SEED_DAILY_CHANGE = (
    "# day over day change of the lagged target\n"
    'feature "target_daily_change": diff(Target_Tminus1, 1)'
)
DEFAULT_SEED_SOURCES: tuple[str, ...] = (SEED_WEEK_MEAN, SEED_DAILY_CHANGE)


def temperature(
    population: int,
    max_features: int,
    start: float = 10.0,
    decay: float = 5.0,
    floor: float = 0.1,
) -> float:
    """Sampling temperature for a population of the given size.

    Exponential cooling from ``start + floor`` when empty toward ``floor``
    as the population approaches ``max_features``: early prompts see nearly
    uniform examples, late prompts see the strongest ones.
    """
    if max_features < 1:
        raise ValueError("max_features must be positive")
    return start * math.exp(-decay * population / max_features) + floor


@dataclass
class FeatureSpec:
    """One accepted feature: its program, provenance, and evaluation."""

    source: str
    name: str
    program: DslProgram
    scores: EvalScore | None = None
    pvalue: float | None = None
    created_seq: int = 0

    @property
    def sampling_score(self) -> float:
        return self.scores.mean if self.scores is not None else 0.0


@dataclass
class GenerationOutcome:
    """What a best-set update decided for one generation."""

    generation: int
    validation_rmse: float
    accepted_challenger: bool
    best_names: tuple[str, ...]


class FeatureDb:
    """Candidate population with sampling, prompting and best-set state."""

    def __init__(
        self,
        description: str,
        frame: TimeFrame,
        folds: Sequence[Fold],
        template: str = DEFAULT_TEMPLATE,
        max_features: int = 100,
        keep_features: int = 50,
        generations: int = 10,
        examples_per_prompt: int = 3,
        temp_start: float = 10.0,
        temp_decay: float = 5.0,
        temp_floor: float = 0.1,
        filter_mode: str = "shap",
        gbt_params: GbtParams = GbtParams(),
        correlation_limit: float = CORRELATION_LIMIT,
        background_cap: int = BACKGROUND_CAP,
        rng: np.random.Generator | int | None = None,
    ):
        if max_features < 1 or keep_features < 1 or generations < 1:
            raise ValueError("max_features, keep_features and generations must be positive")
        if keep_features > max_features:
            raise ValueError("keep_features cannot exceed max_features")
        if filter_mode not in ("shap", "fresh"):
            raise ValueError(f"unknown filter_mode {filter_mode!r}")
        for placeholder in (
            DESCRIPTION_PLACEHOLDER,
            EXAMPLES_PLACEHOLDER,
            HISTORY_PLACEHOLDER,
        ):
            if placeholder not in template:
                raise ValueError(f"prompt template is missing {placeholder}")
        self.description = description
        self.frame = frame
        self.folds = tuple(folds)
        self.template = template
        self.max_features = max_features
        self.keep_features = keep_features
        self.generations = generations
        self.examples_per_prompt = examples_per_prompt
        self.temp_start = temp_start
        self.temp_decay = temp_decay
        self.temp_floor = temp_floor
        self.filter_mode = filter_mode
        self.gbt_params = gbt_params
        self.correlation_limit = correlation_limit
        self.background_cap = background_cap
        self._rng = np.random.default_rng(rng)

        self.specs: list[FeatureSpec] = []
        self.generation = 0
        self.residuals: list[float] = []
        self.best_sets: list[list[FeatureSpec]] = []
        self.outcomes: list[GenerationOutcome] = []
        self.prompt_history: list[tuple[str, float]] = []
        self._seq = 0
        self._dirty = False
        self._base_rmse: float | None = None

    # population -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.specs)

    def names(self) -> set[str]:
        return {s.name for s in self.specs}

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    @property
    def is_complete(self) -> bool:
        return self.generation >= self.generations

    @property
    def is_dirty(self) -> bool:
        return self._dirty

    @property
    def best_features(self) -> list[FeatureSpec]:
        return list(self.best_sets[-1]) if self.best_sets else []

    def base_validation_rmse(self) -> float:
        """Walk-forward error of the base columns alone (cached)."""
        if self._base_rmse is None:
            result = walk_forward_score(self.frame, (), self.folds, self.gbt_params)
            self._base_rmse = result.rmse
        return self._base_rmse

    def _raw_add(self, spec: FeatureSpec) -> None:
        self.specs.append(spec)
        self.prompt_history.append((spec.name, spec.sampling_score))

    def add(self, spec: FeatureSpec) -> bool:
        """Accept a candidate; returns True when this filled the population.

        Filling the population closes the generation: the best set is
        updated, the generation counter advances, and (unless this was the
        final generation) the population is reset to the best set so the
        next generation builds on it.
        """
        if spec.name in self.names():
            raise ValueError(f"duplicate feature name {spec.name!r}")
        self._raw_add(spec)
        self._dirty = True
        if len(self.specs) < self.max_features:
            return False
        self.update_best()
        self.generation += 1
        if self.generation < self.generations:
            self._reset()
        return True

    def _reset(self) -> None:
        """Restart the population from the current best set."""
        self.specs = []
        for spec in self.best_features:
            self._raw_add(spec)

    # sampling and prompts --------------------------------------------------

    def temperature(self) -> float:
        return temperature(
            len(self.specs),
            self.max_features,
            self.temp_start,
            self.temp_decay,
            self.temp_floor,
        )

    def sample(self, k: int) -> list[FeatureSpec]:
        """Draw up to k distinct specs, softmax-weighted by score.

        Sequential draws without replacement: after each pick the
        remaining weights are renormalized. Low temperature concentrates
        on the highest-scoring specs, high temperature approaches uniform.
        """
        pool = list(self.specs)
        temp = self.temperature()
        picked: list[FeatureSpec] = []
        while pool and len(picked) < k:
            logits = np.array([s.sampling_score for s in pool]) / temp
            logits -= logits.max()
            weights = np.exp(logits)
            probs = weights / weights.sum()
            index = int(self._rng.choice(len(pool), p=probs))
            picked.append(pool.pop(index))
        return picked

    def build_prompt(self) -> str:
        """Fill the template and append the language reference.

        Examples are freshly sampled; the generated-features section lists
        the most recent entries (capped) across the whole run, including
        generations that have already been reset.
        """
        examples = self.sample(self.examples_per_prompt)
        example_text = "\n\n".join(s.source for s in examples)
        recent = self.prompt_history[-PROMPT_HISTORY_LIMIT:]
        history_text = "\n".join(f"{name}: {score:.6g}" for name, score in recent)
        prompt = self.template
        prompt = prompt.replace(DESCRIPTION_PLACEHOLDER, self.description)
        prompt = prompt.replace(EXAMPLES_PLACEHOLDER, example_text)
        prompt = prompt.replace(HISTORY_PLACEHOLDER, history_text)
        return prompt + "\n" + GRAMMAR_REFERENCE

    # best set maintenance ---------------------------------------------------

    def _filter(self, specs: list[FeatureSpec]) -> list[FeatureSpec]:
        if self.filter_mode == "fresh":
            return fresh_filter(specs, self.keep_features)
        return shap_filter(
            self.frame,
            specs,
            self.folds,
            self.keep_features,
            self.gbt_params,
            self.correlation_limit,
            self.background_cap,
        )

    def update_best(self) -> GenerationOutcome:
        """Filter the population and challenge the incumbent best set.

        The challenger replaces the incumbent only when its pooled
        walk-forward RMSE is strictly lower, so the recorded residual for
        each generation never exceeds the previous one.
        """
        challenger = self._filter(list(self.specs))
        programs = [s.program for s in challenger]
        challenger_rmse = walk_forward_score(
            self.frame, programs, self.folds, self.gbt_params
        ).rmse
        incumbent_rmse = (
            self.residuals[-1] if self.residuals else self.base_validation_rmse()
        )
        accepted = challenger_rmse < incumbent_rmse
        if accepted:
            best = list(challenger)
            residual = challenger_rmse
        else:
            best = self.best_features
            residual = incumbent_rmse
        self.best_sets.append(best)
        self.residuals.append(residual)
        outcome = GenerationOutcome(
            generation=self.generation,
            validation_rmse=residual,
            accepted_challenger=accepted,
            best_names=tuple(s.name for s in best),
        )
        self.outcomes.append(outcome)
        self._dirty = False
        return outcome
