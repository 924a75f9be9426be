"""Persistence: plain-text feature sets and canonical JSON reports.

A feature set file is a sequence of records separated by lines containing
only ===. Each record lists header fields (name, scalar score or `none`,
one line per evaluator component, optional p-value) followed by a
`source:` line and the program text verbatim. Program text can never
contain a bare === line, so the format needs no escaping. Reports are
JSON with sorted keys and two-space indentation so equal runs produce
byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .dsl import parse
from .evaluators import EvalScore
from .featuredb import FeatureSpec

RECORD_SEPARATOR = "==="
FEATURE_SET_FILENAME = "feature_set.txt"
REPORT_FILENAME = "report.json"


def format_feature_set(specs) -> str:
    blocks = []
    for spec in specs:
        lines = [f"name: {spec.name}"]
        if spec.scores is None:
            lines.append("score: none")
        else:
            lines.append(f"score: {spec.scores.mean!r}")
            for key in sorted(spec.scores.per_evaluator):
                lines.append(f"eval {key}: {spec.scores.per_evaluator[key]!r}")
        if spec.pvalue is not None:
            lines.append(f"pvalue: {spec.pvalue!r}")
        lines.append("source:")
        lines.append(spec.source.strip("\n"))
        blocks.append("\n".join(lines))
    if not blocks:
        return ""
    return ("\n" + RECORD_SEPARATOR + "\n").join(blocks) + "\n"


def write_feature_set(path, specs) -> None:
    Path(path).write_text(format_feature_set(specs), encoding="utf-8")


def _parse_record(lines: list[str], seq: int) -> FeatureSpec:
    name: str | None = None
    score: float | None = None
    score_seen = False
    evals: dict[str, float] = {}
    pvalue: float | None = None
    source_lines: list[str] | None = None

    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped == "source:":
            source_lines = lines[i + 1 :]
            break
        key, sep, value = stripped.partition(":")
        if not sep:
            raise ValueError(f"feature set record: bad header line {line!r}")
        key = key.strip()
        value = value.strip()
        if key == "name":
            name = value
        elif key == "score":
            score_seen = True
            score = None if value == "none" else float(value)
        elif key.startswith("eval "):
            evals[key[5:].strip()] = float(value)
        elif key == "pvalue":
            pvalue = float(value)
        else:
            raise ValueError(f"feature set record: unknown field {key!r}")

    if name is None or not score_seen or source_lines is None:
        raise ValueError("feature set record needs name, score and source fields")
    source = "\n".join(source_lines).strip("\n")
    if not source:
        raise ValueError(f"feature set record {name!r} has empty source")
    program = parse(source)
    if program.feature_name != name:
        raise ValueError(
            f"record name {name!r} does not match program feature {program.feature_name!r}"
        )
    if evals:
        scores = EvalScore(dict(sorted(evals.items())))
        if score is not None and not math.isclose(
            scores.mean, score, rel_tol=1e-9, abs_tol=1e-12
        ):
            raise ValueError(f"record {name!r}: score does not match evaluator mean")
    elif score is not None:
        scores = EvalScore({"combined": score})
    else:
        scores = None
    return FeatureSpec(
        source=source,
        name=name,
        program=program,
        scores=scores,
        pvalue=pvalue,
        created_seq=seq,
    )


def parse_feature_set(text: str) -> list[FeatureSpec]:
    records: list[list[str]] = []
    current: list[str] = []
    for line in text.splitlines():
        if line.strip() == RECORD_SEPARATOR:
            records.append(current)
            current = []
        else:
            current.append(line)
    records.append(current)

    specs: list[FeatureSpec] = []
    for record in records:
        if not any(line.strip() for line in record):
            continue
        specs.append(_parse_record(record, len(specs) + 1))
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("feature set contains duplicate names")
    return specs


def read_feature_set(path) -> list[FeatureSpec]:
    return parse_feature_set(Path(path).read_text(encoding="utf-8"))


def resolve_feature_set_path(path) -> Path:
    """Accept either a feature set file or a run output directory."""
    p = Path(path)
    if p.is_dir():
        return p / FEATURE_SET_FILENAME
    return p


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(canonical_json(obj), encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
