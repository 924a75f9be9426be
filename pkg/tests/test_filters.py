from dataclasses import dataclass

import numpy as np
import pytest

from elate import (
    GbtParams,
    TimeFrame,
    aggregate_shap_importance,
    fresh_filter,
    parse,
    prune_correlated,
    prune_schedule,
    shap_filter,
    walk_forward_folds,
)
from elate.dsl.nodes import DslProgram

NAN = float("nan")

FAST = GbtParams(n_trees=15, max_depth=3, learning_rate=0.3, min_samples_leaf=5)


@dataclass
class Cand:
    name: str
    program: DslProgram
    created_seq: int
    pvalue: float | None = None


def _cand(name, source, seq, pvalue=None):
    return Cand(name=name, program=parse(source), created_seq=seq, pvalue=pvalue)


def _filter_frame(m=120, seed=0, noise_cols=0):
    """Target driven by yesterday's a and b, so lag features carry signal the
    contemporaneous base columns lack (all inputs are iid)."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(m)
    b = rng.standard_normal(m)
    y = 0.05 * rng.standard_normal(m)
    y[1:] += 1.5 * a[:-1] + 2.0 * b[:-1]
    columns = {"a": a, "b": b, "y": y}
    for i in range(noise_cols):
        columns[f"n{i}"] = rng.standard_normal(m)
    return TimeFrame(
        timestamps=np.arange(m, dtype=np.int64),
        columns=columns,
        target_name="y",
    )


# prune_schedule -------------------------------------------------------------


def test_prune_schedule_hundred_to_fifty():
    assert prune_schedule(100, 50) == [100, 90, 81, 73, 66, 60, 54, 50]


def test_prune_schedule_small_pools_drop_one():
    assert prune_schedule(8, 5) == [8, 7, 6, 5]


def test_prune_schedule_start_at_or_below_keep():
    assert prune_schedule(5, 5) == [5]
    assert prune_schedule(3, 5) == [3]


def test_prune_schedule_never_undershoots():
    for start in range(1, 130):
        sizes = prune_schedule(start, 50)
        assert sizes[-1] == min(start, 50)
        assert all(s >= min(start, 50) for s in sizes)


def test_prune_schedule_validation():
    with pytest.raises(ValueError):
        prune_schedule(0, 5)
    with pytest.raises(ValueError):
        prune_schedule(5, 0)


# prune_correlated -----------------------------------------------------------


def test_prune_correlated_keeps_best_of_cluster():
    frame = _filter_frame()
    # a2 = 2*a + tiny noise is collinear with a_copy; c is independent
    cands = [
        _cand("a_copy", 'feature "a_copy": a', 0),
        _cand("a_scaled", 'feature "a_scaled": a * 2', 1),
        _cand("b_copy", 'feature "b_copy": b', 2),
    ]
    importance = {"a_copy": 0.5, "a_scaled": 0.3, "b_copy": 0.2}
    kept = prune_correlated(frame, cands, importance, limit=0.9)
    assert [c.name for c in kept] == ["a_copy", "b_copy"]


def test_prune_correlated_importance_decides_cluster_winner():
    frame = _filter_frame()
    cands = [
        _cand("a_copy", 'feature "a_copy": a', 0),
        _cand("a_scaled", 'feature "a_scaled": a * 2', 1),
    ]
    importance = {"a_copy": 0.1, "a_scaled": 0.9}
    kept = prune_correlated(frame, cands, importance, limit=0.9)
    assert [c.name for c in kept] == ["a_scaled"]


def test_prune_correlated_chain_keeps_endpoints_apart():
    # x and z each correlate with y above the limit but not with each other;
    # greedy keep-best keeps x first, drops y, then z survives against x alone
    m = 400
    rng = np.random.default_rng(1)
    base = rng.standard_normal(m)
    other = rng.standard_normal(m)
    frame = TimeFrame(
        timestamps=np.arange(m, dtype=np.int64),
        columns={
            "x": base,
            "mid": 0.8 * base + 0.8 * other,
            "z": other,
            "y": rng.standard_normal(m),
        },
        target_name="y",
    )
    r_xm = abs(np.corrcoef(frame.columns["x"], frame.columns["mid"])[0, 1])
    r_mz = abs(np.corrcoef(frame.columns["mid"], frame.columns["z"])[0, 1])
    r_xz = abs(np.corrcoef(frame.columns["x"], frame.columns["z"])[0, 1])
    assert r_xm > 0.6 and r_mz > 0.6 and r_xz < 0.3
    cands = [
        _cand("cx", 'feature "cx": x', 0),
        _cand("cm", 'feature "cm": mid', 1),
        _cand("cz", 'feature "cz": z', 2),
    ]
    importance = {"cx": 0.9, "cm": 0.5, "cz": 0.4}
    kept = prune_correlated(frame, cands, importance, limit=0.6)
    assert [c.name for c in kept] == ["cx", "cz"]


def test_prune_correlated_constant_columns_survive():
    frame = _filter_frame()
    cands = [
        _cand("flat", 'feature "flat": a * 0 + 1', 0),
        _cand("live", 'feature "live": a', 1),
    ]
    importance = {"flat": 0.9, "live": 0.1}
    kept = prune_correlated(frame, cands, importance, limit=0.9)
    assert [c.name for c in kept] == ["flat", "live"]


def test_prune_correlated_preserves_input_order():
    frame = _filter_frame()
    cands = [
        _cand("low", 'feature "low": b', 0),
        _cand("high", 'feature "high": a', 1),
    ]
    importance = {"low": 0.1, "high": 0.9}
    kept = prune_correlated(frame, cands, importance, limit=0.9)
    assert [c.name for c in kept] == ["low", "high"]  # input order, not rank order


def test_prune_correlated_tie_favors_earlier_creation():
    frame = _filter_frame()
    cands = [
        _cand("second", 'feature "second": a * 2', 5),
        _cand("first", 'feature "first": a', 1),
    ]
    importance = {"second": 0.5, "first": 0.5}
    kept = prune_correlated(frame, cands, importance, limit=0.9)
    assert [c.name for c in kept] == ["first"]


# aggregate_shap_importance -----------------------------------------------------


def test_importance_favors_informative_candidate():
    frame = _filter_frame(m=150, noise_cols=1)
    cands = [
        _cand("signal", 'feature "signal": lag(b, 1)', 0),
        _cand("noise", 'feature "noise": lag(n0, 1)', 1),
    ]
    folds = walk_forward_folds(100, 150, 2)
    importance = aggregate_shap_importance(frame, cands, folds, FAST)
    assert set(importance) == {"signal", "noise"}
    assert importance["signal"] > importance["noise"]
    assert importance["signal"] + importance["noise"] == pytest.approx(1.0, abs=1e-9)


def test_importance_requires_candidates_and_folds(simple_frame):
    with pytest.raises(ValueError, match="candidates"):
        aggregate_shap_importance(simple_frame, [], [((0, 5), (5, 8))])
    cand = _cand("f", 'feature "f": price', 0)
    with pytest.raises(ValueError, match="folds"):
        aggregate_shap_importance(simple_frame, [cand], [])


# shap_filter ----------------------------------------------------------------------


def test_shap_filter_passthrough_when_small():
    frame = _filter_frame()
    cands = [_cand("one", 'feature "one": a', 0)]
    kept = shap_filter(frame, cands, [], keep=5, params=FAST)
    assert kept == cands  # no model fit: folds unused below the threshold


def test_shap_filter_recovers_informative_features():
    frame = _filter_frame(m=150, noise_cols=4)
    # junk created first: ties must not be what saves the informative pair
    cands = [
        _cand(f"junk{i}", f'feature "junk{i}": lag(n{i}, 1)', i) for i in range(4)
    ]
    cands.append(_cand("sig_a", 'feature "sig_a": lag(a, 1)', 10))
    cands.append(_cand("sig_b", 'feature "sig_b": lag(b, 1)', 11))
    folds = walk_forward_folds(100, 150, 2)
    kept = shap_filter(frame, cands, folds, keep=2, params=FAST)
    assert {c.name for c in kept} == {"sig_a", "sig_b"}


def test_shap_filter_drops_correlated_duplicates():
    frame = _filter_frame(m=150)
    cands = [
        _cand("orig", 'feature "orig": lag(a, 1)', 0),
        _cand("dupe", 'feature "dupe": lag(a, 1) * 3 + 1', 1),
        _cand("other", 'feature "other": lag(b, 1)', 2),
    ]
    folds = walk_forward_folds(100, 150, 2)
    kept = shap_filter(frame, cands, folds, keep=2, params=FAST)
    names = {c.name for c in kept}
    assert len(names & {"orig", "dupe"}) == 1
    assert "other" in names


def test_shap_filter_validates_keep():
    with pytest.raises(ValueError):
        shap_filter(None, [], [], keep=0)


# fresh_filter ----------------------------------------------------------------------


def test_fresh_filter_keeps_smallest_adjusted_pvalues():
    cands = [
        _cand("weak", 'feature "weak": a', 0, pvalue=0.9),
        _cand("strong", 'feature "strong": b', 1, pvalue=0.001),
        _cand("mid", 'feature "mid": a + b', 2, pvalue=0.04),
    ]
    kept = fresh_filter(cands, keep=2)
    assert [c.name for c in kept] == ["strong", "mid"]


def test_fresh_filter_preserves_input_order_of_survivors():
    cands = [
        _cand("mid", 'feature "mid": a', 0, pvalue=0.04),
        _cand("weak", 'feature "weak": b', 1, pvalue=0.9),
        _cand("strong", 'feature "strong": a + b', 2, pvalue=0.001),
    ]
    kept = fresh_filter(cands, keep=2)
    assert [c.name for c in kept] == ["mid", "strong"]


def test_fresh_filter_tie_favors_earlier_creation():
    cands = [
        _cand("late", 'feature "late": a', 9, pvalue=0.05),
        _cand("early", 'feature "early": b', 1, pvalue=0.05),
        _cand("worst", 'feature "worst": a + b', 2, pvalue=0.99),
    ]
    kept = fresh_filter(cands, keep=1)
    assert [c.name for c in kept] == ["early"]


def test_fresh_filter_passthrough_when_small():
    cands = [_cand("only", 'feature "only": a', 0, pvalue=None)]
    assert fresh_filter(cands, keep=3) == cands  # no p-value needed below keep


def test_fresh_filter_missing_pvalue_raises():
    cands = [
        _cand("ok", 'feature "ok": a', 0, pvalue=0.1),
        _cand("hole", 'feature "hole": b', 1, pvalue=None),
    ]
    with pytest.raises(ValueError, match="hole"):
        fresh_filter(cands, keep=1)


def test_fresh_filter_validates_keep():
    with pytest.raises(ValueError):
        fresh_filter([], keep=0)
