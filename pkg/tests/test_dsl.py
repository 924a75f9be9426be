import math
from pathlib import Path

import numpy as np
import pytest

from elate import TimeFrame
from elate.dsl import (
    GRAMMAR_REFERENCE,
    Call,
    ColumnRef,
    Const,
    DslSyntaxError,
    EmptyProgramError,
    KindMismatchError,
    NameCollisionError,
    NonLiteralWindowError,
    UnknownColumnError,
    UnknownFunctionError,
    UnterminatedStringError,
    execute,
    format_program,
    parse,
    referenced_columns,
    validate,
)
from dsl_fixtures import FIXTURE_SOURCES
from proggen import random_program
from reference_eval import evaluate as reference_evaluate
from synth import frame_to_data

NAN = float("nan")


def assert_series_equal(actual, expected, rtol=1e-9):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    np.testing.assert_allclose(actual, expected, rtol=rtol, atol=1e-12, equal_nan=True)


# fixture corpus vs the independent reference -------------------------------


@pytest.mark.parametrize("source", FIXTURE_SOURCES, ids=range(len(FIXTURE_SOURCES)))
def test_fixture_matches_reference(simple_frame, source):
    program = parse(source)
    validate(program, simple_frame.feature_schema())
    produced = execute(program, simple_frame)
    expected = reference_evaluate(program, frame_to_data(simple_frame), simple_frame.m)
    assert_series_equal(produced, expected)


@pytest.mark.parametrize(
    "source,expected",
    [
        (
            'feature "lag1": lag(price, 1)',
            [NAN, 10.0, 11.0, 9.5, NAN, 12.0, 12.5, 11.0, 13.0, 14.0],
        ),
        (
            'feature "d1": diff(price, 1)',
            [NAN, 1.0, -1.5, NAN, NAN, 0.5, -1.5, 2.0, 1.0, -0.5],
        ),
        (
            'feature "rm2": rolling_mean(price, 2)',
            [NAN, 10.5, 10.25, NAN, NAN, 12.25, 11.75, 12.0, 13.5, 13.75],
        ),
        (
            'feature "cs": cumsum(price)',
            [10.0, 21.0, 30.5, NAN, 42.5, 55.0, 66.0, 79.0, 93.0, 106.5],
        ),
        (
            # groups alternate n/s; NaN at row 3 (group s) skips the total
            'feature "cs_g": cumsum(price, by=region)',
            [10.0, 11.0, 19.5, NAN, 31.5, 23.5, 42.5, 36.5, 56.5, 50.0],
        ),
        (
            'feature "lag_g": lag(price, 1, by=region)',
            [NAN, NAN, 10.0, 11.0, 9.5, NAN, 12.0, 12.5, 11.0, 13.0],
        ),
        (
            'feature "oh": onehot(region, "n")',
            [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        ),
        (
            'feature "divzero": price / (volume - volume)',
            [NAN] * 10,
        ),
        (
            'feature "cmp": price > volume',
            [1.0, 1.0, 1.0, NAN, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        ),
        (
            'feature "rstd1": rolling_std(volume, 1)',
            [NAN] * 10,
        ),
    ],
)
def test_fixture_hand_values(simple_frame, source, expected):
    produced = execute(parse(source), simple_frame)
    assert_series_equal(produced, expected)


def test_let_bindings_compose(simple_frame):
    source = FIXTURE_SOURCES[-1]
    program = parse(source)
    assert [b.name for b in program.bindings] == ["hi", "lo"]
    produced = execute(program, simple_frame)
    # row 6: price window rows 4..6 = [12, 12.5, 11]: hi 12.5, lo 11
    assert produced[6] == pytest.approx((11.0 - 11.0) / (12.5 - 11.0))
    # row 5 window contains the NaN row
    assert math.isnan(produced[5])


# parse and validation errors -------------------------------------------------


@pytest.mark.parametrize(
    "source,exc",
    [
        ("", EmptyProgramError),
        ("# only a comment", EmptyProgramError),
        ('feature "x": rolling_mean(price)', DslSyntaxError),
        ('feature "x": rolling_mean(price, 2, 3)', DslSyntaxError),
        ('feature "x": onehot(region)', DslSyntaxError),
        ('feature "x": onehot(region, price)', DslSyntaxError),
        ('feature "x": onehot("n", "n")', DslSyntaxError),
        ('feature "x": lag(price, "2")', DslSyntaxError),
        ('feature "x": abs(price, by=region)', DslSyntaxError),
        ('feature "x": lag(price, 1) extra', DslSyntaxError),
        ('feature "x" lag(price, 1)', DslSyntaxError),
        ('feature "": lag(price, 1)', DslSyntaxError),
        ('feature "x": price +', DslSyntaxError),
        ('let x = price\nlet x = volume\nfeature "y": x', DslSyntaxError),
        ('let feature = price\nfeature "y": price', DslSyntaxError),
        ('feature "x": lag(price, 1', DslSyntaxError),
        ('feature "unterminated: price', UnterminatedStringError),
    ],
)
def test_parse_errors(source, exc):
    with pytest.raises(exc):
        parse(source)


@pytest.mark.parametrize(
    "source,exc",
    [
        ('feature "x": lag(price, 0)', NonLiteralWindowError),
        ('feature "x": lag(price, 2.5)', NonLiteralWindowError),
        ('feature "x": rolling_mean(price, volume)', NonLiteralWindowError),
        ('feature "x": unknown_func(price, 1)', UnknownFunctionError),
        ('feature "x": lag(missing_col, 1)', UnknownColumnError),
        ('feature "x": lag(price, 1, by=missing_col)', UnknownColumnError),
        ('feature "x": onehot(missing_col, "n")', UnknownColumnError),
        ('feature "x": onehot(price, "n")', KindMismatchError),
        ('feature "x": lag(price, 1, by=volume)', KindMismatchError),
        ('feature "x": region + 1', KindMismatchError),
        ('feature "x": lag(region, 1)', KindMismatchError),
        ('feature "price": lag(price, 1)', NameCollisionError),
        ('let price = volume\nfeature "x": price', NameCollisionError),
    ],
)
def test_validate_errors(schema, source, exc):
    with pytest.raises(exc):
        validate(parse(source), schema)


def test_target_not_visible_in_feature_schema(simple_frame):
    assert "demand" not in simple_frame.feature_schema()
    with pytest.raises(UnknownColumnError):
        validate(parse('feature "x": lag(demand, 1)'), simple_frame.feature_schema())


def test_execute_unknown_column(simple_frame):
    with pytest.raises(UnknownColumnError):
        execute(parse('feature "x": lag(nope, 1)'), simple_frame)


def test_execute_never_raises_on_numeric_content(simple_frame):
    # domain violations become NaN, never exceptions
    for source in [
        'feature "x": log(price - 100.0)',
        'feature "x": sqrt(0.0 - price)',
        'feature "x": exp(price * price * price)',
        'feature "x": price / (price - price)',
    ]:
        values = execute(parse(source), simple_frame)
        assert len(values) == simple_frame.m


# structure: comments, round trips, source text ------------------------------


def test_comments_attach_and_survive_round_trip():
    source = (
        "# main idea\n"
        "# more detail\n"
        "let a = lag(price, 1)\n"
        "# feature note\n"
        'feature "f": a + 1'
    )
    program = parse(source)
    assert program.bindings[0].comments == (" main idea", " more detail")
    assert program.feature_comments == (" feature note",)
    assert program.comment == "main idea"
    assert program.source_text == source
    assert parse(format_program(program)) == program


def test_whitespace_insensitive():
    compact = parse('feature"x":lag(price,1)+2')
    spaced = parse('feature  "x"  :  lag( price ,  1 )  +  2')
    assert compact == spaced


def test_referenced_columns_includes_by_and_excludes_lets():
    program = parse(
        'let a = lag(price, 1)\nfeature "f": rolling_mean(a, 2, by=region) + volume'
    )
    assert referenced_columns(program) == {"price", "region", "volume"}


def test_formatter_minimal_parens():
    cases = {
        'feature "t": price * (volume + demand)': "price * (volume + demand)",
        'feature "t": (price * volume) + demand': "price * volume + demand",
        'feature "t": price - (volume - demand)': "price - (volume - demand)",
        'feature "t": (price - volume) - demand': "price - volume - demand",
    }
    for source, expected in cases.items():
        program = parse(source)
        assert format_program(program) == f'feature "t": {expected}'
        assert parse(format_program(program)) == program


def test_string_escapes_round_trip():
    program = parse('feature "a \\"b\\" c\\\\d": price')
    assert program.feature_name == 'a "b" c\\d'
    assert parse(format_program(program)) == program


def test_window_must_be_literal_ast_check(schema):
    # hand-built AST bypassing the parser still gets caught
    bad = Call("lag", (ColumnRef("price"), Const(2.0, is_int=False)))
    from elate.dsl import Binding, DslProgram

    program = DslProgram(bindings=(), feature_name="x", feature_expr=bad)
    with pytest.raises(NonLiteralWindowError):
        validate(program, schema)


# fuzzing ---------------------------------------------------------------------


def _fuzz_frame(m=40, seed=5) -> TimeFrame:
    rng = np.random.default_rng(seed)
    price = rng.normal(0, 1, m).cumsum()
    price[rng.integers(0, m, 4)] = np.nan
    volume = np.abs(rng.normal(2, 1, m))
    region = rng.choice(["aa", "bb", "cc"], m).astype(object)
    region[rng.integers(0, m, 3)] = np.nan
    y = rng.normal(0, 1, m)
    return TimeFrame(
        timestamps=np.arange(m, dtype=np.int64),
        columns={"price": price, "volume": volume, "region": region, "demand": y},
        target_name="demand",
        horizon=1,
    )


def test_fuzz_round_trip_and_reference():
    frame = _fuzz_frame()
    data = frame_to_data(frame)
    schema = frame.feature_schema()
    rng = np.random.default_rng(123)
    for i in range(300):
        program = random_program(
            rng, ["price", "volume"], ["region"], ["aa", "bb", "zz"], tag=i
        )
        text = format_program(program)
        assert parse(text) == program, text
        validate(program, schema)
        if i < 150:  # reference execution is slow; half the corpus is plenty
            produced = execute(program, frame)
            expected = reference_evaluate(program, data, frame.m)
            assert_series_equal(produced, expected)


def test_fuzz_causality():
    # changing row t never changes any output before t
    frame = _fuzz_frame(m=30, seed=9)
    rng = np.random.default_rng(77)
    for i in range(60):
        program = random_program(
            rng, ["price", "volume"], ["region"], ["aa", "bb"], tag=i
        )
        base = execute(program, frame)
        t = int(rng.integers(1, frame.m))
        col = "price" if rng.random() < 0.5 else "volume"
        mutated = dict(frame.columns)
        changed = mutated[col].copy()
        changed[t] = changed[t] + 100.0 if not math.isnan(changed[t]) else 100.0
        mutated[col] = changed
        frame2 = TimeFrame(
            timestamps=frame.timestamps,
            columns=mutated,
            target_name=frame.target_name,
            horizon=frame.horizon,
        )
        after = execute(program, frame2)
        for j in range(t):
            both_nan = math.isnan(base[j]) and math.isnan(after[j])
            assert both_nan or base[j] == after[j], (j, t, format_program(program))


def test_grammar_doc_in_sync():
    doc = Path(__file__).resolve().parent.parent / "docs" / "grammar.md"
    assert GRAMMAR_REFERENCE.strip("\n") in doc.read_text(encoding="utf-8")
