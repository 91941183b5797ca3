import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mait.data import (
    BINARY_OUTCOME,
    CATEGORICAL,
    CONTINUOUS,
    TIME_TO_EVENT,
    EVENT_INDICATOR,
    ColumnSpec,
    Table,
    composite_key,
    load_table,
    quantile_bin_tokens,
    stratified_split,
    validate_table,
    write_table,
)
from mait.exceptions import ParseError, SchemaError, SplitError


def _write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_load_three_rows(tmp_path):
    path = _write(tmp_path, "age,sex\n1.5,F\n2,M\n3,F\n")
    t = load_table(path, [ColumnSpec("age", CONTINUOUS), ColumnSpec("sex", CATEGORICAL)])
    assert (t.row_count, t.column_count) == (3, 2)
    assert t.column("age").tolist() == [1.5, 2.0, 3.0]
    assert list(t.column("sex")) == ["F", "M", "F"]


def test_sentinels_become_missing(tmp_path):
    path = _write(tmp_path, "age\tsex\nNA\tF\n2\t\nnull\tNaN\n")
    t = load_table(path, [ColumnSpec("age", CONTINUOUS), ColumnSpec("sex", CATEGORICAL)])
    assert t.missing_mask("age").tolist() == [True, False, True]
    assert t.missing_mask("sex").tolist() == [False, True, True]


def test_custom_sentinel(tmp_path):
    path = _write(tmp_path, "age\n-999\n4\n")
    t = load_table(path, [ColumnSpec("age", CONTINUOUS)], sentinels=("-999",))
    assert t.cell(0, 0) is None and t.cell(1, 0) == 4.0


def test_unknown_header_named(tmp_path):
    path = _write(tmp_path, "agee\n1\n")
    with pytest.raises(SchemaError, match="agee"):
        load_table(path, [ColumnSpec("age", CONTINUOUS)])


def test_parse_error_coordinates(tmp_path):
    path = _write(tmp_path, "age\n1\nabc\n")
    with pytest.raises(ParseError) as err:
        load_table(path, [ColumnSpec("age", CONTINUOUS)])
    assert "row 2" in str(err.value) and "age" in str(err.value)


def test_binary_outcome_categories(tmp_path):
    path = _write(tmp_path, "dx\nB\nM\nB\n")
    t = load_table(path, [ColumnSpec("dx", BINARY_OUTCOME, ["B", "M"])])
    assert t.column("dx").tolist() == [0.0, 1.0, 0.0]


def test_validate_clean_and_violations():
    t = Table.from_dict({"x": [1.0, 2.0], "y": [0, 1]}, {"x": CONTINUOUS, "y": BINARY_OUTCOME})
    assert validate_table(t) == []
    s = Table.from_dict(
        {"time": [1.0, -2.0], "event": [1, 0]}, {"time": TIME_TO_EVENT, "event": EVENT_INDICATOR}
    )
    v = validate_table(s)
    assert [x.code for x in v] == ["NEGATIVE_DURATION"] and v[0].row == 1
    d = Table([ColumnSpec("a", CONTINUOUS), ColumnSpec("a", CONTINUOUS)], [[1.0], [2.0]])
    assert "DUPLICATE_NAME" in [x.code for x in validate_table(d)]


def test_unpaired_survival_and_missing_outcome():
    t = Table.from_dict({"time": [1.0], "y": [float("nan")]}, {"time": TIME_TO_EVENT, "y": BINARY_OUTCOME})
    codes = {x.code for x in validate_table(t)}
    assert {"UNPAIRED_SURVIVAL", "MISSING_OUTCOME"} <= codes


def test_composite_key_concatenation():
    t = Table.from_dict({"y": [1, 0], "g": ["B", None]}, {"y": BINARY_OUTCOME, "g": CATEGORICAL})
    assert composite_key(t, ["y", "g"]) == ["1|B", "0|NA"]
    with pytest.raises(ValueError):
        composite_key(t, [])


def test_composite_key_subgroup_share():
    g = ["B"] * 10 + ["A"] * 90
    t = Table.from_dict({"g": g}, {"g": CATEGORICAL})
    keys = composite_key(t, ["g"])
    assert keys.count("B") / len(keys) == pytest.approx(0.10)


def test_quantile_bins_balanced_against_sort_oracle(rng):
    x = rng.permutation(100).astype(float) + rng.random()
    tokens = quantile_bin_tokens(x, 4)
    # oracle: sort, chop into 4 consecutive runs of 25
    order = np.argsort(x)
    expect = np.empty(100, dtype=object)
    for b in range(4):
        expect[order[b * 25:(b + 1) * 25]] = f"Q{b + 1}"
    assert list(tokens) == list(expect)
    _, counts = np.unique(tokens, return_counts=True)
    assert counts.max() - counts.min() <= 1


def test_split_ten_rows_two_positives():
    y = [1, 1, 0, 0, 0, 0, 0, 0, 0, 0]
    plan = stratified_split(10, [str(v) for v in y], 0.5, seed=3)
    ya = np.array(y)
    assert ya[plan.test_indices].sum() == 1 and len(plan.test_indices) == 5
    assert ya[plan.train_indices].sum() == 1
    again = stratified_split(10, [str(v) for v in y], 0.5, seed=3)
    assert np.array_equal(plan.test_indices, again.test_indices)


def test_split_degenerate():
    with pytest.raises(SplitError):
        stratified_split(1, ["a"], 0.5, seed=0)


@given(
    st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=4, max_size=60),
    st.floats(0.05, 0.95),
    st.integers(0, 2**31 - 1),
)
def test_split_partition_and_balance(strata, frac, seed):
    try:
        plan = stratified_split(len(strata), strata, frac, seed)
    except SplitError:
        return
    tr, te = set(plan.train_indices.tolist()), set(plan.test_indices.tolist())
    assert not tr & te and tr | te == set(range(len(strata)))
    for tok in set(strata):
        size = strata.count(tok)
        n_test = sum(1 for i in te if strata[i] == tok)
        if size >= 2:
            assert abs(n_test - frac * size) <= 1
        else:
            assert n_test == 0


def test_round_trip(tmp_path):
    specs = [
        ColumnSpec("x", CONTINUOUS),
        ColumnSpec("c", CATEGORICAL),
        ColumnSpec("y", BINARY_OUTCOME, ["no", "yes"]),
    ]
    t = Table(specs, [[0.1, math.nan, 1e-17], ["a", None, "b,c"], [1, 0, 1]])
    path = str(tmp_path / "rt.csv")
    write_table(t, path)
    assert load_table(path, specs).equals(t)
