import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from zslca.attrspace import (
    AttributeMatrix,
    attributes_csv,
    class_entropy,
    complement,
    entropy_report,
    expand,
    guard_not_expanded,
    looks_expanded,
    normalize_columns,
    read_attributes,
    split_expanded,
)
from zslca.errors import (
    AllZero,
    AllZeroColumn,
    AlreadyExpanded,
    ClassMismatch,
    DataError,
    EmptyMatrix,
    NotNormalized,
    ParseError,
)

from .conftest import random_raw


def _col(values):
    v = np.asarray(values, dtype=float).reshape(-1, 1)
    return AttributeMatrix(v, [f"a{i}" for i in range(v.shape[0])], ["y"])


def _unit(values):
    return normalize_columns(_col(values))


# -- examples ------------------------------------------------------------------


@pytest.mark.parametrize(
    "column, expected",
    [([3, 4], [0.6, 0.8]), ([1, 0], [1.0, 0.0]), ([1, 1, 1], [1 / math.sqrt(3)] * 3)],
)
def test_normalize_examples(column, expected):
    out = normalize_columns(_col(column))
    assert out.normalized
    np.testing.assert_allclose(out.values[:, 0], expected, atol=1e-12)


def test_normalize_rounded_example():
    np.testing.assert_allclose(normalize_columns(_col([1, 1, 1])).values[:, 0], 0.5774, atol=1e-4)


def test_normalize_rejects_zero_column():
    raw = AttributeMatrix(np.array([[1.0, 0.0], [2.0, 0.0]]), ["a", "b"], ["ok", "empty"])
    with pytest.raises(AllZeroColumn, match="empty"):
        normalize_columns(raw)


def test_complement_examples():
    np.testing.assert_allclose(complement(_unit([3, 4])).values[:, 0], [0.4, 0.2], atol=1e-12)
    np.testing.assert_allclose(complement(_unit([1])).values[:, 0], [0.0])
    np.testing.assert_allclose(complement(_unit([1, 1, 1])).values[:, 0], [0.4226] * 3, atol=1e-4)
    assert complement(_unit([3, 4])).attribute_names == ("not_a0", "not_a1")


def test_complement_requires_normalized():
    with pytest.raises(NotNormalized):
        complement(_col([3, 4]))
    with pytest.raises(NotNormalized):
        expand(_col([3, 4]))


def test_expand_example():
    s = expand(_unit([3, 4]))
    np.testing.assert_allclose(s.values[:, 0], [0.6, 0.8, 0.4, 0.2], atol=1e-12)
    assert s.attribute_names == ("a0", "a1", "not_a0", "not_a1")
    assert s.n_original == 2 and s.n_attributes == 4


def test_expand_empty_matrix():
    empty = AttributeMatrix(np.zeros((0, 2)), [], ["x", "y"], normalized=True)
    with pytest.raises(EmptyMatrix):
        expand(empty)
    with pytest.raises(EmptyMatrix):
        normalize_columns(AttributeMatrix(np.zeros((0, 2)), [], ["x", "y"]))


@pytest.mark.parametrize(
    "column, expected",
    [([1, 1], math.log(2)), ([1, 0, 0], 0.0), ([0.6, 0.8], -(3 / 7 * math.log(3 / 7) + 4 / 7 * math.log(4 / 7)))],
)
def test_entropy_examples(column, expected):
    assert class_entropy(np.array(column, dtype=float)) == pytest.approx(expected, abs=1e-12)


def test_entropy_rounded_example():
    assert class_entropy(np.array([0.6, 0.8])) == pytest.approx(0.6829, abs=1e-3)


def test_entropy_all_zero():
    with pytest.raises(AllZero):
        class_entropy(np.zeros(3))


def test_entropy_report_closed_form():
    a = normalize_columns(_col([1, 0]))
    (rec,) = entropy_report(a, expand(a))
    assert rec.entropy_oa == 0.0
    assert rec.entropy_ca == pytest.approx(math.log(2), abs=1e-12)
    assert rec.gain == pytest.approx(math.log(2), abs=1e-12)


def test_entropy_report_synthetic_fixture(synth42):
    a = normalize_columns(synth42.attributes)
    records = entropy_report(a, expand(a))
    assert len(records) == a.n_classes
    assert all(r.entropy_ca >= r.entropy_oa for r in records)


def test_entropy_report_class_mismatch():
    a = normalize_columns(_col([1, 2]))
    other = AttributeMatrix(np.array([[1.0]]), ["a0"], ["z"], normalized=True)
    with pytest.raises(ClassMismatch):
        entropy_report(a, expand(other))
    empty = AttributeMatrix(np.zeros((1, 0)), ["a0"], [], normalized=True)
    with pytest.raises(ClassMismatch):
        entropy_report(empty, expand(empty))


def test_matrix_validation():
    with pytest.raises(DataError):
        AttributeMatrix(np.array([[-1.0]]), ["a"], ["y"])
    with pytest.raises(DataError):
        AttributeMatrix(np.array([[np.nan]]), ["a"], ["y"])
    with pytest.raises(DataError):
        AttributeMatrix(np.ones((2, 1)), ["a", "a"], ["y"])
    with pytest.raises(DataError):
        AttributeMatrix(np.ones((1, 2)), ["a"], ["y", "y"])
    with pytest.raises(NotNormalized):
        AttributeMatrix(np.ones((2, 1)), ["a", "b"], ["y"], normalized=True)


def test_values_are_read_only():
    a = _unit([3, 4])
    with pytest.raises(ValueError):
        a.values[0, 0] = 1.0


# -- expanded-input detection ------------------------------------------------------


def test_guard_detects_expanded(rng):
    s = expand(normalize_columns(random_raw(rng, 5, 4)))
    raw = AttributeMatrix(s.values, s.attribute_names, s.class_names)
    assert looks_expanded(raw.values)
    with pytest.raises(AlreadyExpanded):
        guard_not_expanded(raw)
    back = split_expanded(raw)
    np.testing.assert_allclose(back.values, s.values, atol=1e-12)


def test_guard_accepts_plain(rng):
    raw = random_raw(rng, 6, 3)
    assert not looks_expanded(raw.values)
    guard_not_expanded(raw)
    with pytest.raises(DataError):
        split_expanded(raw)


# -- file format ----------------------------------------------------------------


def test_csv_round_trip(tmp_path, rng):
    raw = random_raw(rng, 4, 3)
    path = tmp_path / "attrs.csv"
    path.write_text(attributes_csv(raw))
    back = read_attributes(path)
    np.testing.assert_array_equal(back.values, raw.values)
    assert back.attribute_names == raw.attribute_names
    assert back.class_names == raw.class_names
    assert attributes_csv(back) == path.read_text()


@pytest.mark.parametrize(
    "text, line, column",
    [
        ("attribute,x,y\na,1,oops\n", 2, 3),
        ("attribute,x,y\na,1\n", 2, None),
        ("attr,x\na,1\n", 1, None),
        ("attribute,x\na,-1\n", 2, 2),
    ],
)
def test_parse_errors_carry_location(tmp_path, text, line, column):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ParseError) as info:
        read_attributes(path)
    assert info.value.line == line
    assert info.value.column == column
    assert str(path) in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(ParseError, match="not found"):
        read_attributes(tmp_path / "nope.csv")


def test_no_rows(tmp_path):
    path = tmp_path / "hdr.csv"
    path.write_text("attribute,x\n")
    with pytest.raises(EmptyMatrix):
        read_attributes(path)


# -- properties -------------------------------------------------------------------

_matrices = arrays(
    np.float64,
    st.tuples(st.integers(1, 8), st.integers(1, 6)),
    elements=st.floats(0, 100, allow_nan=False, allow_infinity=False),
).filter(lambda v: np.all(v.max(axis=0) > 1e-6))


def _named(v):
    return AttributeMatrix(v, [f"a{i}" for i in range(v.shape[0])], [f"c{j}" for j in range(v.shape[1])])


@settings(max_examples=80, deadline=None)
@given(_matrices)
def test_normalize_idempotent(v):
    once = normalize_columns(_named(v))
    twice = normalize_columns(once)
    np.testing.assert_allclose(twice.values, once.values, rtol=0, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(once.values, axis=0), 1.0, atol=1e-9)
    assert np.all((once.values >= 0) & (once.values <= 1))


@settings(max_examples=80, deadline=None)
@given(_matrices)
def test_complement_involution_and_shape_law(v):
    a = normalize_columns(_named(v))
    back = 1.0 - complement(a).values
    np.testing.assert_allclose(back, a.values, rtol=0, atol=1e-12)
    s = expand(a)
    m = a.n_attributes
    assert s.values.shape == (2 * m, a.n_classes)
    np.testing.assert_allclose(s.values[:m] + s.values[m:], 1.0, rtol=0, atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(
    arrays(np.float64, st.integers(1, 12), elements=st.floats(0, 50, allow_nan=False)).filter(
        lambda v: v.sum() > 1e-6
    ),
    st.floats(1e-3, 1e3),
)
def test_entropy_bounds_and_scale_invariance(v, c):
    h = class_entropy(v)
    assert -1e-12 <= h <= math.log(v.size) + 1e-12
    assert class_entropy(c * v) == pytest.approx(h, abs=1e-9)
