"""Attribute matrices: normalization, complementary attributes and entropy.

An attribute matrix stores one row per attribute and one column per class.
Columns are L2-normalized so every entry reads as a correlation in [0, 1];
the complementary matrix is ``1 - A`` and the expanded matrix stacks the two.
"""

from dataclasses import dataclass, field

import numpy as np

from ._io import fmt, parse_float, read_rows, to_csv
from .errors import (
    AllZero,
    AllZeroColumn,
    AlreadyExpanded,
    ClassMismatch,
    DataError,
    EmptyMatrix,
    NotNormalized,
    ParseError,
    UnknownClass,
)

NORM_TOL = 1e-9
COMPLEMENT_PREFIX = "not_"


def _frozen(values):
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _check_unique(names, what):
    seen = set()
    for n in names:
        if n in seen:
            raise DataError(f"duplicate {what} name {n!r}")
        seen.add(n)


class _ClassColumns:
    """Column lookup shared by the plain and expanded matrices."""

    def class_index(self, names):
        lookup = {c: j for j, c in enumerate(self.class_names)}
        try:
            return np.array([lookup[n] for n in names], dtype=np.intp)
        except KeyError as exc:
            raise UnknownClass(f"class {exc.args[0]!r} has no attribute column") from None

    def columns(self, names):
        """Sub-matrix (attributes x len(names)) for the given classes, in order."""
        return self.values[:, self.class_index(names)]

    @property
    def n_attributes(self):
        return self.values.shape[0]

    @property
    def n_classes(self):
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class AttributeMatrix(_ClassColumns):
    values: np.ndarray
    attribute_names: tuple
    class_names: tuple
    normalized: bool = False

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2:
            raise DataError("attribute matrix must be 2-D")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "attribute_names", tuple(self.attribute_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        m, c = values.shape
        if len(self.attribute_names) != m or len(self.class_names) != c:
            raise DataError(
                f"names do not match shape {values.shape}: "
                f"{len(self.attribute_names)} attributes, {len(self.class_names)} classes"
            )
        _check_unique(self.attribute_names, "attribute")
        _check_unique(self.class_names, "class")
        if not np.all(np.isfinite(values)):
            raise DataError("attribute matrix contains non-finite values")
        if np.any(values < 0):
            raise DataError("attribute values must be non-negative")
        if self.normalized and m:
            norms = np.linalg.norm(values, axis=0)
            if np.any(np.abs(norms - 1.0) > NORM_TOL):
                raise NotNormalized("matrix flagged normalized but columns are not unit length")


@dataclass(frozen=True, eq=False)
class ExpandedAttributeMatrix(_ClassColumns):
    """``[A; 1 - A]`` for a normalized ``A`` with ``M`` rows."""

    values: np.ndarray
    source: AttributeMatrix = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def attribute_names(self):
        names = self.source.attribute_names
        return names + tuple(COMPLEMENT_PREFIX + n for n in names)

    @property
    def class_names(self):
        return self.source.class_names

    @property
    def n_original(self):
        return self.source.n_attributes


def normalize_columns(raw):
    """L2-normalize every class column. Idempotent."""
    if raw.values.shape[0] == 0:
        raise EmptyMatrix("attribute matrix has no rows")
    norms = np.linalg.norm(raw.values, axis=0)
    for j, n in enumerate(norms):
        if n == 0.0:
            raise AllZeroColumn(raw.class_names[j])
    values = raw.values / norms
    return AttributeMatrix(values, raw.attribute_names, raw.class_names, normalized=True)


def complement(a):
    if not a.normalized:
        raise NotNormalized("complement requires a column-normalized matrix")
    return AttributeMatrix(
        1.0 - a.values,
        tuple(COMPLEMENT_PREFIX + n for n in a.attribute_names),
        a.class_names,
        normalized=False,
    )


def expand(a):
    if a.values.shape[0] == 0:
        raise EmptyMatrix("attribute matrix has no rows")
    if not a.normalized:
        raise NotNormalized("expand requires a column-normalized matrix")
    return ExpandedAttributeMatrix(np.vstack([a.values, 1.0 - a.values]), a)


def class_entropy(column):
    """Shannon entropy (nats) of a column after L1 normalization; 0 ln 0 = 0."""
    v = np.asarray(column, dtype=np.float64)
    if v.ndim != 1 or v.size == 0 or np.any(v < 0) or not np.any(v > 0):
        raise AllZero("entropy needs a non-negative column with positive mass")
    p = v / v.sum()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


@dataclass(frozen=True)
class EntropyRecord:
    class_name: str
    entropy_oa: float
    entropy_ca: float

    @property
    def gain(self):
        return self.entropy_ca - self.entropy_oa


def entropy_report(a, s):
    """Per-class entropy of the original vs. the expanded representation."""
    if not a.class_names or tuple(a.class_names) != tuple(s.class_names):
        raise ClassMismatch("original and expanded matrices must cover the same classes")
    return [
        EntropyRecord(name, class_entropy(a.values[:, j]), class_entropy(s.values[:, j]))
        for j, name in enumerate(a.class_names)
    ]


def entropy_table(records):
    rows = [("class", "entropy_oa", "entropy_ca")]
    rows += [(r.class_name, fmt(r.entropy_oa), fmt(r.entropy_ca)) for r in records]
    return to_csv(rows)


def looks_expanded(values, tol=1e-9):
    """True when the row count is even and row i + row i+M/2 sums to one everywhere."""
    values = np.asarray(values)
    m2 = values.shape[0]
    if m2 == 0 or m2 % 2:
        return False
    m = m2 // 2
    return bool(np.all(np.abs(values[:m] + values[m:] - 1.0) <= tol))


def split_expanded(raw):
    """Recover the expanded form from a matrix that was serialized by :func:`attributes_csv`."""
    if not looks_expanded(raw.values):
        raise DataError("matrix is not an expanded [A; 1-A] stack")
    m = raw.values.shape[0] // 2
    top = AttributeMatrix(raw.values[:m], raw.attribute_names[:m], raw.class_names)
    top = normalize_columns(top)
    return expand(top)


def guard_not_expanded(raw, path="<matrix>"):
    if looks_expanded(raw.values):
        raise AlreadyExpanded(f"{path}: rows already pair up to one; matrix looks expanded")


# -- file format -------------------------------------------------------------


def read_attributes(path):
    """Parse ``attribute,<class_1>,...`` CSV into a raw :class:`AttributeMatrix`."""
    rows = list(read_rows(path))
    if not rows:
        raise ParseError(path, 1, "empty attribute file")
    lineno, header = rows[0]
    if header[0] != "attribute" or len(header) < 2:
        raise ParseError(path, lineno, "header must be 'attribute,<class_1>,...,<class_C>'")
    classes = header[1:]
    if len(set(classes)) != len(classes):
        raise ParseError(path, lineno, "duplicate class name in header")
    names, values = [], []
    for lineno, fields in rows[1:]:
        if len(fields) != len(header):
            raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(fields)}")
        names.append(fields[0])
        values.append([parse_float(path, lineno, col, f) for col, f in enumerate(fields[1:], start=2)])
    if not names:
        raise EmptyMatrix(f"{path}: no attribute rows")
    if len(set(names)) != len(names):
        raise ParseError(path, 0, "duplicate attribute name")
    arr = np.array(values, dtype=np.float64)
    bad = np.argwhere(~np.isfinite(arr) | (arr < 0))
    if bad.size:
        i, j = bad[0]
        raise ParseError(path, rows[1 + i][0], "attribute values must be finite and non-negative", column=j + 2)
    return AttributeMatrix(arr, names, classes)


def attributes_csv(matrix):
    rows = [("attribute",) + tuple(matrix.class_names)]
    for name, row in zip(matrix.attribute_names, matrix.values):
        rows.append((name,) + tuple(fmt(v) for v in row))
    return to_csv(rows)
