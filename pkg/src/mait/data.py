"""Tabular data model, CSV/TSV ingestion and leakage-safe stratified splitting."""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._utils import derive_rng
from .exceptions import ParseError, SchemaError, SplitError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
BINARY_OUTCOME = "binary_outcome"
CONTINUOUS_OUTCOME = "continuous_outcome"
TIME_TO_EVENT = "time_to_event"
EVENT_INDICATOR = "event_indicator"
IDENTIFIER = "identifier"

KINDS = (
    CONTINUOUS,
    CATEGORICAL,
    BINARY_OUTCOME,
    CONTINUOUS_OUTCOME,
    TIME_TO_EVENT,
    EVENT_INDICATOR,
    IDENTIFIER,
)
NUMERIC_KINDS = frozenset(
    {CONTINUOUS, BINARY_OUTCOME, CONTINUOUS_OUTCOME, TIME_TO_EVENT, EVENT_INDICATOR}
)
TEXT_KINDS = frozenset({CATEGORICAL, IDENTIFIER})
OUTCOME_KINDS = frozenset({BINARY_OUTCOME, CONTINUOUS_OUTCOME, TIME_TO_EVENT, EVENT_INDICATOR})

DEFAULT_SENTINELS = ("", "NA", "NaN", "null")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str
    declared_categories: tuple = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.declared_categories is not None:
            object.__setattr__(self, "declared_categories", tuple(self.declared_categories))
        if (
            self.kind == BINARY_OUTCOME
            and self.declared_categories is not None
            and len(self.declared_categories) != 2
        ):
            raise SchemaError(
                f"column {self.name!r}: a binary outcome declares exactly two categories "
                "(negative first, positive second)"
            )


class Table:
    """Column-typed table.

    Numeric kinds are stored as float64 arrays with NaN marking MISSING;
    categorical and identifier columns are object arrays with ``None`` as
    MISSING. A binary outcome with declared categories is stored as 0/1
    (first declared category is 0).
    """

    def __init__(self, specs, columns):
        specs = list(specs)
        columns = list(columns)
        if len(specs) != len(columns):
            raise SchemaError("one column array is required per ColumnSpec")
        self.specs = specs
        self._columns = []
        for spec, col in zip(specs, columns):
            if spec.kind in NUMERIC_KINDS:
                col = np.asarray(col, dtype=float)
            else:
                col = np.asarray(
                    [None if v is None else str(v) for v in col], dtype=object
                )
            self._columns.append(col)
        lengths = {len(c) for c in self._columns}
        if len(lengths) > 1:
            raise SchemaError(f"column lengths differ: {sorted(lengths)}")
        self.row_count = lengths.pop() if lengths else 0
        self.column_count = len(specs)

    @classmethod
    def from_dict(cls, data, kinds, categories=None):
        """Build a table from ``{name: values}`` and ``{name: kind}``."""
        categories = categories or {}
        specs = [ColumnSpec(n, kinds[n], categories.get(n)) for n in data]
        return cls(specs, [data[n] for n in data])

    @property
    def names(self):
        return [s.name for s in self.specs]

    def index(self, name):
        for i, spec in enumerate(self.specs):
            if spec.name == name:
                return i
        raise SchemaError(f"no column named {name!r}")

    def spec(self, name):
        return self.specs[self.index(name)]

    def column(self, name):
        return self._columns[self.index(name)]

    def columns_of_kind(self, *kinds):
        return [s.name for s in self.specs if s.kind in kinds]

    def missing_mask(self, name):
        col = self.column(name)
        if self.spec(name).kind in NUMERIC_KINDS:
            return np.isnan(col)
        return np.array([v is None for v in col], dtype=bool)

    def cell(self, row, col):
        value = self._columns[col][row]
        if self.specs[col].kind in NUMERIC_KINDS:
            return None if math.isnan(value) else float(value)
        return value

    @property
    def values(self):
        """Row-major cells; MISSING is ``None``."""
        return [
            [self.cell(r, c) for c in range(self.column_count)]
            for r in range(self.row_count)
        ]

    def matrix(self, names):
        """Float matrix of the named numeric columns (NaN = MISSING)."""
        if not names:
            return np.empty((self.row_count, 0))
        return np.column_stack([self.column(n) for n in names]).astype(float)

    def take(self, rows):
        rows = np.asarray(rows, dtype=int)
        return Table(self.specs, [c[rows] for c in self._columns])

    def select(self, names):
        idx = [self.index(n) for n in names]
        return Table([self.specs[i] for i in idx], [self._columns[i] for i in idx])

    def drop(self, names):
        names = set(names)
        return self.select([n for n in self.names if n not in names])

    def with_columns(self, specs, columns):
        """Return a copy with columns appended (or replaced when names exist)."""
        out_specs, out_cols = list(self.specs), list(self._columns)
        for spec, col in zip(specs, columns):
            existing = [i for i, s in enumerate(out_specs) if s.name == spec.name]
            if existing:
                out_specs[existing[0]] = spec
                out_cols[existing[0]] = col
            else:
                out_specs.append(spec)
                out_cols.append(col)
        return Table(out_specs, out_cols)

    def equals(self, other):
        """Cell-wise identity, MISSING matching MISSING."""
        if self.specs != other.specs or self.row_count != other.row_count:
            return False
        for a, b, spec in zip(self._columns, other._columns, self.specs):
            if spec.kind in NUMERIC_KINDS:
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif list(a) != list(b):
                return False
        return True

    def __repr__(self):
        return f"Table(rows={self.row_count}, columns={self.names})"


@dataclass(frozen=True)
class Violation:
    code: str
    column: str = None
    row: int = None
    message: str = ""


@dataclass
class SplitPlan:
    train_indices: np.ndarray
    test_indices: np.ndarray
    strata: list
    seed: int
    test_fraction: float
    stratum_counts: dict = field(default_factory=dict)


def _detect_delimiter(header_line):
    return "\t" if "\t" in header_line else ","


def _parse_numeric(text, spec, row, sentinels):
    if text in sentinels:
        return math.nan
    if spec.kind == BINARY_OUTCOME and spec.declared_categories is not None:
        try:
            return float(spec.declared_categories.index(text))
        except ValueError:
            raise ParseError(
                f"row {row}, column {spec.name!r}: {text!r} is not one of the declared "
                f"outcome categories {list(spec.declared_categories)}",
                row=row,
                column=spec.name,
            ) from None
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"row {row}, column {spec.name!r}: cannot parse {text!r} as a number",
            row=row,
            column=spec.name,
        ) from None
    if not math.isfinite(value):
        raise ParseError(
            f"row {row}, column {spec.name!r}: non-finite value {text!r}",
            row=row,
            column=spec.name,
        )
    return value


def load_table(path, specs, sentinels=DEFAULT_SENTINELS):
    """Read a comma- or tab-separated file into a :class:`Table`.

    The delimiter is taken from the header line. Columns come out in the
    order of ``specs``; every header must have a spec and vice versa.
    Row numbers in errors are 1-based data rows (the header is row 0).
    """
    sentinels = frozenset(sentinels)
    specs = list(specs)
    with open(path, newline="", encoding="utf-8") as fh:
        header_line = fh.readline()
        fh.seek(0)
        reader = csv.reader(fh, delimiter=_detect_delimiter(header_line))
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [r for r in reader if r]

    known = {s.name for s in specs}
    for name in header:
        if name not in known:
            raise SchemaError(f"unknown column {name!r} in header of {path}")
    for spec in specs:
        if spec.name not in header:
            raise SchemaError(f"column {spec.name!r} is declared but absent from {path}")
    if len(set(header)) != len(header):
        dup = sorted({h for h in header if header.count(h) > 1})
        raise SchemaError(f"duplicate header names: {dup}")

    positions = [header.index(s.name) for s in specs]
    columns = []
    for spec, pos in zip(specs, positions):
        cells = []
        for r, row in enumerate(rows, start=1):
            if len(row) != len(header):
                raise ParseError(
                    f"row {r}: expected {len(header)} fields, found {len(row)}", row=r
                )
            text = row[pos]
            if spec.kind in NUMERIC_KINDS:
                cells.append(_parse_numeric(text, spec, r, sentinels))
            else:
                cells.append(None if text in sentinels else text)
        columns.append(cells)
    return Table(specs, columns)


def _format_cell(value, spec):
    if value is None:
        return ""
    if spec.kind in NUMERIC_KINDS:
        if spec.kind == BINARY_OUTCOME and spec.declared_categories is not None:
            return spec.declared_categories[int(value)]
        return repr(float(value))
    return value


def write_table(t, path, delimiter=","):
    """Write ``t`` so that ``load_table(path, t.specs)`` reproduces it exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(t.names)
        for r in range(t.row_count):
            writer.writerow(
                [_format_cell(t.cell(r, c), t.specs[c]) for c in range(t.column_count)]
            )


def validate_table(t, require_outcome=True):
    """Return the list of invariant violations (empty when the table is clean)."""
    out = []
    seen = set()
    for spec in t.specs:
        if spec.name in seen:
            out.append(Violation("DUPLICATE_NAME", spec.name, None, "duplicate column name"))
        seen.add(spec.name)

    kinds = [s.kind for s in t.specs]
    if kinds.count(BINARY_OUTCOME) > 1:
        out.append(Violation("MULTIPLE_BINARY_OUTCOMES", None, None, "more than one binary outcome"))
    if (TIME_TO_EVENT in kinds) != (EVENT_INDICATOR in kinds):
        out.append(
            Violation("UNPAIRED_SURVIVAL", None, None, "time_to_event and event_indicator must appear together")
        )

    for c, spec in enumerate(t.specs):
        col = t._columns[c]
        if spec.kind in NUMERIC_KINDS:
            missing = np.isnan(col)
            bad = np.isinf(col)
            for r in np.flatnonzero(bad):
                out.append(Violation("NON_FINITE", spec.name, int(r), "non-finite value"))
            obs = ~missing & ~bad
            if spec.kind == TIME_TO_EVENT:
                for r in np.flatnonzero(obs & (col < 0)):
                    out.append(Violation("NEGATIVE_DURATION", spec.name, int(r), f"duration {col[r]!r} < 0"))
            if spec.kind in (BINARY_OUTCOME, EVENT_INDICATOR):
                code = "OUTCOME_NOT_BINARY" if spec.kind == BINARY_OUTCOME else "EVENT_NOT_BINARY"
                for r in np.flatnonzero(obs & (col != 0) & (col != 1)):
                    out.append(Violation(code, spec.name, int(r), f"value {col[r]!r} is not 0/1"))
            if require_outcome and spec.kind in OUTCOME_KINDS:
                for r in np.flatnonzero(missing):
                    out.append(Violation("MISSING_OUTCOME", spec.name, int(r), "outcome cell is MISSING"))
        elif spec.kind == CATEGORICAL and spec.declared_categories is not None:
            allowed = set(spec.declared_categories)
            for r, v in enumerate(col):
                if v is not None and v not in allowed:
                    out.append(Violation("UNDECLARED_CATEGORY", spec.name, r, f"{v!r} not declared"))
    return out


def _outcome_token(value):
    if math.isnan(value):
        return "NA"
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def quantile_bin_tokens(values, quantile_bins):
    """Rank-based quantile bins "Q1".."Qq"; tied values share a bin.

    Bin of the value with (minimum) sorted position i among m observed
    values is floor(i * q / m) + 1, so bin counts differ by at most one when
    all values are distinct.
    """
    values = np.asarray(values, dtype=float)
    tokens = np.array(["NA"] * len(values), dtype=object)
    obs = np.flatnonzero(~np.isnan(values))
    m = len(obs)
    if m == 0:
        return tokens
    sorted_vals = np.sort(values[obs], kind="stable")
    first_pos = np.searchsorted(sorted_vals, values[obs], side="left")
    bins = first_pos * quantile_bins // m + 1
    tokens[obs] = [f"Q{b}" for b in bins]
    return tokens


def composite_key(t, columns, quantile_bins=4):
    """Per-row stratum tokens joining the named columns with ``"|"``."""
    if not columns:
        raise ValueError("composite_key needs at least one column")
    parts = []
    for name in columns:
        spec = t.spec(name)
        col = t.column(name)
        if spec.kind in (CONTINUOUS, CONTINUOUS_OUTCOME, TIME_TO_EVENT):
            parts.append(quantile_bin_tokens(col, quantile_bins))
        elif spec.kind in NUMERIC_KINDS:
            parts.append([_outcome_token(v) for v in col])
        else:
            parts.append(["NA" if v is None else v for v in col])
    return ["|".join(tok) for tok in zip(*parts)]


def stratified_split(t, strata, test_fraction, seed):
    """Split rows per stratum; the last round-half-up share of each shuffled stratum is test.

    ``t`` may be a :class:`Table` or a row count.
    """
    n = t if isinstance(t, (int, np.integer)) else t.row_count
    strata = list(strata)
    if len(strata) != n:
        raise SplitError(f"strata length {len(strata)} != row count {n}")
    if not 0.0 < test_fraction < 1.0:
        raise SplitError("test_fraction must lie in (0, 1)")
    groups = {}
    for i, tok in enumerate(strata):
        groups.setdefault(tok, []).append(i)
    train, test, counts = [], [], {}
    for tok in sorted(groups):
        members = np.asarray(groups[tok])
        size = len(members)
        if size < 2:
            train.extend(members.tolist())
            counts[tok] = (size, 0)
            continue
        perm = members[derive_rng(seed, tok).permutation(size)]
        n_test = int(math.floor(test_fraction * size + 0.5))
        # keep one row in train so no test stratum is unseen in training
        n_test = min(n_test, size - 1)
        cut = size - n_test
        train.extend(perm[:cut].tolist())
        test.extend(perm[cut:].tolist())
        counts[tok] = (size, n_test)
    if not test:
        raise SplitError("stratified split produced an empty test set")
    return SplitPlan(
        train_indices=np.sort(np.asarray(train, dtype=int)),
        test_indices=np.sort(np.asarray(test, dtype=int)),
        strata=strata,
        seed=seed,
        test_fraction=test_fraction,
        stratum_counts=counts,
    )
