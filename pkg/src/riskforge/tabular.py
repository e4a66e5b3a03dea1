"""Column-typed in-memory tables with CSV ingestion and aggregation merging.

A :class:`Table` is an ordered list of named columns, each either Numeric or
Categorical. Missing cells are represented by ``None``; numeric cells are
always finite floats (NaN/inf on ingest become missing). Tables are treated
as immutable after construction: every operation returns a new table.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import CsvError, DataError, SchemaError

#: Missing-cell sentinel. Kept as a name for readability at call sites.
MISSING = None


class ColumnKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


class Statistic(str, Enum):
    MEAN = "mean"
    MAX = "max"
    SUM = "sum"
    MIN = "min"
    COUNT = "count"
    STD = "std"


@dataclass(frozen=True)
class Column:
    """One named column; ``values`` holds floats/strings with None for missing."""

    name: str
    kind: ColumnKind
    values: tuple

    def __post_init__(self):
        for v in self.values:
            if v is MISSING:
                continue
            if self.kind is ColumnKind.NUMERIC:
                if not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise DataError(
                        f"numeric column {self.name!r} contains non-finite cell {v!r}"
                    )
            else:
                if not isinstance(v, str):
                    raise DataError(
                        f"categorical column {self.name!r} contains non-string cell {v!r}"
                    )

    def non_missing(self) -> list:
        return [v for v in self.values if v is not MISSING]


@dataclass(frozen=True)
class Table:
    columns: tuple[Column, ...]
    name: str = ""

    def __post_init__(self):
        seen = set()
        for col in self.columns:
            if col.name in seen:
                raise SchemaError(f"duplicate column name {col.name!r}")
            seen.add(col.name)
        lengths = {len(col.values) for col in self.columns}
        if len(lengths) > 1:
            raise SchemaError(f"columns have differing lengths: {sorted(lengths)}")

    @property
    def row_count(self) -> int:
        return len(self.columns[0].values) if self.columns else 0

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for col in self.columns:
            if col.name == name:
                return col
        raise SchemaError(f"unknown column {name!r}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def with_columns(self, new: Iterable[Column], name: str | None = None) -> "Table":
        return Table(self.columns + tuple(new), name if name is not None else self.name)


@dataclass(frozen=True)
class AggregationSpec:
    """How to fold an auxiliary table into the base table, keyed by ID."""

    key_column: str
    value_columns: tuple[str, ...]
    statistics: tuple[Statistic, ...]

    def __post_init__(self):
        if not self.statistics:
            raise DataError("aggregation requires at least one statistic")
        if len(set(self.statistics)) != len(self.statistics):
            raise DataError("duplicate statistics in aggregation spec")


def _parse_numeric(field_text: str) -> float | None:
    """Parse one CSV field as a number; NaN/inf collapse to missing."""
    value = float(field_text)
    return value if math.isfinite(value) else MISSING


def _looks_numeric(field_text: str) -> bool:
    try:
        float(field_text)
    except ValueError:
        return False
    return True


def read_csv(
    path: str | os.PathLike,
    schema_hint: Mapping[str, ColumnKind] | None = None,
) -> Table:
    """Read an RFC-4180 CSV file with a header row into a Table.

    Empty fields and the literal token ``NA`` are missing. A column is
    inferred Numeric iff every non-missing field parses as a number;
    ``schema_hint`` overrides inference per column name.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise CsvError(f"{path}: empty file, header row required") from None
            rows = list(reader)
    except OSError as exc:
        raise CsvError(f"cannot read {path}: {exc}") from exc

    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise CsvError(f"{path}: duplicate header names {dupes}")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise CsvError(
                f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}"
            )

    hint = dict(schema_hint or {})
    for name in hint:
        if name not in header:
            raise CsvError(f"{path}: schema hint names unknown column {name!r}")

    columns = []
    for j, name in enumerate(header):
        raw = [row[j] for row in rows]
        present = [(i, f) for i, f in enumerate(raw) if f not in ("", "NA")]
        kind = hint.get(name)
        if kind is None:
            kind = (
                ColumnKind.NUMERIC
                if all(_looks_numeric(f) for _, f in present)
                else ColumnKind.CATEGORICAL
            )
        values: list = [MISSING] * len(raw)
        for i, f in present:
            if kind is ColumnKind.NUMERIC:
                if not _looks_numeric(f):
                    raise CsvError(
                        f"{path}: column {name!r} hinted numeric but row {i + 2} "
                        f"holds {f!r}"
                    )
                values[i] = _parse_numeric(f)
            else:
                values[i] = f
        columns.append(Column(name, kind, tuple(values)))

    stem = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return Table(tuple(columns), name=stem)


def write_csv(table: Table, path: str | os.PathLike) -> None:
    """Write a Table as RFC-4180 CSV; missing cells become empty fields.

    Numbers are written with ``repr`` so a read-back reproduces every cell
    exactly.
    """
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.column_names)
        for i in range(table.row_count):
            row = []
            for col in table.columns:
                v = col.values[i]
                if v is MISSING:
                    row.append("")
                elif col.kind is ColumnKind.NUMERIC:
                    row.append(repr(float(v)))
                else:
                    row.append(v)
            writer.writerow(row)


def select_columns(table: Table, names: Sequence[str]) -> Table:
    """Project onto ``names``, preserving row order and the requested order."""
    return Table(tuple(table.column(n) for n in names), table.name)


def _sample_std(values: list[float]) -> float | None:
    n = len(values)
    if n < 2:
        return MISSING
    mean = sum(values) / n
    return math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))


_STAT_FN = {
    Statistic.MEAN: lambda vs: sum(vs) / len(vs),
    Statistic.MAX: max,
    Statistic.SUM: sum,
    Statistic.MIN: min,
    Statistic.STD: _sample_std,
}


def aggregate_merge(
    base: Table,
    aux: Table,
    spec: AggregationSpec,
    aux_name: str | None = None,
) -> Table:
    """Fold per-key statistics of ``aux`` value columns into ``base``.

    Adds one Numeric column per (value column, statistic) named
    ``<aux>_<col>_<STAT>``. Rows without a matching aux key get missing
    cells, except Count which gets 0. Missing aux cells are ignored.
    """
    if not base.has_column(spec.key_column):
        raise SchemaError(f"key column {spec.key_column!r} absent from base table")
    if not aux.has_column(spec.key_column):
        raise SchemaError(f"key column {spec.key_column!r} absent from aux table")
    prefix = aux_name or aux.name or "aux"

    value_cols = []
    for name in spec.value_columns:
        col = aux.column(name)
        if col.kind is not ColumnKind.NUMERIC:
            raise SchemaError(f"aux value column {name!r} is not numeric")
        value_cols.append(col)

    aux_keys = aux.column(spec.key_column).values
    groups: dict = {}
    for i, key in enumerate(aux_keys):
        if key is MISSING:
            continue
        groups.setdefault(key, []).append(i)

    base_keys = base.column(spec.key_column).values
    new_columns = []
    for col in value_cols:
        per_key: dict = {}
        for key, idxs in groups.items():
            per_key[key] = [col.values[i] for i in idxs if col.values[i] is not MISSING]
        for stat in spec.statistics:
            out = []
            for key in base_keys:
                vs = per_key.get(key, []) if key is not MISSING else []
                if stat is Statistic.COUNT:
                    out.append(float(len(vs)))
                elif not vs:
                    out.append(MISSING)
                else:
                    out.append(_STAT_FN[stat](vs))
            new_name = f"{prefix}_{col.name}_{stat.name}"
            if base.has_column(new_name):
                raise SchemaError(f"merged column {new_name!r} already exists")
            new_columns.append(Column(new_name, ColumnKind.NUMERIC, tuple(out)))

    return base.with_columns(new_columns)
