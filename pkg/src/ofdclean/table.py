"""Typed columnar tables with cell-level addressing and CSV round-tripping.

Tables are immutable after load; repairs produce new table values.  Null is
encoded as an empty CSV field, and any whitespace-only field collapses to
null on load.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping

COLUMN_TYPES = ("text", "number", "timestamp")
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S"

NUMBER_TOLERANCE = 1e-9


class ConfigError(Exception):
    """Invalid dataset or run configuration (bad bindings, types, keys)."""


class DataError(Exception):
    """Malformed data file content (ragged rows, unparseable typed cells)."""


@dataclass(frozen=True)
class CellRef:
    row: int  # 0-based data row
    column: str


@dataclass(frozen=True)
class DatasetConfig:
    """Binds context-model identifiers to table columns and sets knobs.

    column_bindings maps a sensor (or device) IRI to the column holding its
    values; timestamp_bindings maps a device IRI to its timestamp column.
    health_ranges lists half-open [start, end) windows in which a device is
    known unhealthy.
    """

    column_types: Mapping[str, str] = field(default_factory=dict)
    column_bindings: Mapping[str, str] = field(default_factory=dict)
    timestamp_bindings: Mapping[str, str] = field(default_factory=dict)
    colocation_tolerance: float = 5.0
    key_column: str | None = None
    sensor_id_column: str | None = None
    device_id_column: str | None = None
    health_ranges: tuple[tuple[str, str, str], ...] = ()

    def __post_init__(self) -> None:
        for column, ctype in self.column_types.items():
            if ctype not in COLUMN_TYPES:
                raise ConfigError(f"column {column!r}: unknown type {ctype!r}")
        if self.colocation_tolerance < 0:
            raise ConfigError("co-location tolerance must be >= 0")

    def type_of(self, column: str) -> str:
        return self.column_types.get(column, "text")


def parse_number(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite number {text!r}")
    return value


def is_timestamp(text: str) -> bool:
    try:
        datetime.strptime(text, TIMESTAMP_FORMAT)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class Table:
    schema: tuple[tuple[str, str], ...]
    rows: tuple[tuple[str | None, ...], ...]

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.schema)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), len(self.schema))

    def column_index(self, column: str) -> int:
        for i, (name, _) in enumerate(self.schema):
            if name == column:
                return i
        raise ConfigError(f"no such column {column!r}")

    def column_type(self, column: str) -> str:
        return self.schema[self.column_index(column)][1]

    def cell(self, row: int, column: str) -> str | None:
        return self.rows[row][self.column_index(column)]

    def cell_at(self, ref: CellRef) -> str | None:
        return self.cell(ref.row, ref.column)

    def number(self, row: int, column: str) -> float | None:
        value = self.rows[row][self.column_index(column)]
        return None if value is None else parse_number(value)

    def column_values(self, column: str) -> list[str | None]:
        index = self.column_index(column)
        return [row[index] for row in self.rows]

    def with_cells(self, replacements: Mapping[CellRef, str | None]) -> "Table":
        """New table with the given cells replaced; the input is unchanged."""
        by_row: dict[int, dict[int, str | None]] = {}
        for ref, value in replacements.items():
            if not (0 <= ref.row < len(self.rows)):
                raise DataError(f"cell ({ref.row}, {ref.column}) out of range")
            by_row.setdefault(ref.row, {})[self.column_index(ref.column)] = value
        rows = list(self.rows)
        for row_index, cols in by_row.items():
            row = list(rows[row_index])
            for col_index, value in cols.items():
                row[col_index] = value
            rows[row_index] = tuple(row)
        return Table(self.schema, tuple(rows))


def _normalize(field_text: str) -> str | None:
    return None if field_text.strip() == "" else field_text


def load_csv(text: str, config: DatasetConfig) -> Table:
    """Parse CSV with a mandatory header; cells are typed per the config."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("missing header row") from None
    schema = tuple((name, config.type_of(name)) for name in header)
    rows: list[tuple[str | None, ...]] = []
    for row_index, record in enumerate(reader):
        if not record and len(header) == 1:
            record = [""]  # a blank line is one null field in a 1-column table
        if len(record) != len(header):
            raise DataError(
                f"row {row_index}: expected {len(header)} fields, got {len(record)}"
            )
        cells = tuple(_normalize(value) for value in record)
        for name, value in zip(header, cells):
            if value is None:
                continue
            ctype = config.type_of(name)
            if ctype == "number":
                try:
                    parse_number(value)
                except ValueError:
                    raise DataError(
                        f"cell ({row_index}, {name}): {value!r} is not a number"
                    ) from None
            elif ctype == "timestamp" and not is_timestamp(value):
                raise DataError(
                    f"cell ({row_index}, {name}): {value!r} is not a"
                    f" {TIMESTAMP_FORMAT} timestamp"
                )
        rows.append(cells)
    return Table(schema, tuple(rows))


def write_csv(table: Table) -> str:
    """Inverse of load_csv on well-typed tables; null becomes an empty field."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(table.column_names)
    for row in table.rows:
        writer.writerow(["" if value is None else value for value in row])
    return out.getvalue()


@dataclass(frozen=True)
class ColumnStats:
    available: bool
    most_frequent: str | None = None
    median: float | None = None
    minimum: float | None = None
    maximum: float | None = None


def most_frequent_value(values: Iterable[str]) -> str | None:
    """Most frequent value; ties break to the lexicographically smallest."""
    counts = Counter(values)
    if not counts:
        return None
    top = max(counts.values())
    return min(value for value, count in counts.items() if count == top)


def column_stats(table: Table, column: str) -> ColumnStats:
    """Summary of a column's non-null cells; numeric fields only for numbers."""
    values = [v for v in table.column_values(column) if v is not None]
    if not values:
        return ColumnStats(available=False)
    mode = most_frequent_value(values)
    if table.column_type(column) != "number":
        return ColumnStats(available=True, most_frequent=mode)
    numbers = sorted(parse_number(v) for v in values)
    median = numbers[(len(numbers) - 1) // 2]  # lower middle on even counts
    return ColumnStats(
        available=True,
        most_frequent=mode,
        median=median,
        minimum=numbers[0],
        maximum=numbers[-1],
    )
