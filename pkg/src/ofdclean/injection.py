"""Seeded error injection with ground truth.

Per category, ceil(rate * rows) distinct rows are drawn and one eligible
target cell of each is corrupted; a cell that is already corrupted (or
cannot be made to differ) is skipped, so totals can fall slightly below
categories * ceil(rate * rows).  The generator is random.Random (Mersenne
Twister) driven through a fixed call sequence, so one seed reproduces the
same dirty table and ground truth on any platform.  Runs are sequential;
distinct runs are independent.
"""

from __future__ import annotations

import math
import random
import string
from dataclasses import dataclass
from typing import Mapping

from .table import CellRef, Table, parse_number

CATEGORY_ORDER = ("typo", "value_error", "null", "outlier")
OUTLIER_MODES = ("original_range", "doubled_range")

_TYPO_ALPHABET = string.ascii_lowercase + string.digits
_MAX_DRAWS = 20


class InjectionError(Exception):
    """The injection spec cannot be applied to the table."""


@dataclass(frozen=True)
class InjectionSpec:
    """What to corrupt: per-category row rate, categories, targets, seed.

    targets maps each category to the columns it may corrupt; typos are
    restricted to text columns and outliers to numeric columns.
    """

    rate: float
    categories: tuple[str, ...]
    targets: Mapping[str, tuple[str, ...]]
    outlier_mode: str = "doubled_range"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.rate <= 1:
            raise InjectionError(f"rate {self.rate} outside [0, 1]")
        if self.outlier_mode not in OUTLIER_MODES:
            raise InjectionError(f"unknown outlier mode {self.outlier_mode!r}")
        for category in self.categories:
            if category not in CATEGORY_ORDER:
                raise InjectionError(f"unknown error category {category!r}")
            if not self.targets.get(category):
                raise InjectionError(f"category {category!r} has no target columns")

    def validate_against(self, table: Table) -> None:
        for category in self.categories:
            for column in self.targets[category]:
                ctype = table.column_type(column)  # raises on missing column
                if category == "typo" and ctype != "text":
                    raise InjectionError(f"typo targets text columns only, {column!r} is {ctype}")
                if category == "outlier" and ctype != "number":
                    raise InjectionError(
                        f"outlier targets numeric columns only, {column!r} is {ctype}"
                    )

    @classmethod
    def uniform(
        cls,
        rate: float,
        categories: tuple[str, ...],
        columns: tuple[str, ...],
        table: Table,
        outlier_mode: str = "doubled_range",
        seed: int = 0,
    ) -> "InjectionSpec":
        """One flat column list, filtered per category's type constraint."""
        targets = {}
        for category in categories:
            if category == "typo":
                eligible = tuple(c for c in columns if table.column_type(c) == "text")
            elif category == "outlier":
                eligible = tuple(c for c in columns if table.column_type(c) == "number")
            else:
                eligible = tuple(columns)
            targets[category] = eligible
        return cls(rate, categories, targets, outlier_mode, seed)


GroundTruth = dict[CellRef, "str | None"]  # corrupted cell -> original value


@dataclass
class _ColumnRange:
    minimum: float
    maximum: float

    @property
    def span(self) -> float:
        return self.maximum - self.minimum


def _typo(rng: random.Random, text: str) -> str | None:
    ops = ["insert", "replace"]
    if len(text) >= 1:
        ops.append("delete")
    if len(text) >= 2:
        ops.append("swap")
    op = rng.choice(sorted(ops))
    if op == "swap":
        i = rng.randrange(len(text) - 1)
        return text[:i] + text[i + 1] + text[i] + text[i + 2:]
    if op == "insert":
        i = rng.randrange(len(text) + 1)
        return text[:i] + rng.choice(_TYPO_ALPHABET) + text[i:]
    if op == "delete":
        i = rng.randrange(len(text))
        return text[:i] + text[i + 1:]
    i = rng.randrange(len(text)) if text else 0
    ch = rng.choice(_TYPO_ALPHABET)
    return text[:i] + ch + text[i + 1:] if text else ch


def _corrupt(
    rng: random.Random,
    category: str,
    original: str,
    domain: list[str],
    outlier_mode: str,
    col_range: _ColumnRange | None,
) -> str | None | object:
    """New cell value, None for a cleared cell, or _FAILED when impossible."""
    if category == "null":
        return None
    for _ in range(_MAX_DRAWS):
        if category == "typo":
            candidate = _typo(rng, original)
        elif category == "value_error":
            others = [value for value in domain if value != original]
            if not others:
                return _FAILED
            candidate = rng.choice(others)
        else:  # outlier
            if col_range is None or col_range.span == 0:
                return _FAILED
            if outlier_mode == "original_range":
                low, high = col_range.minimum, col_range.maximum
            else:
                pad = col_range.span / 2  # total width doubles
                low, high = col_range.minimum - pad, col_range.maximum + pad
            candidate = repr(rng.uniform(low, high))
        if candidate is not None and candidate != original and candidate.strip() != "":
            return candidate
    return _FAILED


_FAILED = object()


def inject(table: Table, spec: InjectionSpec) -> tuple[Table, GroundTruth]:
    """Dirty copy of the table plus the original values of corrupted cells."""
    spec.validate_against(table)
    n_rows = len(table.rows)
    count = math.ceil(spec.rate * n_rows)
    rng = random.Random(spec.seed)

    domains: dict[str, list[str]] = {}
    ranges: dict[str, _ColumnRange | None] = {}
    for column, ctype in table.schema:
        values = sorted({v for v in table.column_values(column) if v is not None})
        domains[column] = values
        if ctype == "number" and values:
            numbers = [parse_number(v) for v in values]
            ranges[column] = _ColumnRange(min(numbers), max(numbers))
        else:
            ranges[column] = None

    truth: GroundTruth = {}
    replacements: dict[CellRef, str | None] = {}
    for category in CATEGORY_ORDER:
        if category not in spec.categories or count == 0:
            continue
        columns = spec.targets[category]
        for row in rng.sample(range(n_rows), count):
            column = rng.choice(columns)
            ref = CellRef(row, column)
            if ref in truth:
                continue  # already corrupted by an earlier category
            original = table.cell_at(ref)
            if original is None:
                continue  # nothing to corrupt distinguishably
            candidate = _corrupt(
                rng, category, original, domains[column], spec.outlier_mode, ranges[column]
            )
            if candidate is _FAILED:
                continue
            truth[ref] = original
            replacements[ref] = candidate  # type: ignore[assignment]
    if not truth and spec.rate > 0 and spec.categories and n_rows > 0:
        raise InjectionError("no eligible target cells")
    return table.with_cells(replacements), truth
