"""Deterministic cell repair.

Strategies are tried per flagged cell, in fixed precedence:

1. majority vote within the lhs group for functional/similarity violations,
   only when a strictly more frequent value exists;
2. copy from the co-located sensor's same-row reading, when that donor cell
   carries no independent evidence of being wrong (its mismatch with the
   cell being repaired does not count, otherwise both sides of every
   diverging pair would disqualify each other; a mismatch with a third
   sensor does count);
3. column median of unflagged cells for capability violations and numeric
   nulls;
4. most frequent unflagged value for non-numeric nulls;
5. otherwise the cell stays detected but unrepaired.

Delete mode replaces every flagged non-null cell with null instead.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping

from .detectors import DetectionReport, Finding
from .extraction import CheckPlan, Denial, DependencySet, Matching, compile_plans
from .table import CellRef, DatasetConfig, Table, parse_number

STRATEGY_MAJORITY = "majority"
STRATEGY_COLOCATED_COPY = "colocated_copy"
STRATEGY_COLUMN_MEDIAN = "column_median"
STRATEGY_COLUMN_MODE = "column_mode"
STRATEGY_DELETE = "delete"

REPAIR_MODES = ("repair", "delete")


class RepairApplicationError(Exception):
    """A repair no longer matches the table it was planned against."""


@dataclass(frozen=True)
class RepairAction:
    cell: CellRef
    old_value: str | None
    new_value: str | None  # None clears the cell
    strategy: str


@dataclass(frozen=True)
class RepairPlan:
    actions: tuple[RepairAction, ...]

    def __len__(self) -> int:
        return len(self.actions)

    def by_cell(self) -> dict[CellRef, RepairAction]:
        return {action.cell: action for action in self.actions}


EMPTY_PLAN = RepairPlan(())


def _group_majority(
    table: Table, row: int, lhs: str, rhs: str, current: str
) -> str | None:
    """Strictly most frequent rhs value in the row's lhs group, if any."""
    left = table.cell(row, lhs)
    if left is None:
        return None
    counts: Counter[str] = Counter()
    lhs_index = table.column_index(lhs)
    rhs_index = table.column_index(rhs)
    for record in table.rows:
        if record[lhs_index] == left and record[rhs_index] is not None:
            counts[record[rhs_index]] += 1
    top = max(counts.values())
    candidates = sorted(value for value, count in counts.items() if count == top)
    winner = candidates[0]
    if winner != current and counts[winner] > counts[current]:
        return winner
    return None


def _colocation_partners(plans: list[CheckPlan]) -> dict[str, list[str]]:
    partners: dict[str, list[str]] = {}
    for plan in plans:
        if plan.kind != "colocation":
            continue
        col_a, col_b = plan.columns
        partners.setdefault(col_a, []).append(col_b)
        partners.setdefault(col_b, []).append(col_a)
    return {column: sorted(set(others)) for column, others in partners.items()}


def _donor_trusted(
    findings: list[Finding],
    repaired_column: str,
    plan_columns: Mapping[str, tuple[str, ...]],
) -> bool:
    """True when every finding against the donor is its pairing with the repaired cell."""
    for finding in findings:
        if finding.detector != "colocation":
            return False
        if repaired_column not in plan_columns.get(finding.dependency_id or "", ()):
            return False
    return True


def propose_repairs(
    table: Table,
    report: DetectionReport,
    depset: DependencySet,
    config: DatasetConfig,
    mode: str = "repair",
) -> RepairPlan:
    """One proposal at most per flagged cell, per the precedence above."""
    if mode not in REPAIR_MODES:
        raise ValueError(f"unknown repair mode {mode!r}")
    findings_by_cell: dict[CellRef, list[Finding]] = {}
    for finding in report.findings:
        findings_by_cell.setdefault(finding.cell, []).append(finding)
    flagged = set(findings_by_cell)
    cells = sorted(findings_by_cell, key=lambda ref: (ref.row, ref.column))

    if mode == "delete":
        actions = [
            RepairAction(cell, table.cell_at(cell), None, STRATEGY_DELETE)
            for cell in cells
            if table.cell_at(cell) is not None
        ]
        return RepairPlan(tuple(actions))

    plans = compile_plans(depset, config, dict(table.schema))
    partners = _colocation_partners(plans)
    plan_columns = {
        plan.dependency_id: plan.columns for plan in plans if plan.kind == "colocation"
    }
    deps_by_id = {dep.id: dep for dep in depset.dependencies}

    actions = []
    for cell in cells:
        current = table.cell_at(cell)
        proposal = _propose_for_cell(
            table, cell, current, findings_by_cell, flagged, partners, plan_columns, deps_by_id
        )
        if proposal is not None:
            actions.append(RepairAction(cell, current, proposal[0], proposal[1]))
    return RepairPlan(tuple(actions))


def _propose_for_cell(
    table: Table,
    cell: CellRef,
    current: str | None,
    findings_by_cell: Mapping[CellRef, list[Finding]],
    flagged: set[CellRef],
    partners: Mapping[str, list[str]],
    plan_columns: Mapping[str, tuple[str, ...]],
    deps_by_id: Mapping[str, object],
) -> tuple[str, str] | None:
    findings = findings_by_cell[cell]
    numeric = table.column_type(cell.column) == "number"

    # 1: majority vote inside the lhs group
    if current is not None:
        group_deps = []
        for finding in findings:
            if finding.detector in ("denial", "matching") and finding.dependency_id:
                dep = deps_by_id.get(finding.dependency_id)
                if isinstance(dep, (Denial, Matching)) and dep.rhs == cell.column:
                    group_deps.append(dep)
        for dep in sorted(group_deps, key=lambda d: d.id):
            winner = _group_majority(table, cell.row, dep.lhs, dep.rhs, current)
            if winner is not None:
                return winner, STRATEGY_MAJORITY

    # 2: copy the co-located sensor's reading
    for partner_column in partners.get(cell.column, ()):
        donor = CellRef(cell.row, partner_column)
        value = table.cell_at(donor)
        if value is None:
            continue
        if donor in flagged and not _donor_trusted(
            findings_by_cell[donor], cell.column, plan_columns
        ):
            continue
        if value != current:
            return value, STRATEGY_COLOCATED_COPY

    # 3: column median for capability violations and numeric nulls
    capability_hit = any(finding.detector == "capability" for finding in findings)
    if numeric and (capability_hit or current is None):
        donors = [
            (parse_number(value), value)
            for row, value in enumerate(table.column_values(cell.column))
            if value is not None and CellRef(row, cell.column) not in flagged
        ]
        if donors:
            donors.sort()
            value = donors[(len(donors) - 1) // 2][1]
            if value != current:
                return value, STRATEGY_COLUMN_MEDIAN

    # 4: most frequent unflagged value for other nulls
    if not numeric and current is None:
        counts: Counter[str] = Counter(
            value
            for row, value in enumerate(table.column_values(cell.column))
            if value is not None and CellRef(row, cell.column) not in flagged
        )
        if counts:
            top = max(counts.values())
            value = min(v for v, count in counts.items() if count == top)
            return value, STRATEGY_COLUMN_MODE

    return None


def apply_repairs(table: Table, plan: RepairPlan) -> Table:
    """New table differing exactly at the planned cells; the input is unchanged."""
    replacements: dict[CellRef, str | None] = {}
    for action in plan.actions:
        if not (0 <= action.cell.row < len(table.rows)):
            raise RepairApplicationError(
                f"cell ({action.cell.row}, {action.cell.column}) out of range"
            )
        found = table.cell_at(action.cell)
        if found != action.old_value:
            raise RepairApplicationError(
                f"cell ({action.cell.row}, {action.cell.column}) holds {found!r},"
                f" plan expected {action.old_value!r}"
            )
        replacements[action.cell] = action.new_value
    return table.with_cells(replacements)
