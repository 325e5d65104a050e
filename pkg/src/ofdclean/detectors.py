"""Dependency evaluation on tables.

Each compiled check plan is evaluated row-wise or pairwise and contributes
cell-level findings; the per-plan results also fold into a boolean feature
matrix with one column per active dependency (true = fulfilled for that
row).  Null cells never trigger pairwise checks; the null detector owns
them.  Detectors are pure over immutable inputs, so per-plan evaluation can
run in any order without changing the merged, deterministically sorted
report.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

from .extraction import (
    Capability,
    CheckPlan,
    Denial,
    DependencySet,
    DeviceLink,
    Matching,
    Monitoring,
    Temporal,
    compile_plans,
    local_name,
)
from .table import CellRef, DatasetConfig, Table

NULL_DETECTOR = "null"
ZSCORE_DETECTOR = "zscore"

RESOLUTION_SLACK = 1e-9


@dataclass(frozen=True)
class Finding:
    cell: CellRef
    detector: str
    dependency_id: str | None
    reason: str


def _finding_key(finding: Finding) -> tuple:
    return (
        finding.cell.row,
        finding.cell.column,
        finding.detector,
        finding.dependency_id or "",
    )


@dataclass(frozen=True)
class DetectionReport:
    """Deduplicated findings in deterministic (row, column, detector) order."""

    findings: tuple[Finding, ...]

    @classmethod
    def collect(cls, findings: Iterable[Finding]) -> "DetectionReport":
        unique: dict[tuple, Finding] = {}
        for finding in findings:
            unique.setdefault(_finding_key(finding), finding)
        return cls(tuple(sorted(unique.values(), key=_finding_key)))

    def __len__(self) -> int:
        return len(self.findings)

    def cells(self) -> set[CellRef]:
        return {finding.cell for finding in self.findings}

    def at(self, cell: CellRef) -> list[Finding]:
        return [finding for finding in self.findings if finding.cell == cell]


EMPTY_REPORT = DetectionReport(())


# --- similarity ---------------------------------------------------------------

def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


def similarity(a: str, b: str) -> float:
    """Normalized edit similarity in [0, 1]; two empty texts are identical."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - edit_distance(a, b) / longest


# --- per-kind evaluation --------------------------------------------------------

def _pairwise_groups(table: Table, lhs: str, rhs: str) -> dict[str, list[tuple[int, str]]]:
    """Rows blocked by equal lhs value; null lhs or rhs cells are excluded."""
    groups: dict[str, list[tuple[int, str]]] = {}
    lhs_index = table.column_index(lhs)
    rhs_index = table.column_index(rhs)
    for row, record in enumerate(table.rows):
        left, right = record[lhs_index], record[rhs_index]
        if left is None or right is None:
            continue
        groups.setdefault(left, []).append((row, right))
    return groups


def _eval_denial_plan(table: Table, plan: CheckPlan) -> list[Finding]:
    lhs, rhs = plan.columns
    findings = []
    for left, members in _pairwise_groups(table, lhs, rhs).items():
        values = {value for _, value in members}
        if len(values) < 2:
            continue
        # any row here pairs with a row holding a different rhs value
        for row, value in members:
            findings.append(
                Finding(
                    CellRef(row, rhs),
                    "denial",
                    plan.dependency_id,
                    f"{rhs} values disagree where {lhs} = {left!r}",
                )
            )
    return findings


def _eval_matching_plan(table: Table, plan: CheckPlan) -> list[Finding]:
    assert plan.threshold is not None
    lhs, rhs = plan.columns
    findings = []
    for left, members in _pairwise_groups(table, lhs, rhs).items():
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                (row_a, val_a), (row_b, val_b) = members[i], members[j]
                score = similarity(val_a, val_b)
                if score < plan.threshold:
                    reason = (
                        f"{rhs} similarity {score:.2f} below {plan.threshold:g}"
                        f" where {lhs} = {left!r}"
                    )
                    findings.append(
                        Finding(CellRef(row_a, rhs), "matching", plan.dependency_id, reason)
                    )
                    findings.append(
                        Finding(CellRef(row_b, rhs), "matching", plan.dependency_id, reason)
                    )
    return findings


def _eval_device_link_plan(table: Table, plan: CheckPlan) -> list[Finding]:
    sensor_col, device_col = plan.columns
    findings = []
    for row in range(len(table.rows)):
        sensor = table.cell(row, sensor_col)
        device = table.cell(row, device_col)
        if sensor is None or device is None:
            continue
        if sensor != plan.sensor_name:
            continue  # unknown sensors are not violations
        if device != plan.device_name:
            reason = (
                f"sensor {plan.sensor_name} is attached to {plan.device_name},"
                f" row pairs it with {device!r}"
            )
            findings.append(Finding(CellRef(row, sensor_col), "device_link", plan.dependency_id, reason))
            findings.append(Finding(CellRef(row, device_col), "device_link", plan.dependency_id, reason))
    return findings


def _eval_temporal_plan(table: Table, plan: CheckPlan) -> list[Finding]:
    pred_col, succ_col = plan.columns
    findings = []
    for row in range(len(table.rows)):
        sent = table.cell(row, pred_col)
        received = table.cell(row, succ_col)
        if sent is None or received is None:
            continue
        if sent >= received:  # transmission time must be greater than zero
            reason = f"{pred_col} {sent} is not before {succ_col} {received}"
            findings.append(Finding(CellRef(row, pred_col), "temporal", plan.dependency_id, reason))
            findings.append(Finding(CellRef(row, succ_col), "temporal", plan.dependency_id, reason))
    return findings


def _eval_colocation_plan(table: Table, plan: CheckPlan) -> list[Finding]:
    assert plan.tolerance is not None
    col_a, col_b = plan.columns
    findings = []
    for row in range(len(table.rows)):
        first = table.number(row, col_a)
        second = table.number(row, col_b)
        if first is None or second is None:
            continue
        gap = abs(first - second)
        if gap > plan.tolerance:
            reason = (
                f"co-located readings {col_a} = {first:g} and {col_b} = {second:g}"
                f" differ by {gap:g} (tolerance {plan.tolerance:g})"
            )
            findings.append(Finding(CellRef(row, col_a), "colocation", plan.dependency_id, reason))
            findings.append(Finding(CellRef(row, col_b), "colocation", plan.dependency_id, reason))
    return findings


def _eval_monitoring_plan(table: Table, plan: CheckPlan) -> list[Finding]:
    value_col, ts_col = plan.columns
    findings = []
    for row in range(len(table.rows)):
        stamp = table.cell(row, ts_col)
        if stamp is None:
            continue
        for start, end in plan.unhealthy:
            if start <= stamp < end:
                reason = f"device unhealthy in [{start}, {end}) at {stamp}"
                findings.append(
                    Finding(CellRef(row, value_col), "monitoring", plan.dependency_id, reason)
                )
                break
    return findings


def _eval_capability_plan(table: Table, plan: CheckPlan) -> list[Finding]:
    assert plan.capability_kind is not None and plan.capability_value is not None
    (column,) = plan.columns
    bound = plan.capability_value
    findings = []
    for row in range(len(table.rows)):
        value = table.number(row, column)
        if value is None:
            continue
        reason = None
        if plan.capability_kind == "min" and value < bound:
            reason = f"value {value:g} below measurable minimum {bound:g}"
        elif plan.capability_kind == "max" and value > bound:
            reason = f"value {value:g} above measurable maximum {bound:g}"
        elif plan.capability_kind == "resolution":
            offset = abs(value - round(value / bound) * bound)
            if offset > RESOLUTION_SLACK:
                reason = f"value {value:g} off the {bound:g} resolution grid"
        if reason is not None:
            findings.append(Finding(CellRef(row, column), "capability", plan.dependency_id, reason))
    return findings


_PLAN_EVALUATORS = {
    "denial": _eval_denial_plan,
    "matching": _eval_matching_plan,
    "device_link": _eval_device_link_plan,
    "temporal": _eval_temporal_plan,
    "colocation": _eval_colocation_plan,
    "monitoring": _eval_monitoring_plan,
    "capability": _eval_capability_plan,
}

#: Names accepted by detector toggles: every plan kind plus the null detector.
DETECTOR_NAMES = frozenset(_PLAN_EVALUATORS) | {NULL_DETECTOR}


def eval_plan(table: Table, plan: CheckPlan) -> list[Finding]:
    return _PLAN_EVALUATORS[plan.kind](table, plan)


# --- spec-level detector entry points -------------------------------------------

def detect_nulls(table: Table) -> DetectionReport:
    """Flag exactly the null cells."""
    findings = []
    for row, record in enumerate(table.rows):
        for (column, _), value in zip(table.schema, record):
            if value is None:
                findings.append(Finding(CellRef(row, column), NULL_DETECTOR, None, "null cell"))
    return DetectionReport.collect(findings)


def eval_denial(table: Table, dep: Denial) -> DetectionReport:
    plan = CheckPlan(dep.id, "denial", (dep.lhs, dep.rhs))
    return DetectionReport.collect(_eval_denial_plan(table, plan))


def eval_matching(table: Table, dep: Matching) -> DetectionReport:
    plan = CheckPlan(dep.id, "matching", (dep.lhs, dep.rhs), threshold=dep.threshold)
    return DetectionReport.collect(_eval_matching_plan(table, plan))


def eval_device_link(table: Table, dep: DeviceLink, config: DatasetConfig) -> DetectionReport:
    if config.sensor_id_column is None or config.device_id_column is None:
        return EMPTY_REPORT
    plan = CheckPlan(
        dep.id,
        "device_link",
        (config.sensor_id_column, config.device_id_column),
        sensor_name=local_name(dep.sensor),
        device_name=local_name(dep.device),
    )
    return DetectionReport.collect(_eval_device_link_plan(table, plan))


def eval_temporal(table: Table, dep: Temporal, config: DatasetConfig) -> DetectionReport:
    pred_col = config.timestamp_bindings.get(dep.predecessor)
    succ_col = config.timestamp_bindings.get(dep.successor)
    if pred_col is None or succ_col is None:
        return EMPTY_REPORT
    plan = CheckPlan(dep.id, "temporal", (pred_col, succ_col))
    return DetectionReport.collect(_eval_temporal_plan(table, plan))


def eval_colocation(plans: Sequence[CheckPlan], table: Table, tolerance: float) -> DetectionReport:
    findings: list[Finding] = []
    for plan in plans:
        if plan.kind != "colocation":
            continue
        adjusted = plan if plan.tolerance == tolerance else CheckPlan(
            plan.dependency_id, plan.kind, plan.columns, tolerance=tolerance
        )
        findings.extend(_eval_colocation_plan(table, adjusted))
    return DetectionReport.collect(findings)


def eval_monitoring(
    table: Table,
    dep: Monitoring,
    config: DatasetConfig,
    health_ranges: Sequence[tuple[str, str, str]],
) -> DetectionReport:
    column = config.column_bindings.get(dep.device)
    ts_column = config.timestamp_bindings.get(dep.device)
    if column is None or ts_column is None:
        return EMPTY_REPORT
    windows = tuple((start, end) for device, start, end in health_ranges if device == dep.device)
    plan = CheckPlan(dep.id, "monitoring", (column, ts_column), unhealthy=windows)
    return DetectionReport.collect(_eval_monitoring_plan(table, plan))


def eval_capability(table: Table, dep: Capability, config: DatasetConfig) -> DetectionReport:
    column = config.column_bindings.get(dep.sensor)
    if column is None:
        return EMPTY_REPORT
    plan = CheckPlan(
        dep.id,
        "capability",
        (column,),
        capability_kind=dep.capability_kind,
        capability_value=dep.value,
    )
    return DetectionReport.collect(_eval_capability_plan(table, plan))


# --- aggregation -----------------------------------------------------------------

@dataclass(frozen=True)
class FeatureMatrix:
    """rows x dependencies grid; true means the dependency holds for the row."""

    dependency_ids: tuple[str, ...]
    rows: tuple[tuple[bool, ...], ...]

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), len(self.dependency_ids))


def build_feature_matrix(
    table: Table, depset: DependencySet, config: DatasetConfig
) -> FeatureMatrix:
    plans = compile_plans(depset, config, dict(table.schema))
    violating: dict[str, set[int]] = {plan.dependency_id: set() for plan in plans}
    for plan in plans:
        for finding in eval_plan(table, plan):
            violating[plan.dependency_id].add(finding.cell.row)
    ids = tuple(plan.dependency_id for plan in plans)
    rows = tuple(
        tuple(row not in violating[dep_id] for dep_id in ids)
        for row in range(len(table.rows))
    )
    return FeatureMatrix(ids, rows)


def detect_all(
    table: Table,
    depset: DependencySet,
    config: DatasetConfig,
    enabled: set[str] | None = None,
) -> DetectionReport:
    """Union of the null detector and every compiled check plan.

    enabled, when given, limits evaluation to the named detectors
    (plan kinds plus "null").
    """
    findings: list[Finding] = []
    if enabled is None or NULL_DETECTOR in enabled:
        findings.extend(detect_nulls(table).findings)
    for plan in compile_plans(depset, config, dict(table.schema)):
        if enabled is not None and plan.kind not in enabled:
            continue
        findings.extend(eval_plan(table, plan))
    return DetectionReport.collect(findings)


def baseline_zscore(table: Table, k: float) -> DetectionReport:
    """Comparison baseline: flag numeric cells at least k std devs from the mean.

    Columns with zero spread yield no flags.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    findings = []
    for column, ctype in table.schema:
        if ctype != "number":
            continue
        present = [
            (row, value)
            for row, value in enumerate(table.column_values(column))
            if value is not None
        ]
        numbers = [float(value) for _, value in present]
        if len(numbers) < 2:
            continue
        mean = statistics.fmean(numbers)
        spread = statistics.pstdev(numbers)
        if spread == 0:
            continue
        for (row, _), value in zip(present, numbers):
            if abs(value - mean) >= k * spread:
                findings.append(
                    Finding(
                        CellRef(row, column),
                        ZSCORE_DETECTOR,
                        None,
                        f"value {value:g} deviates {abs(value - mean) / spread:.2f} std devs",
                    )
                )
    return DetectionReport.collect(findings)
