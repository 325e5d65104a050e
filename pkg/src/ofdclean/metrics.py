"""Cell-level scoring of detection and repair against injected ground truth.

A finding is a true positive iff its cell was injected; duplicate findings
on one cell count once.  A repair is correct iff the proposed value equals
the original (numbers within 1e-9; clearing a cell is only correct when the
original was null).  Repair recall divides correct repairs by the number of
correctly-detected cells, and repair F1 is the harmonic mean of detection
precision and repair recall.  Every zero denominator yields 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

from .detectors import DetectionReport
from .injection import GroundTruth
from .repair import RepairPlan
from .table import NUMBER_TOLERANCE


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


def harmonic_mean(a: float, b: float) -> float:
    return 2 * a * b / (a + b) if a + b else 0.0


@dataclass(frozen=True)
class DetectorStats:
    findings: int
    true_positives: int
    false_positives: int
    precision: float
    recall: float


@dataclass(frozen=True)
class EvalReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f1: float
    repair_recall: float
    repair_f1: float
    correct_repairs: int
    per_detector: Mapping[str, DetectorStats]


def detection_counts(report: DetectionReport, truth: GroundTruth) -> tuple[int, int, int]:
    detected = report.cells()
    injected = set(truth)
    tp = len(detected & injected)
    fp = len(detected - injected)
    fn = len(injected - detected)
    return tp, fp, fn


def detection_metrics(report: DetectionReport, truth: GroundTruth) -> EvalReport:
    """Precision/recall/F1 of the detected cell set, with per-detector breakdown."""
    tp, fp, fn = detection_counts(report, truth)
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    injected = set(truth)

    per_detector: dict[str, DetectorStats] = {}
    cells_by_detector: dict[str, set] = {}
    for finding in report.findings:
        cells_by_detector.setdefault(finding.detector, set()).add(finding.cell)
    for detector in sorted(cells_by_detector):
        cells = cells_by_detector[detector]
        d_tp = len(cells & injected)
        per_detector[detector] = DetectorStats(
            findings=len(cells),
            true_positives=d_tp,
            false_positives=len(cells) - d_tp,
            precision=_ratio(d_tp, len(cells)),
            recall=_ratio(d_tp, len(injected)),
        )

    return EvalReport(
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        precision=precision,
        recall=recall,
        f1=harmonic_mean(precision, recall),
        repair_recall=0.0,
        repair_f1=0.0,
        correct_repairs=0,
        per_detector=per_detector,
    )


def values_equal(proposed: str | None, original: str | None) -> bool:
    if proposed is None or original is None:
        return proposed is None and original is None
    try:
        return math.isclose(
            float(proposed), float(original), rel_tol=0.0, abs_tol=NUMBER_TOLERANCE
        )
    except ValueError:
        return proposed == original


def repair_metrics(
    plan: RepairPlan, report: DetectionReport, truth: GroundTruth
) -> EvalReport:
    """Detection metrics extended with repair recall and repair F1."""
    base = detection_metrics(report, truth)
    correctly_detected = report.cells() & set(truth)
    proposals = plan.by_cell()
    correct = sum(
        1
        for cell in correctly_detected
        if cell in proposals and values_equal(proposals[cell].new_value, truth[cell])
    )
    repair_recall = _ratio(correct, len(correctly_detected))
    return EvalReport(
        true_positives=base.true_positives,
        false_positives=base.false_positives,
        false_negatives=base.false_negatives,
        precision=base.precision,
        recall=base.recall,
        f1=base.f1,
        repair_recall=repair_recall,
        repair_f1=harmonic_mean(base.precision, repair_recall),
        correct_repairs=correct,
        per_detector=base.per_detector,
    )


def _fraction(value: float) -> str:
    return f"{value:.6f}"


def report_to_json(report: EvalReport) -> str:
    """JSON text with snake_case keys and fractions at six decimal places."""
    lines = [
        "{",
        f'  "true_positives": {report.true_positives},',
        f'  "false_positives": {report.false_positives},',
        f'  "false_negatives": {report.false_negatives},',
        f'  "precision": {_fraction(report.precision)},',
        f'  "recall": {_fraction(report.recall)},',
        f'  "f1": {_fraction(report.f1)},',
        f'  "repair_recall": {_fraction(report.repair_recall)},',
        f'  "repair_f1": {_fraction(report.repair_f1)},',
        f'  "correct_repairs": {report.correct_repairs},',
    ]
    detector_lines = []
    for name, stats in report.per_detector.items():
        detector_lines.append(
            f'    {json.dumps(name)}: {{'
            f'"findings": {stats.findings}, '
            f'"true_positives": {stats.true_positives}, '
            f'"false_positives": {stats.false_positives}, '
            f'"precision": {_fraction(stats.precision)}, '
            f'"recall": {_fraction(stats.recall)}}}'
        )
    lines.append('  "per_detector": {')
    lines.append(",\n".join(detector_lines))
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
