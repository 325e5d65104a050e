"""Figure rendering for evaluation reports.

Written next to the delimited outputs by the evaluate command; one chart of
the headline metrics and one per-detector breakdown.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import EvalReport

_BAR_COLOR = "#4878a8"
_FP_COLOR = "#c44e52"


def save_metrics_figure(report: EvalReport, path: str | Path) -> None:
    """Bar chart of detection precision/recall/F1 and the repair scores."""
    labels = ["precision", "recall", "f1", "repair recall", "repair f1"]
    values = [
        report.precision,
        report.recall,
        report.f1,
        report.repair_recall,
        report.repair_f1,
    ]
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    bars = ax.bar(labels, values, color=_BAR_COLOR)
    ax.bar_label(bars, fmt="%.3f", fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_detector_figure(report: EvalReport, path: str | Path) -> None:
    """Per-detector true/false positive counts as grouped bars."""
    names = list(report.per_detector)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.4 * len(names) + 2), 3.2))
    if names:
        tp = [report.per_detector[n].true_positives for n in names]
        fp = [report.per_detector[n].false_positives for n in names]
        positions = range(len(names))
        width = 0.38
        ax.bar([p - width / 2 for p in positions], tp, width, label="true positives", color=_BAR_COLOR)
        ax.bar([p + width / 2 for p in positions], fp, width, label="false positives", color=_FP_COLOR)
        ax.set_xticks(list(positions))
        ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
        ax.legend(fontsize=8)
    else:
        ax.text(0.5, 0.5, "no findings", ha="center", va="center", transform=ax.transAxes)
    ax.set_ylabel("flagged cells")
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
