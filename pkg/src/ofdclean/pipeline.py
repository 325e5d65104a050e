"""End-to-end orchestration: extract, clean, inject, evaluate, watch.

The cleaning path is seed-free and writes byte-identical outputs for
identical inputs; all randomness lives in the inject step.  Watch mode
polls the context file by content hash, refreshes the dependency set from
the diff, and re-runs the cleaning pass, which makes a refresh physically
the same as a cold restart on the mutated file.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import signal
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from . import detectors, extraction, metrics, triples
from .detectors import DetectionReport, Finding
from .extraction import DependencySet
from .figures import save_detector_figure, save_metrics_figure
from .injection import GroundTruth, InjectionSpec, inject
from .repair import RepairAction, RepairPlan, apply_repairs, propose_repairs
from .table import CellRef, ConfigError, DatasetConfig, Table, load_csv, write_csv

logger = logging.getLogger(__name__)

CLEANED_CSV = "cleaned.csv"
FINDINGS_CSV = "findings.csv"
REPAIRS_CSV = "repairs.csv"
DIRTY_CSV = "dirty.csv"
TRUTH_CSV = "ground_truth.csv"
INJECTION_META = "injection_meta.json"
EVAL_JSON = "eval_report.json"
EVAL_METRICS_PNG = "eval_metrics.png"
EVAL_DETECTORS_PNG = "eval_detectors.png"
DEPENDENCIES_TXT = "dependencies.txt"

_SIMPLE_KEYS = {
    "context",
    "data",
    "out",
    "seed",
    "tolerance",
    "repair-mode",
    "poll-seconds",
    "key-column",
    "sensor-id-column",
    "device-id-column",
    "inject.rate",
    "inject.categories",
    "inject.columns",
    "inject.outlier-mode",
}
_PREFIX_KEYS = ("type.", "unhealthy.", "detector.", "inject.columns.")


def parse_config_file(text: str) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment; unknown keys are rejected."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        known = key in _SIMPLE_KEYS or any(
            key.startswith(prefix) and len(key) > len(prefix) for prefix in _PREFIX_KEYS
        )
        if not known:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        values[key] = value
    return values


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline command needs, after merging file and flags."""

    context_path: Path | None = None
    data_path: Path | None = None
    out_dir: Path = Path(".")
    seed: int = 0
    tolerance: float | None = None
    repair_mode: str = "repair"
    poll_seconds: float = 1.0
    column_types: Mapping[str, str] = field(default_factory=dict)
    key_column: str | None = None
    sensor_id_column: str | None = None
    device_id_column: str | None = None
    health_ranges: tuple[tuple[str, str, str], ...] = ()
    enabled_detectors: frozenset[str] | None = None
    inject_rate: float = 0.05
    inject_categories: tuple[str, ...] = ("typo", "value_error", "null")
    inject_columns: tuple[str, ...] = ()
    inject_columns_by_category: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    inject_outlier_mode: str = "doubled_range"


def _parse_bool(value: str, key: str) -> bool:
    if value in ("on", "true", "1", "yes"):
        return True
    if value in ("off", "false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected on/off, got {value!r}")


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(item.strip() for item in value.split(",") if item.strip())


def build_run_config(file_values: Mapping[str, str], overrides: Mapping[str, object]) -> RunConfig:
    """Merge config-file values with flag overrides (flags win)."""
    merged: dict[str, object] = dict(file_values)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value

    def take(key: str) -> object | None:
        return merged.pop(key, None)

    try:
        context = take("context")
        data = take("data")
        out = take("out")
        seed = take("seed")
        tolerance = take("tolerance")
        repair_mode = take("repair-mode") or "repair"
        poll = take("poll-seconds")
        if repair_mode not in ("repair", "delete"):
            raise ConfigError(f"repair-mode must be repair or delete, got {repair_mode!r}")
        poll_seconds = float(poll) if poll is not None else 1.0
        if poll_seconds <= 0:
            raise ConfigError("poll-seconds must be positive")
        column_types = {
            key[len("type."):]: str(value)
            for key, value in merged.items()
            if key.startswith("type.")
        }
        health = []
        for key in sorted(k for k in merged if k.startswith("unhealthy.")):
            parts = _split_list(str(merged[key]))
            if len(parts) != 3:
                raise ConfigError(f"{key}: expected device,start,end")
            health.append((parts[0], parts[1], parts[2]))
        toggles = {
            key[len("detector."):]: _parse_bool(str(value), key)
            for key, value in merged.items()
            if key.startswith("detector.")
        }
        enabled: frozenset[str] | None = None
        if toggles:
            unknown = set(toggles) - detectors.DETECTOR_NAMES
            if unknown:
                raise ConfigError(f"unknown detector toggles: {sorted(unknown)}")
            enabled = frozenset(
                name for name in detectors.DETECTOR_NAMES if toggles.get(name, True)
            )
        per_category = {
            key[len("inject.columns."):]: _split_list(str(value))
            for key, value in merged.items()
            if key.startswith("inject.columns.")
        }
        rate_raw = take("inject.rate")
        categories_raw = take("inject.categories")
        columns_raw = take("inject.columns")
        outlier_mode = take("inject.outlier-mode")
        return RunConfig(
            context_path=Path(str(context)) if context else None,
            data_path=Path(str(data)) if data else None,
            out_dir=Path(str(out)) if out else Path("."),
            seed=int(seed) if seed is not None else 0,
            tolerance=float(tolerance) if tolerance is not None else None,
            repair_mode=str(repair_mode),
            poll_seconds=poll_seconds,
            column_types=column_types,
            key_column=str(merged["key-column"]) if "key-column" in merged else None,
            sensor_id_column=(
                str(merged["sensor-id-column"]) if "sensor-id-column" in merged else None
            ),
            device_id_column=(
                str(merged["device-id-column"]) if "device-id-column" in merged else None
            ),
            health_ranges=tuple(health),
            enabled_detectors=enabled,
            inject_rate=float(rate_raw) if rate_raw is not None else 0.05,
            inject_categories=(
                _split_list(str(categories_raw))
                if categories_raw is not None
                else ("typo", "value_error", "null")
            ),
            inject_columns=_split_list(str(columns_raw)) if columns_raw is not None else (),
            inject_columns_by_category=per_category,
            inject_outlier_mode=str(outlier_mode) if outlier_mode is not None else "doubled_range",
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def dataset_config(cfg: RunConfig, graph: triples.TripleGraph) -> DatasetConfig:
    """Dataset config from the run config plus binding hints in the graph."""
    column_bindings, timestamp_bindings = extraction.bindings_from_graph(graph)
    return DatasetConfig(
        column_types=dict(cfg.column_types),
        column_bindings=column_bindings,
        timestamp_bindings=timestamp_bindings,
        colocation_tolerance=cfg.tolerance if cfg.tolerance is not None else 5.0,
        key_column=cfg.key_column,
        sensor_id_column=cfg.sensor_id_column,
        device_id_column=cfg.device_id_column,
        health_ranges=cfg.health_ranges,
    )


def _require(path: Path | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"missing {what} path")
    if not path.exists():
        raise ConfigError(f"{what} file {path} does not exist")
    return path


# --- delimited output formats --------------------------------------------------

def findings_to_csv(report: DetectionReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["row", "column", "detector", "dependency_id", "reason"])
    for f in report.findings:
        writer.writerow([f.cell.row, f.cell.column, f.detector, f.dependency_id or "", f.reason])
    return out.getvalue()


def findings_from_csv(text: str) -> DetectionReport:
    reader = csv.DictReader(io.StringIO(text))
    findings = [
        Finding(
            CellRef(int(row["row"]), row["column"]),
            row["detector"],
            row["dependency_id"] or None,
            row["reason"],
        )
        for row in reader
    ]
    return DetectionReport.collect(findings)


def repairs_to_csv(plan: RepairPlan) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["row", "column", "old", "new", "strategy"])
    for action in plan.actions:
        writer.writerow(
            [
                action.cell.row,
                action.cell.column,
                action.old_value or "",
                action.new_value or "",
                action.strategy,
            ]
        )
    return out.getvalue()


def repairs_from_csv(text: str) -> RepairPlan:
    reader = csv.DictReader(io.StringIO(text))
    actions = tuple(
        RepairAction(
            CellRef(int(row["row"]), row["column"]),
            row["old"] or None,
            row["new"] or None,
            row["strategy"],
        )
        for row in reader
    )
    return RepairPlan(actions)


def truth_to_csv(truth: GroundTruth) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["row", "column", "original_value"])
    for ref in sorted(truth, key=lambda r: (r.row, r.column)):
        writer.writerow([ref.row, ref.column, truth[ref] or ""])
    return out.getvalue()


def truth_from_csv(text: str) -> GroundTruth:
    reader = csv.DictReader(io.StringIO(text))
    return {
        CellRef(int(row["row"]), row["column"]): row["original_value"] or None
        for row in reader
    }


# --- commands -------------------------------------------------------------------

def run_extract(cfg: RunConfig) -> tuple[DependencySet, str]:
    """Extract dependencies and render the listing written to stdout and file."""
    context = _require(cfg.context_path, "context model")
    graph = triples.parse_context(context.read_text(encoding="utf-8"))
    depset = extraction.extract_all(graph)
    lines = [f"{dep.id}\t{dep.kind}\t{dep.describe()}" for dep in depset.dependencies]
    lines.append(f"{len(depset)} dependencies")
    listing = "\n".join(lines) + "\n"
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / DEPENDENCIES_TXT).write_text(listing, encoding="utf-8")
    return depset, listing


@dataclass(frozen=True)
class CleanResult:
    report: DetectionReport
    plan: RepairPlan
    cleaned: Table


def clean_with(graph: triples.TripleGraph, depset: DependencySet, cfg: RunConfig) -> CleanResult:
    """Detect and repair cfg.data against an already-extracted dependency set."""
    data = _require(cfg.data_path, "dataset")
    ds_config = dataset_config(cfg, graph)
    table = load_csv(data.read_text(encoding="utf-8"), ds_config)
    enabled = set(cfg.enabled_detectors) if cfg.enabled_detectors is not None else None
    report = detectors.detect_all(table, depset, ds_config, enabled)
    plan = propose_repairs(table, report, depset, ds_config, mode=cfg.repair_mode)
    cleaned = apply_repairs(table, plan)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / CLEANED_CSV).write_text(write_csv(cleaned), encoding="utf-8")
    (cfg.out_dir / FINDINGS_CSV).write_text(findings_to_csv(report), encoding="utf-8")
    (cfg.out_dir / REPAIRS_CSV).write_text(repairs_to_csv(plan), encoding="utf-8")
    return CleanResult(report, plan, cleaned)


def run_clean(cfg: RunConfig) -> CleanResult:
    context = _require(cfg.context_path, "context model")
    graph = triples.parse_context(context.read_text(encoding="utf-8"))
    depset = extraction.extract_all(graph)
    return clean_with(graph, depset, cfg)


def run_inject(cfg: RunConfig) -> tuple[Table, GroundTruth]:
    data = _require(cfg.data_path, "dataset")
    ds_config = DatasetConfig(column_types=dict(cfg.column_types))
    table = load_csv(data.read_text(encoding="utf-8"), ds_config)
    if cfg.inject_columns_by_category:
        targets = {
            category: cfg.inject_columns_by_category.get(category, cfg.inject_columns)
            for category in cfg.inject_categories
        }
        spec = InjectionSpec(
            cfg.inject_rate,
            tuple(cfg.inject_categories),
            targets,
            cfg.inject_outlier_mode,
            cfg.seed,
        )
    else:
        columns = cfg.inject_columns or tuple(table.column_names)
        spec = InjectionSpec.uniform(
            cfg.inject_rate,
            tuple(cfg.inject_categories),
            columns,
            table,
            cfg.inject_outlier_mode,
            cfg.seed,
        )
    dirty, truth = inject(table, spec)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / DIRTY_CSV).write_text(write_csv(dirty), encoding="utf-8")
    (cfg.out_dir / TRUTH_CSV).write_text(truth_to_csv(truth), encoding="utf-8")
    meta = {
        "seed": spec.seed,
        "rate": spec.rate,
        "categories": list(spec.categories),
        "outlier_mode": spec.outlier_mode,
        "injected_cells": len(truth),
    }
    (cfg.out_dir / INJECTION_META).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return dirty, truth


def run_evaluate(cfg: RunConfig) -> metrics.EvalReport:
    """Score findings and repairs in out_dir against the ground truth there."""
    out = cfg.out_dir
    report = findings_from_csv(_require(out / FINDINGS_CSV, "findings").read_text(encoding="utf-8"))
    plan = repairs_from_csv(_require(out / REPAIRS_CSV, "repair plan").read_text(encoding="utf-8"))
    truth = truth_from_csv(_require(out / TRUTH_CSV, "ground truth").read_text(encoding="utf-8"))
    evaluation = metrics.repair_metrics(plan, report, truth)
    (out / EVAL_JSON).write_text(metrics.report_to_json(evaluation), encoding="utf-8")
    save_metrics_figure(evaluation, out / EVAL_METRICS_PNG)
    save_detector_figure(evaluation, out / EVAL_DETECTORS_PNG)
    return evaluation


def watch(
    cfg: RunConfig,
    max_cycles: int | None = None,
    sleep: Callable[[float], None] | None = None,
) -> int:
    """Poll the context file, refreshing dependencies and re-cleaning on change.

    Returns the number of refreshes performed.  A context file that stops
    parsing mid-watch is logged and skipped; the previous dependency set
    stays in effect.  On the main thread, the interrupt signal stops the
    loop cleanly after the current cycle.
    """
    stop = threading.Event()
    if sleep is None:

        def sleep(seconds: float) -> None:
            deadline = time.monotonic() + seconds
            while not stop.is_set():
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return
                time.sleep(min(0.2, remaining))

    previous_handler = None
    if threading.current_thread() is threading.main_thread():
        previous_handler = signal.signal(signal.SIGINT, lambda *_: stop.set())

    try:
        context = _require(cfg.context_path, "context model")
        content = context.read_bytes()
        seen = hashlib.sha256(content).hexdigest()
        graph = triples.parse_context(content.decode("utf-8"))
        depset = extraction.extract_all(graph)
        clean_with(graph, depset, cfg)
        logger.info("watching %s every %.3gs", context, cfg.poll_seconds)

        refreshes = 0
        cycles = 0
        while (max_cycles is None or cycles < max_cycles) and not stop.is_set():
            sleep(cfg.poll_seconds)
            if stop.is_set():
                break
            cycles += 1
            content = context.read_bytes()
            digest = hashlib.sha256(content).hexdigest()
            if digest == seen:
                continue
            seen = digest
            try:
                new_graph = triples.parse_context(content.decode("utf-8"))
            except (UnicodeDecodeError, triples.ParseError) as exc:
                logger.warning(
                    "context model unreadable, keeping previous dependencies: %s", exc
                )
                continue
            events = triples.diff(graph, new_graph)
            depset = extraction.refresh(depset, new_graph, events)
            graph = new_graph
            clean_with(graph, depset, cfg)
            refreshes += 1
            logger.info("refreshed after %d change events", len(events))
        if stop.is_set():
            logger.info("watch stopped by interrupt")
        return refreshes
    finally:
        if previous_handler is not None:
            signal.signal(signal.SIGINT, previous_handler)
