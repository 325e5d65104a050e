#!/usr/bin/env python3
"""Regenerate fixtures/iot_readings.csv (1000 x 7, clean by construction).

Two twin sensors in Room1 always read the same value from a coarse grid, so
any cross-sensor divergence is detectable; the outside sensor spans a wider
range; zone_code groups four consecutive rows and determines zone_name.
Run from the repository root.  The script verifies the generated table
yields zero findings against fixtures/iot_context.ttl before writing.
"""

from __future__ import annotations

import random
import sys
from datetime import datetime, timedelta
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from ofdclean import detectors, extraction, triples
from ofdclean.pipeline import RunConfig, dataset_config
from ofdclean.table import Table, load_csv, write_csv

ROWS = 1000
INDOOR_LEVELS = ["12.0", "18.0", "24.0", "30.0"]
OUTDOOR_LEVELS = ["-5.0", "0.0", "5.0", "10.0", "15.0", "20.0", "25.0", "30.0", "35.0"]
COLUMN_TYPES = {
    "ts_main": "timestamp",
    "ts_in_1": "timestamp",
    "temp_in_1": "number",
    "temp_in_2": "number",
    "temp_out_1": "number",
}


def build_table() -> Table:
    rng = random.Random(20230101)
    start = datetime(2023, 1, 1, 0, 0, 0)
    schema = tuple(
        (name, COLUMN_TYPES.get(name, "text"))
        for name in (
            "ts_main",
            "ts_in_1",
            "temp_in_1",
            "temp_in_2",
            "temp_out_1",
            "zone_code",
            "zone_name",
        )
    )
    rows = []
    for i in range(ROWS):
        hour = start + timedelta(hours=i)
        indoor = rng.choice(INDOOR_LEVELS)
        rows.append(
            (
                (hour + timedelta(seconds=3)).strftime("%Y-%m-%dT%H:%M:%S"),
                (hour + timedelta(seconds=1)).strftime("%Y-%m-%dT%H:%M:%S"),
                indoor,
                indoor,
                rng.choice(OUTDOOR_LEVELS),
                f"Z{i // 4:03d}",
                f"area-{i // 4:03d}",
            )
        )
    return Table(schema, tuple(rows))


def main() -> None:
    root = Path(__file__).resolve().parent.parent
    table = build_table()
    text = write_csv(table)

    graph = triples.parse_context((root / "fixtures" / "iot_context.ttl").read_text())
    depset = extraction.extract_all(graph)
    config = dataset_config(RunConfig(column_types=COLUMN_TYPES), graph)
    reparsed = load_csv(text, config)
    report = detectors.detect_all(reparsed, depset, config)
    if report.findings:
        raise SystemExit(f"generated table is not clean: {report.findings[:5]}")

    out = root / "fixtures" / "iot_readings.csv"
    out.write_text(text, encoding="utf-8")
    print(f"wrote {out} ({reparsed.shape[0]} rows, {reparsed.shape[1]} columns, 0 findings)")


if __name__ == "__main__":
    main()
