from pathlib import Path

import pytest

from ofdclean import extraction, triples
from ofdclean.pipeline import RunConfig, dataset_config
from ofdclean.table import load_csv

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

IOT_COLUMN_TYPES = {
    "ts_main": "timestamp",
    "ts_in_1": "timestamp",
    "temp_in_1": "number",
    "temp_in_2": "number",
    "temp_out_1": "number",
}


@pytest.fixture(scope="session")
def iot_context_text() -> str:
    return (FIXTURES / "iot_context.ttl").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def hospital_context_text() -> str:
    return (FIXTURES / "hospital_context.ttl").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def iot_graph(iot_context_text):
    return triples.parse_context(iot_context_text)


@pytest.fixture(scope="session")
def hospital_graph(hospital_context_text):
    return triples.parse_context(hospital_context_text)


@pytest.fixture(scope="session")
def iot_depset(iot_graph):
    return extraction.extract_all(iot_graph)


@pytest.fixture(scope="session")
def iot_config(iot_graph):
    return dataset_config(RunConfig(column_types=IOT_COLUMN_TYPES), iot_graph)


@pytest.fixture(scope="session")
def iot_table(iot_config):
    text = (FIXTURES / "iot_readings.csv").read_text(encoding="utf-8")
    return load_csv(text, iot_config)
