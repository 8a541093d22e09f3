import json
import logging
import pytest
from dercoopt_hub.logging_config import (
    JsonFormatter,
    RunContextFilter,
    build_formatter,
    run_context,
    set_run_context,
)
from tests.test_cli import _run, _write_config


@pytest.fixture
def context():
    set_run_context("gap", "gap_sweep.json", 7)
    yield
    set_run_context()


def _record(**extra):
    record = logging.makeLogRecord({"name": "dercoopt_hub.test", "levelname": "INFO",
                                    "levelno": logging.INFO, "msg": "Running policy", **extra})
    assert RunContextFilter().filter(record)
    return record


def test_records_carry_the_run_context(context):
    record = _record()
    assert (record.command, record.scenario, record.seed) == ("gap", "gap_sweep.json", 7)
    line = build_formatter("string").format(record)
    assert "[gap gap_sweep.json seed=7] dercoopt_hub.test Running policy" in line


def test_explicit_fields_win_over_the_context(context):
    assert _record(seed=99).seed == 99


def test_json_lines_split_context_and_extras(context):
    payload = json.loads(JsonFormatter().format(_record(policy="mco", paths=3)))
    assert payload["run"] == {"command": "gap", "scenario": "gap_sweep.json", "seed": 7}
    assert payload["data"] == {"policy": "mco", "paths": 3}
    assert payload["message"] == "Running policy"


def test_unset_context_is_a_dash():
    set_run_context()
    assert _record().command == "-"
    assert run_context() == {"command": "-", "scenario": "-", "seed": "-"}


def test_cli_sets_the_context(tmp_path):
    config = _write_config(tmp_path)
    try:
        assert _run("thresholds", config, tmp_path / "out", "--seed", "11") == 0
        assert run_context() == {"command": "thresholds", "scenario": config, "seed": 11}
    finally:
        set_run_context()
