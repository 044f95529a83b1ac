import json
import math

import pytest

from src.ordmeans.storage import dumps_report, save_json, write_values


def test_save_json_round_trips_floats_exactly(tmp_path):
    """Values read back from a saved report compare equal to the ones written."""
    path = tmp_path / "report.json"
    data = {"value": 0.1 + 0.2, "levels": [0.0, 1.0], "p_value": None}
    save_json(path, data)
    assert json.loads(path.read_text(encoding="utf-8")) == data


def test_save_json_creates_parent_dirs(tmp_path):
    path = tmp_path / "a" / "b" / "r.json"
    save_json(path, {"x": 1})
    assert path.read_text(encoding="utf-8").endswith("}\n")


def test_dumps_report_rejects_nan():
    with pytest.raises(ValueError):
        dumps_report({"value": math.nan})


def test_dumps_report_is_deterministic():
    data = {"b": 1.0 / 3.0, "a": [1, 2]}
    assert dumps_report(data) == dumps_report(data)
    assert json.loads(dumps_report(data))["b"] == 1.0 / 3.0


def test_write_values_marks_failures(tmp_path):
    """Failed replicates are written as ``nan`` lines."""
    path = tmp_path / "values.txt"
    assert write_values(path, [0.5, None, 2.0]) == 3
    assert path.read_text(encoding="utf-8") == "0.5\nnan\n2.0\n"
