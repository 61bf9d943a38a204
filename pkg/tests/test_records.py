import json

import pytest

from core.records import json_safe, make_header, read_records, write_records
from core.settings import ARTIFACT_VERSION


@pytest.fixture
def header():
    return make_header({"n": 4096, "deltas": [1.0]}, 7, "demo")


def test_header_fields(header):
    assert header == {"artifact_version": ARTIFACT_VERSION, "kind": "demo", "seed": 7,
                      "config": {"n": 4096, "deltas": [1.0]}}


def test_csv_layout(tmp_path, header):
    rows = [{"a": 1, "b": [1, 2]}, {"a": 2, "c": None}]
    path = write_records(tmp_path / "out.csv", rows, header)
    lines = path.read_text().splitlines()
    assert json.loads(lines[0][2:]) == header
    assert lines[1].startswith("# written_at=")
    assert lines[2] == "a,b,c"
    assert lines[3] == '1,"[1, 2]",'
    assert lines[4] == "2,,"
    read_header, read_rows = read_records(path)
    assert read_header == header
    assert read_rows[1] == {"a": "2", "b": "", "c": ""}


def test_jsonl_is_strict_json(tmp_path, header):
    rows = [{"x": float("inf"), "y": [float("nan"), 1.5]}]
    path = write_records(tmp_path / "out.jsonl", rows, header, "jsonl")
    lines = path.read_text().splitlines()
    assert json.loads(lines[0]) == {"header": header}
    assert json.loads(lines[1]) == {"x": None, "y": [None, 1.5]}
    assert read_records(path) == (header, [{"x": None, "y": [None, 1.5]}])


def test_jsonl_is_reproducible(tmp_path, header):
    rows = [{"k": k, "v": k / 3} for k in range(5)]
    first = write_records(tmp_path / "a.jsonl", rows, header, "jsonl").read_bytes()
    second = write_records(tmp_path / "b.jsonl", rows, header, "jsonl").read_bytes()
    assert first == second


def test_unknown_format(tmp_path, header):
    with pytest.raises(ValueError):
        write_records(tmp_path / "out.xml", [], header, "xml")


def test_json_safe_leaves_finite_values():
    assert json_safe({"a": (1, 2.5), "b": "x", "c": float("-inf")}) == {"a": [1, 2.5], "b": "x", "c": None}
