import json
import math

import jsonschema
import pytest

from randattn.harness.data import DataSpec
from randattn.harness.report import ExperimentReport, emit_report, load_schema, parse_csv, to_csv, to_json
from randattn.harness.selftest import run_selftest
from randattn.harness.studies import approx_error_study, scaling_benchmark, unbiasedness_study


@pytest.fixture(scope="module")
def reports():
    spec = DataSpec(24, 24, 4, seed=1)
    return [
        approx_error_study(spec, ("ra", "lara", "rfa", "exact"), (4, 8), trials=3, seed=2),
        unbiasedness_study(DataSpec(2, 3, 2), "ra", trials=600, seed=1),
        scaling_benchmark([32, 64], repeats=2),
        run_selftest(),
    ]


def test_csv_round_trip_is_exact(reports):
    for rep in reports:
        rows = parse_csv(to_csv(rep))
        assert len(rows) == len(rep.records)
        for parsed, rec in zip(rows, rep.records):
            for col in rep.columns:
                a, b = parsed[col], rec.get(col)
                if isinstance(b, float) and not math.isfinite(b):
                    assert a is None
                elif col == "config":
                    assert a == json.loads(json.dumps(b))
                else:
                    assert a == b and type(a) is type(b), col


def test_json_matches_schema(reports):
    schema = load_schema()
    jsonschema.Draft202012Validator.check_schema(schema)
    for rep in reports:
        jsonschema.validate(json.loads(to_json(rep)), schema)


def test_schema_rejects_negative_mse(reports):
    doc = json.loads(to_json(reports[0]))
    doc["records"][0]["mse"] = -1.0
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, load_schema())


def test_emit_formats(tmp_path, reports):
    assert emit_report(reports[0], [], tmp_path / "none") == []
    assert not (tmp_path / "none").exists()
    paths = emit_report(reports[0], ["csv", "json", "svg"], tmp_path)
    assert [p.suffix for p in paths] == [".csv", ".json", ".svg"]
    assert paths[2].read_text().startswith("<svg")
    assert [p.suffix for p in emit_report(reports[3], ["svg", "csv"], tmp_path)] == [".csv"]
    assert emit_report(reports[2], ["svg"], tmp_path)[0].name == "bench.svg"


def test_emit_unwritable(tmp_path, reports):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(reports[0], ["csv"], blocker / "sub")
    with pytest.raises(ValueError):
        emit_report(reports[0], ["xml"], tmp_path)


def test_metadata_has_no_clock_by_default(reports):
    doc = json.loads(to_json(reports[0]))
    assert doc["metadata"]["timestamp"] is None
    assert doc["metadata"]["version"]
    with pytest.raises(ValueError):
        ExperimentReport("nope", [])
