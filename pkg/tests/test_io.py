import json
import math

import numpy as np
import pytest

from atomsqueeze import io


def blocks():
    f = np.linspace(0, 1, 5)
    return [("X", {"freq_mhz": f, "s_linear": 1 - f / 3, "s_mdb": -f, "std_err": f * 0}),
            ("P", {"freq_mhz": f, "s_linear": 1 + f / 3, "s_mdb": f, "std_err": f * 0})]


def test_fmt():
    assert io.fmt(1 / 3) == "0.333333333333"
    assert io.fmt(-0.0) == "0"
    assert io.fmt(float("nan")) == "nan" and io.fmt(-math.inf) == "-inf"
    assert io.fmt(np.int64(7)) == "7" and io.fmt(True) == "1"


def test_csv_layout_and_roundtrip():
    text = io.csv_text(blocks(), io.SPECTRUM_COLUMNS, {"preset": "configA", "g_mhz": 12.0})
    lines = text.splitlines()
    assert lines[0] == "# g_mhz: 12" and lines[1] == "# preset: configA"
    assert lines[2] == "# columns: freq_mhz,s_linear,s_mdb,std_err"
    assert "\n\n\n# block: P\n" in text
    meta, cols, data = io.read_csv_blocks(text)
    assert cols == list(io.SPECTRUM_COLUMNS)
    assert meta["preset"] == "configA"
    assert np.allclose(data["P"][:, 1], 1 + np.linspace(0, 1, 5) / 3)


def test_csv_deterministic():
    a = io.csv_text(blocks(), io.SPECTRUM_COLUMNS, {"b": 1, "a": [1.5, 2]})
    b = io.csv_text(blocks(), io.SPECTRUM_COLUMNS, {"a": [1.5, 2], "b": 1})
    assert a.encode() == b.encode()


def test_csv_column_mismatch():
    bad = [("X", {"tau_us": np.zeros(3), "value": np.zeros(2), "std_err": np.zeros(3)})]
    with pytest.raises(ValueError):
        io.csv_text(bad, io.AUTOCORR_COLUMNS)


def test_json_text():
    obj = {"b": 1 / 3, "a": complex(1, -2), "c": [np.float64(np.inf), np.arange(2)]}
    text = io.json_text(obj)
    assert text == io.json_text(dict(reversed(list(obj.items()))))
    back = json.loads(text)
    assert back == {"a": {"re": 1.0, "im": -2.0}, "b": 0.333333333333, "c": [None, [0, 1]]}


def test_emit(tmp_path):
    p = tmp_path / "sub" / "out.csv"
    text = io.emit(blocks(), "csv", p, columns=io.SPECTRUM_COLUMNS)
    assert p.read_text() == text
    with pytest.raises(ValueError):
        io.emit(blocks(), "csv")
    with pytest.raises(ValueError):
        io.emit({}, "xml")
    assert json.loads(io.emit({"x": 1}, "json", meta={"seed": 3})) == {"x": 1, "meta": {"seed": 3}}


def test_schemas_load():
    for name in io.SCHEMA_NAMES:
        s = io.load_schema(name)
        assert s["$schema"].endswith("2020-12/schema")
    with pytest.raises(KeyError):
        io.load_schema("nope")
