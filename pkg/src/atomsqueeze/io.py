"""Deterministic CSV/JSON output.

CSV files are gnuplot-friendly: ``#`` metadata lines, a ``# columns:`` line,
then one block per curve introduced by ``# block: <name>`` and separated by
two blank lines (gnuplot ``index``). Floats are written with 12 significant
digits so identical inputs give identical bytes.
"""
from __future__ import annotations

import io as _io
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

FLOAT_FMT = "{:.12g}"

SPECTRUM_COLUMNS = ("freq_mhz", "s_linear", "s_mdb", "std_err")
AUTOCORR_COLUMNS = ("tau_us", "value", "std_err")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = FLOAT_FMT.format(x)
    return "0" if s == "-0" else s


def _meta_value(v):
    if isinstance(v, (float, np.floating, int, np.integer)) and not isinstance(v, bool):
        return fmt(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_meta_value(x) for x in v) + "]"
    return str(v)


def csv_text(blocks, columns, meta: dict | None = None) -> str:
    """Render ``blocks`` (sequence of (name, {column: array})) as CSV text."""
    out = _io.StringIO()
    for key in sorted(meta or {}):
        out.write(f"# {key}: {_meta_value(meta[key])}\n")
    out.write("# columns: " + ",".join(columns) + "\n")
    for i, (name, data) in enumerate(blocks):
        if i:
            out.write("\n\n")
        out.write(f"# block: {name}\n")
        cols = [np.atleast_1d(np.asarray(data[c])) for c in columns]
        n = cols[0].size
        if any(c.size != n for c in cols):
            raise ValueError(f"block {name!r}: column lengths differ")
        for row in zip(*cols):
            out.write(",".join(fmt(v) for v in row) + "\n")
    return out.getvalue()


def read_csv_blocks(text: str):
    """Parse :func:`csv_text` output back into (meta, columns, {block: 2-D array})."""
    meta, columns, blocks, current = {}, None, {}, None
    for line in text.splitlines():
        if line.startswith("# block:"):
            current = line.split(":", 1)[1].strip()
            blocks[current] = []
        elif line.startswith("# columns:"):
            columns = line.split(":", 1)[1].strip().split(",")
        elif line.startswith("#"):
            k, _, v = line[1:].partition(":")
            meta[k.strip()] = v.strip()
        elif line.strip():
            blocks[current].append([float(x) for x in line.split(",")])
    return meta, columns, {k: np.array(v) for k, v in blocks.items()}


def to_jsonable(obj):
    """Plain JSON tree with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(FLOAT_FMT.format(x))
    return obj


def json_text(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def emit(obj, fmt_name: str, path=None, columns=None, meta=None) -> str:
    """Serialise a report (json) or a list of blocks (csv); write to ``path`` when given."""
    if fmt_name == "json":
        text = json_text(obj if meta is None else dict(obj, meta=meta))
    elif fmt_name == "csv":
        if columns is None:
            raise ValueError("csv output needs a column list")
        text = csv_text(obj, columns, meta)
    else:
        raise ValueError(f"format must be csv or json, got {fmt_name!r}")
    if path is not None:
        write_text(path, text)
    return text


# --- schemas ----------------------------------------------------------------------------

SCHEMA_NAMES = ("oracle_compare", "metrics", "pipeline_report", "dressed", "error")


def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise KeyError(name)
    text = resources.files("atomsqueeze").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)
