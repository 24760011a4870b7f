"""File formats: measure and set JSON, report JSON/CSV, binary node functions.

Measure JSON::

    {"kind": "tree" | "bitree", "depth_x": int, "depth_y": int, "masses": [...]}

with ``depth_y`` absent for trees and masses in boundary-index order.  Sets are
sorted arrays of boundary indices (either a bare list or ``{"indices": [...]}``).

Binary node functions start with a 16-byte header (magic ``DYNF``, uint32
format version, uint64 value count), followed by little-endian float64 values
in node-id order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import GeometryError, ParseError
from .geometry import BiTreeGeometry, BoundaryMeasure, BoundarySet, NodeFunction, build_bitree, build_tree

MAGIC = b"DYNF"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


# -- generic JSON -----------------------------------------------------------------


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def loads(text: str, source=None):
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(err.msg, err.lineno, err.colno, source) from None


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ParseError(f"cannot read file: {err.strerror}", source=str(path)) from None
    return loads(text, str(path))


def atomic_write(path, data) -> Path:
    """Write text or bytes to ``path`` through a temp file in the same directory and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    binary = isinstance(data, (bytes, bytearray))
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb" if binary else "w", newline=None if binary else "") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# -- measures and sets ----------------------------------------------------------------


def measure_to_dict(mu: BoundaryMeasure):
    g = mu.geometry
    if isinstance(g, BiTreeGeometry):
        d = {"kind": "bitree", "depth_x": g.x.depth, "depth_y": g.y.depth}
    else:
        d = {"kind": "tree", "depth_x": g.depth}
    d["masses"] = [float(m) for m in mu.masses]
    return d


def _int_field(d, key, source):
    v = d.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"field {key!r} must be an integer", source=source)
    return v


def measure_from_dict(d, source=None) -> BoundaryMeasure:
    if not isinstance(d, dict):
        raise ParseError("measure must be a JSON object", source=source)
    kind = d.get("kind")
    if kind == "tree":
        if "depth_y" in d:
            raise ParseError("tree measures take no 'depth_y'", source=source)
        geometry = build_tree(_int_field(d, "depth_x", source))
    elif kind == "bitree":
        geometry = build_bitree(_int_field(d, "depth_x", source), _int_field(d, "depth_y", source))
    else:
        raise ParseError(f"'kind' must be 'tree' or 'bitree', got {kind!r}", source=source)
    masses = d.get("masses")
    if not isinstance(masses, list):
        raise ParseError("'masses' must be an array", source=source)
    for i, m in enumerate(masses):
        if isinstance(m, bool) or not isinstance(m, (int, float)):
            raise ParseError(f"mass {i} is not a number", source=source)
    try:
        return BoundaryMeasure(geometry, np.asarray(masses, dtype=float))
    except GeometryError as err:
        raise ParseError(str(err), source=source) from None


def measure_to_json(mu: BoundaryMeasure) -> str:
    return dumps(measure_to_dict(mu))


def measure_from_json(text: str, source=None) -> BoundaryMeasure:
    return measure_from_dict(loads(text, source), source)


def read_measure(path) -> BoundaryMeasure:
    return measure_from_dict(read_json(path), str(path))


def write_measure(path, mu: BoundaryMeasure) -> Path:
    return atomic_write(path, measure_to_json(mu))


def set_to_list(E) -> list:
    return [int(i) for i in E.indices()]


def set_from_json_value(geometry, value, source=None) -> BoundarySet:
    if isinstance(value, dict):
        value = value.get("indices")
    if not isinstance(value, list) or any(isinstance(i, bool) or not isinstance(i, int) for i in value):
        raise ParseError("a set must be an array of boundary indices", source=source)
    try:
        return BoundarySet.from_indices(geometry, value)
    except GeometryError as err:
        raise ParseError(str(err), source=source) from None


def read_set(path, geometry) -> BoundarySet:
    return set_from_json_value(geometry, read_json(path), str(path))


# -- CSV --------------------------------------------------------------------------


def rows_to_csv(columns, rows, header_lines=()) -> str:
    """CSV text with ``# ``-prefixed header comment lines, then a header row."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    return v


# -- binary node functions ----------------------------------------------------------


def node_function_to_bytes(f: NodeFunction) -> bytes:
    vals = np.ascontiguousarray(f.values, dtype="<f8")
    return _HEADER.pack(MAGIC, BINARY_VERSION, vals.size) + vals.tobytes()


def node_function_from_bytes(geometry, data: bytes, source=None) -> NodeFunction:
    if len(data) < _HEADER.size:
        raise ParseError("truncated header", source=source)
    magic, version, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}", source=source)
    if version != BINARY_VERSION:
        raise ParseError(f"unsupported format version {version}", source=source)
    if len(data) != _HEADER.size + 8 * count:
        raise ParseError(f"expected {count} values, file holds {(len(data) - _HEADER.size) / 8}",
                         source=source)
    if count != geometry.n_nodes:
        raise ParseError(f"node count {count} does not match geometry ({geometry.n_nodes})",
                         source=source)
    vals = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(float)
    return NodeFunction(geometry, vals)


def write_node_function(path, f: NodeFunction) -> Path:
    return atomic_write(path, node_function_to_bytes(f))


def read_node_function(path, geometry) -> NodeFunction:
    return node_function_from_bytes(geometry, Path(path).read_bytes(), str(path))
