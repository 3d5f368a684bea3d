"""Measure files, CSV/JSON reports and PGM heatmaps.

All writers are deterministic: floats go through ``repr`` and JSON keys are
sorted, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .measures import PointMeasure


def write_measure(mu: PointMeasure, path) -> None:
    """Text format: ``#dim d total m`` then one ``coords... weight`` line per atom."""
    lines = [f"#dim {mu.dim} total {mu.total_mass!r}"]
    for loc, w in zip(mu.locations.tolist(), mu.weights.tolist()):
        lines.append(" ".join(repr(float(c)) for c in loc) + f" {float(w)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_measure(path) -> PointMeasure:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"measure file {path} not found")
    d = None
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if "dim" in parts:
                d = int(parts[parts.index("dim") + 1])
            continue
        try:
            rows.append([float(t) for t in line.split()])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    if d is None:
        raise ConfigError(f"{path}: missing '#dim' header")
    if not rows:
        return PointMeasure.empty(d)
    arr = np.array(rows)
    if arr.shape[1] != d + 1:
        raise ConfigError(f"{path}: expected {d + 1} columns, got {arr.shape[1]}")
    return PointMeasure(arr[:, :d], arr[:, d])


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    Path(path).write_text(csv_text(header, rows))


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def json_text(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(json_text(obj))


def write_pgm(path, values: np.ndarray, lo: float, hi: float) -> None:
    """Binary grayscale PGM; row 0 is the top. NaN cells are black."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise ConfigError("PGM needs a 2-D array")
    span = hi - lo if hi > lo else 1.0
    scaled = np.clip((np.nan_to_num(v, nan=lo) - lo) / span, 0.0, 1.0)
    pix = np.round(scaled * 255).astype(np.uint8)
    pix[np.isnan(v)] = 0
    h, w = pix.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + pix.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    # only reads the header layout written by write_pgm
    magic, size, _maxval, pixels = data.split(b"\n", 3)
    if magic != b"P5":
        raise ConfigError(f"{path} is not a binary PGM")
    w, h = (int(t) for t in size.split())
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w)
