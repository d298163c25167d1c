"""CSV and JSON writers.

CSV floats carry 17 significant digits; JSON uses the shortest round-trip repr,
so both reproduce the binary value exactly.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .grid import Field, Grid


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.17g}"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([r if isinstance(r, str) else fmt(r) for r in row])


_AXES = ("x", "y", "z")


def write_field_csv(path, field: Field, name: str = "v") -> None:
    """``cell_index, x[, y[, z]], value`` in axis-major cell order."""
    grid = field.grid
    coords = [c.reshape(-1) for c in grid.mesh()]
    header = ["cell_index", *_AXES[: grid.ndim], name]
    rows = ([i, *(c[i] for c in coords), val] for i, val in enumerate(field.flat))
    write_rows(path, header, rows)


def read_field_csv(path, grid: Grid) -> Field:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) != grid.ndim + 2 or header[0].strip() != "cell_index":
            raise ValueError(f"{path}: expected columns cell_index, coordinates, value")
        vals = np.empty(grid.size)
        seen = 0
        for row in reader:
            if not row:
                continue
            i = int(row[0])
            if not 0 <= i < grid.size:
                raise ValueError(f"{path}: cell index {i} outside grid")
            vals[i] = float(row[-1])
            seen += 1
    if seen != grid.size:
        raise ValueError(f"{path}: {seen} rows for {grid.size} cells")
    return Field(grid, vals)
