"""Deterministic CSV and JSON writers."""

import csv
import enum
import json
import math
from pathlib import Path

import numpy as np


def format_float(x):
    """17 significant digits, enough to round-trip any double."""
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return f"{x:.17g}"


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def write_csv(path, header, rows):
    """Write an RFC-4180 CSV with LF line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_columns(path, columns):
    """Write equal-length 1-D arrays keyed by column name."""
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    return write_csv(path, names, zip(*data))


def _default(o):
    if isinstance(o, enum.Enum):
        return o.value
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_default, ensure_ascii=False) + "\n"


def write_json(path, obj):
    """UTF-8 JSON with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj))
    return path
