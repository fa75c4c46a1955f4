"""Deterministic JSON and CSV report writers.

Floats are printed with 17 significant digits, keys are sorted, and files
are written to a temporary sibling and renamed so a reader never sees a
partial output.  NaN or infinite values are refused with the path where
they occur.
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ValidationError


class NonFiniteError(ValidationError):
    """A report value is NaN or infinite."""

    def __init__(self, path):
        super().__init__(f"non-finite value at {path}")
        self.path = path


def fmt(x: float) -> str:
    """17 significant digits, with a stable spelling of zero."""
    x = float(x)
    if x == 0:
        return "0"
    return format(x, ".17g")


def _normalize(obj, path):
    """Convert numpy and complex values to plain JSON structures, checking finiteness."""
    if isinstance(obj, dict):
        return {str(k): _normalize(v, f"{path}.{k}" if path else str(k)) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_normalize(v, f"{path}[{i}]") for i, v in enumerate(obj)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _normalize(obj.real, path + ".re"), "im": _normalize(obj.imag, path + ".im")}
    if isinstance(obj, (float, np.floating)):
        if not np.isfinite(obj):
            raise NonFiniteError(path or "<root>")
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise ValidationError(f"cannot serialize {type(obj).__name__} at {path}")


def _dump(obj, indent: int, level: int) -> str:
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}{_string(k)}: {_dump(obj[k], indent, level + 1)}' for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _dump(v, indent, level + 1) for v in obj) + "\n" + pad + "]"
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt(obj)
    return _string(obj)


def _string(s: str) -> str:
    import json

    return json.dumps(s, ensure_ascii=True)


def to_json(results) -> str:
    """Render results as deterministic JSON text."""
    return _dump(_normalize(results, ""), 2, 0) + "\n"


def write_atomic(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def to_csv(header, rows) -> str:
    """CSV text with a fixed header; every cell must be a finite number or a string."""
    header = list(header)
    lines = [",".join(header)]
    for i, row in enumerate(rows):
        row = list(row)
        if len(row) != len(header):
            raise ValidationError(f"row {i} has {len(row)} cells, header has {len(header)}")
        cells = []
        for name, v in zip(header, row):
            if isinstance(v, str):
                cells.append(v)
                continue
            if not np.isfinite(v):
                raise NonFiniteError(f"row {i}, column {name}")
            cells.append(fmt(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def emit_report(results, path, format: str = "json", header=None) -> Path:
    """Validate and atomically write a report.

    Parameters
    ----------
    results : dict (json) or iterable of rows (csv)
    path : str or Path
    format : {"json", "csv"}
    header : list of str
        Required for CSV.
    """
    if format == "json":
        text = to_json(results)
    elif format == "csv":
        if header is None:
            raise ValidationError("CSV output needs a header")
        text = to_csv(header, results)
    else:
        raise ValidationError(f"unknown report format {format!r}")
    return write_atomic(path, text)


def trajectory_header(d: int) -> list:
    """``t`` followed by real and imaginary parts of each entry, row-major."""
    cols = ["t"]
    for i in range(d):
        for j in range(d):
            cols += [f"re_s_{i}_{j}", f"im_s_{i}_{j}"]
    return cols


def trajectory_rows(traj):
    d = traj.states.shape[1]
    for t, s in zip(traj.times, traj.states):
        flat = s.reshape(d * d)
        row = [float(t)]
        for z in flat:
            row += [float(z.real), float(z.imag)]
        yield row


def write_trajectory(traj, path) -> Path:
    return emit_report(list(trajectory_rows(traj)), path, "csv", trajectory_header(traj.states.shape[1]))


def matrix_payload(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"re": m.real, "im": m.imag}
