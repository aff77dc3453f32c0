"""Trace CSV persistence. One frozen schema for every experiment kind; absent metrics are empty fields."""
from __future__ import annotations

import csv
from pathlib import Path

from .core import InputError
from .trace import COLUMNS, ConvergenceTrace, Row

_FIELDS = ("update", "k", "agent", "step_dist", "dist_star", "bound_t1", "ret")


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return "%.17g" % float(value)


def write_trace(trace: ConvergenceTrace, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in trace.rows:
            w.writerow([fmt(getattr(r, f)) for f in _FIELDS])
    return path


def write_params(trace: ConvergenceTrace, path) -> Path | None:
    """Sidecar with the joint parameters at every level: update,k,theta_0..theta_{d-1}."""
    if not trace.params:
        return None
    path = Path(path)
    dim = trace.params[0][2].size
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["update", "k"] + [f"theta_{j}" for j in range(dim)])
        for update, k, theta in trace.params:
            w.writerow([update, k] + [fmt(float(x)) for x in theta])
    return path


class SchemaError(InputError):
    pass


def _parse(text: str, column: str, cast):
    if text == "":
        return None
    try:
        return cast(text)
    except ValueError as exc:
        raise SchemaError(f"column '{column}': cannot parse {text!r}") from exc


def read_trace(path) -> ConvergenceTrace:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file, expected header {','.join(COLUMNS)}")
    header = rows[0]
    for j, name in enumerate(COLUMNS):
        if j >= len(header) or header[j] != name:
            got = header[j] if j < len(header) else "<missing>"
            raise SchemaError(f"{path}: bad column {j + 1}: expected '{name}', got '{got}'")
    if len(header) > len(COLUMNS):
        raise SchemaError(f"{path}: bad column {len(COLUMNS) + 1}: unexpected '{header[len(COLUMNS)]}'")
    if len(rows) == 1:
        raise SchemaError(f"{path}: no data rows to plot")
    trace = ConvergenceTrace()
    casts = (int, int, int, float, float, float, float)
    for line_no, raw in enumerate(rows[1:], start=2):
        if len(raw) != len(COLUMNS):
            raise SchemaError(f"{path}:{line_no}: expected {len(COLUMNS)} fields, got {len(raw)}")
        vals = [_parse(t, c, cast) for t, c, cast in zip(raw, COLUMNS, casts)]
        if vals[0] is None or vals[1] is None:
            bad = COLUMNS[0] if vals[0] is None else COLUMNS[1]
            raise SchemaError(f"{path}:{line_no}: column '{bad}' must not be empty")
        trace.rows.append(Row(vals[0], vals[1], vals[2], vals[3] or 0.0, vals[4], vals[5], vals[6]))
    return trace


def read_params(path):
    path = Path(path)
    if not path.exists():
        return None
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    return [(int(r[0]), int(r[1]), [float(x) for x in r[2:]]) for r in rows[1:]]
