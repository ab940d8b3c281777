"""CSV / JSON writers with a provenance header."""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math

import numpy as np

TIMESTAMP_KEY = "timestamp"


def _version() -> str:
    from . import __version__
    return __version__


def provenance(command: str, params: dict, timestamp: bool = True) -> dict:
    meta = {"yledge_version": _version(), "command": command, "params": params}
    if timestamp:
        meta[TIMESTAMP_KEY] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return meta


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(x.real), _jsonable(x.imag)]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def format_csv(header, rows, meta: dict) -> str:
    """'#'-prefixed provenance lines (one key each, JSON values), then the table."""
    buf = io.StringIO()
    for key, val in meta.items():
        buf.write(f"# {key}: {json.dumps(_jsonable(val), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def format_json(payload, meta: dict) -> str:
    return json.dumps(_jsonable({"provenance": meta, **payload}), indent=2, sort_keys=True) + "\n"


def read_csv_table(path) -> tuple[list[str], np.ndarray]:
    """Column names and a float array, skipping '#' lines."""
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: no table found")
    reader = csv.reader(lines)
    header = next(reader)
    data = np.array([[float(x) for x in row] for row in reader], dtype=float)
    return header, data.reshape(-1, len(header))


def strip_timestamp(text: str) -> str:
    return "\n".join(ln for ln in text.splitlines() if not ln.startswith(f"# {TIMESTAMP_KEY}:")
                     and f'"{TIMESTAMP_KEY}"' not in ln)
