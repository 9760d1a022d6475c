"""Series, snapshot and manifest writers.

Every number is formatted with repr, which round-trips float64 exactly,
so identical runs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def _fmt(value: float) -> str:
    return repr(float(value))


def write_series(series, path) -> None:
    """Comma-separated channels with a header row (time first)."""
    path = Path(path)
    names = series.names()
    lines = [",".join(["time"] + names)]
    for i, t in enumerate(series.times):
        lines.append(",".join([_fmt(t)] + [_fmt(series.channels[n][i]) for n in names]))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
    except OSError as exc:
        raise OSError(f"cannot write series to {path}: {exc}") from exc


def series_text(series) -> str:
    names = series.names()
    lines = [",".join(["time"] + names)]
    for i, t in enumerate(series.times):
        lines.append(",".join([_fmt(t)] + [_fmt(series.channels[n][i]) for n in names]))
    return "\n".join(lines) + "\n"


_SNAPSHOT_FIELDS = ("rho", "T", "vx", "vy")


def write_snapshot(macro: dict, path, title: str = "thermoflow snapshot") -> None:
    """Legacy ASCII structured-points file with point scalars named
    rho, T, vx, vy (x varies fastest, matching the standard reader)."""
    path = Path(path)
    some = macro["rho"]
    nx, ny = some.shape
    out = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} 1",
        "ORIGIN 0 0 0",
        "SPACING 1 1 1",
        f"POINT_DATA {nx * ny}",
    ]
    for name in _SNAPSHOT_FIELDS:
        field = macro[name]
        out.append(f"SCALARS {name} double 1")
        out.append("LOOKUP_TABLE default")
        out.extend(_fmt(v) for v in field.T.ravel())
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(out) + "\n", encoding="ascii")
    except OSError as exc:
        raise OSError(f"cannot write snapshot to {path}: {exc}") from exc


def read_snapshot(path) -> dict:
    """Parse a snapshot back into field arrays (round-trip exact)."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    dims = None
    fields: dict[str, np.ndarray] = {}
    i = 0
    while i < len(lines):
        line = lines[i]
        if line.startswith("DIMENSIONS"):
            nx, ny, _ = (int(v) for v in line.split()[1:])
            dims = (nx, ny)
        if line.startswith("SCALARS"):
            name = line.split()[1]
            n = dims[0] * dims[1]
            values = np.array([float(v) for v in lines[i + 2: i + 2 + n]])
            fields[name] = values.reshape(dims[1], dims[0]).T
            i += 1 + n
        i += 1
    return fields


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value)}")
