"""Field snapshots: a JSON header plus a raw little-endian float64 payload."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .spectral import ComplexField, Grid

SNAPSHOT_KEYS = ("dim", "N", "L", "time", "model", "p", "convention")


def save_snapshot(stem: str | Path, u: ComplexField, time: float = 0.0,
                  model: str = "", p: float | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.json`` and ``<stem>.f64`` (interleaved re/im, row-major)."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "dim": u.grid.dim,
        "N": u.grid.n_points,
        "L": u.grid.length,
        "time": float(time),
        "model": model,
        "p": None if p is None else float(p),
        "convention": "unitary",
    }
    json_path = stem.with_suffix(".json")
    data_path = stem.with_suffix(".f64")
    json_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    payload = np.ascontiguousarray(u.values).view(np.float64).astype("<f8", copy=False)
    data_path.write_bytes(payload.tobytes(order="C"))
    return json_path, data_path


def load_snapshot(stem: str | Path) -> tuple[ComplexField, dict]:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    missing = [k for k in SNAPSHOT_KEYS if k not in header]
    if missing:
        raise ValueError(f"snapshot header {stem}.json lacks keys {missing}")
    if header["convention"] != "unitary":
        raise ValueError(f"unsupported transform convention {header['convention']!r}")
    grid = Grid(header["dim"], header["N"], header["L"])
    raw = np.frombuffer(stem.with_suffix(".f64").read_bytes(), dtype="<f8")
    expected = 2 * grid.n_points**grid.dim
    if raw.size != expected:
        raise ValueError(f"payload holds {raw.size} floats, expected {expected}")
    values = raw.astype(np.float64).view(np.complex128).reshape(grid.shape)
    return ComplexField(grid, values.copy()), header
