"""CSV ingestion and model serialization."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import ConfigError
from .freqgrid import FrequencyGrid

__all__ = ["read_table", "write_table", "save_model", "load_model"]


def read_table(path, columns=None) -> dict:
    """Read a headed CSV into float columns; errors name the offending line."""
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"data file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file, a header row is required") from None
        header = [h.strip() for h in header]
        want = header if columns is None else list(columns)
        for c in want:
            if c not in header:
                raise ConfigError(f"{path}: column {c!r} not in header {header}")
        idx = [header.index(c) for c in want]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) != len(header):
                raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(row[i]) for i in idx])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric value in {row}") from None
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    arr = np.array(rows)
    return {c: arr[:, j] for j, c in enumerate(want)}


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    return repr(float(v))


def write_table(path, columns: dict) -> None:
    """Headed CSV; floats are written with ``repr`` so they round-trip exactly."""
    names = list(columns)
    cols = [list(np.asarray(columns[c], dtype=object).reshape(-1)) for c in names]
    if len({len(c) for c in cols}) > 1:
        raise ValueError("columns have different lengths")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([_cell(v) for v in row])


def save_model(path, grid: FrequencyGrid, theta, meta: dict) -> None:
    doc = {
        "grid": {"d": grid.d, "m": grid.m, "B": [float(b) for b in grid.B], "phase": grid.phase},
        "theta_real": [float(v) for v in np.real(theta)],
        "theta_imag": [float(v) for v in np.imag(theta)],
        "meta": meta,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
        g = doc["grid"]
        grid = FrequencyGrid(int(g["d"]), int(g["m"]), tuple(g["B"]), int(g.get("phase", 1)))
        theta = np.asarray(doc["theta_real"]) + 1j * np.asarray(doc["theta_imag"])
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read model {path}: {exc}") from None
    if theta.size != grid.n_modes:
        raise ConfigError(f"model {path}: coefficient count does not match the grid")
    return grid, theta, doc.get("meta", {})
