"""CSV and JSON serialization for the experiment artifacts.

All CSVs carry a header row and long-format data (one row per (t, x)
pair for fields); floats are written with 17 significant digits so a
read-back reproduces the exact double.  Nothing here embeds timestamps
or hostnames: rerunning a command with the same inputs yields
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = [
    "write_field",
    "read_field",
    "write_series",
    "read_series",
    "write_theta_bands",
    "read_theta_bands",
    "write_state_bands",
    "read_state_bands",
    "write_histogram",
    "read_histogram",
    "write_weighted_sample",
    "read_weighted_sample",
    "write_meta",
    "read_meta",
]

_BAND_COLS = ("mean", "lo68", "hi68", "lo95", "hi95")


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_rows(path: Path, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _read_rows(path: Path, expected_header: list[str]) -> list[list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected_header:
            raise ValueError(f"{path} has header {header}, expected {expected_header}")
        return list(reader)


def _split_grid(rows: list[list[str]]):
    """Recover the (times, xs) grid from t-major long-format rows."""
    if not rows:
        raise ValueError("empty table")
    first_t = rows[0][0]
    xs = []
    for row in rows:
        if row[0] != first_t:
            break
        xs.append(float(row[1]))
    k = len(xs)
    if k == 0 or len(rows) % k != 0:
        raise ValueError("table is not a complete (t, x) grid")
    times = np.array([float(rows[j * k][0]) for j in range(len(rows) // k)])
    return times, np.array(xs), k


def write_field(path: Path, times, xs, field, value_name: str = "u"):
    """Long-format field: one row per (t, x) with a single value column."""
    field = np.asarray(field)
    rows = []
    for j, t in enumerate(np.asarray(times)):
        ts = _fmt(t)
        for i, x in enumerate(np.asarray(xs)):
            rows.append([ts, _fmt(x), _fmt(field[j, i])])
    _write_rows(path, ["t", "x", value_name], rows)


def read_field(path: Path, value_name: str = "u"):
    rows = _read_rows(path, ["t", "x", value_name])
    times, xs, k = _split_grid(rows)
    values = np.array([float(r[2]) for r in rows]).reshape(times.size, k)
    return times, xs, values


def write_series(path: Path, times, values, value_name: str = "theta"):
    rows = [[_fmt(t), _fmt(v)] for t, v in zip(np.asarray(times), np.asarray(values))]
    _write_rows(path, ["t", value_name], rows)


def read_series(path: Path, value_name: str = "theta"):
    rows = _read_rows(path, ["t", value_name])
    times = np.array([float(r[0]) for r in rows])
    values = np.array([float(r[1]) for r in rows])
    return times, values


def write_theta_bands(path: Path, times, bands: dict):
    """Per-step amplitude summary: t, mean, lo68, hi68, lo95, hi95."""
    rows = []
    for j, t in enumerate(np.asarray(times)):
        rows.append([_fmt(t)] + [_fmt(bands[c][j]) for c in _BAND_COLS])
    _write_rows(path, ["t"] + list(_BAND_COLS), rows)


def read_theta_bands(path: Path):
    rows = _read_rows(path, ["t"] + list(_BAND_COLS))
    times = np.array([float(r[0]) for r in rows])
    bands = {
        c: np.array([float(r[i + 1]) for r in rows]) for i, c in enumerate(_BAND_COLS)
    }
    return times, bands


def write_state_bands(path: Path, times, xs, bands: dict):
    """Per-step, per-state summary: t, x, mean, lo68, hi68, lo95, hi95."""
    rows = []
    for j, t in enumerate(np.asarray(times)):
        ts = _fmt(t)
        for i, x in enumerate(np.asarray(xs)):
            rows.append([ts, _fmt(x)] + [_fmt(bands[c][j, i]) for c in _BAND_COLS])
    _write_rows(path, ["t", "x"] + list(_BAND_COLS), rows)


def read_state_bands(path: Path):
    rows = _read_rows(path, ["t", "x"] + list(_BAND_COLS))
    times, xs, k = _split_grid(rows)
    bands = {}
    for i, c in enumerate(_BAND_COLS):
        bands[c] = np.array([float(r[i + 2]) for r in rows]).reshape(times.size, k)
    return times, xs, bands


def write_histogram(path: Path, edges, masses):
    edges = np.asarray(edges)
    masses = np.asarray(masses)
    rows = [
        [_fmt(edges[i]), _fmt(edges[i + 1]), _fmt(masses[i])]
        for i in range(masses.size)
    ]
    _write_rows(path, ["bin_left", "bin_right", "mass"], rows)


def read_histogram(path: Path):
    rows = _read_rows(path, ["bin_left", "bin_right", "mass"])
    left = np.array([float(r[0]) for r in rows])
    right = np.array([float(r[1]) for r in rows])
    masses = np.array([float(r[2]) for r in rows])
    return np.concatenate((left, right[-1:])), masses


def write_weighted_sample(path: Path, values, weights):
    rows = [[_fmt(v), _fmt(w)] for v, w in zip(np.asarray(values), np.asarray(weights))]
    _write_rows(path, ["value", "weight"], rows)


def read_weighted_sample(path: Path):
    rows = _read_rows(path, ["value", "weight"])
    values = np.array([float(r[0]) for r in rows])
    weights = np.array([float(r[1]) for r in rows])
    return values, weights


def write_meta(path: Path, meta: dict):
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_meta(path: Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
