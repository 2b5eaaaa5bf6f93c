"""Writers and readers for the CSV / ``key = value`` outputs of the command line."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .measurement import ParseError, read_meta
from .optimize import TRAJECTORY_COLUMNS

FLUX_COLUMNS = ("t_s", "q_W_per_m2")
SWEEP_COLUMNS = ("accuracy_s", "q0", "L0_mm", "L_rec_mm", "iterations", "final_J", "stop_reason")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path, header, types) -> list[list]:
    """Read a CSV with a mandatory header, converting each column with ``types``."""
    path = Path(path)
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got is None or tuple(got) != tuple(header):
            raise ParseError(path, 1, f"expected header {','.join(header)}, got {got!r}")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(path, lineno, f"expected {len(header)} columns, got {len(row)}")
            try:
                out.append([t(v) for t, v in zip(types, row)])
            except ValueError:
                raise ParseError(path, lineno, f"malformed row {row!r}") from None
    return out


def write_trajectory(path, records) -> Path:
    return write_csv(path, TRAJECTORY_COLUMNS, (r.row() for r in records))


def read_trajectory(path) -> np.ndarray:
    """Trajectory as a structured array with the CSV column names."""
    rows = read_csv(path, TRAJECTORY_COLUMNS, [int] + [float] * (len(TRAJECTORY_COLUMNS) - 1))
    dtype = [("n", int)] + [(c, float) for c in TRAJECTORY_COLUMNS[1:]]
    return np.array([tuple(r) for r in rows], dtype=dtype)


def write_flux(path, t, q) -> Path:
    return write_csv(path, FLUX_COLUMNS, zip(t, q))


def read_flux(path) -> tuple[np.ndarray, np.ndarray]:
    rows = read_csv(path, FLUX_COLUMNS, [float, float])
    data = np.array(rows, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(data)):
        raise ParseError(path, 0, "non-finite flux value")
    return data[:, 0], data[:, 1]


def write_summary(path, items: dict) -> Path:
    path = Path(path)
    lines = [f"{k} = {_fmt(v) if not isinstance(v, str) else v}" for k, v in items.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_summary(path) -> dict:
    return read_meta(path)


def write_sweep(path, rows) -> Path:
    return write_csv(path, SWEEP_COLUMNS, rows)


def read_sweep(path) -> list[list]:
    return read_csv(path, SWEEP_COLUMNS, [float, float, float, float, int, float, str])


def read_matrix(path) -> list[tuple[float, float, float]]:
    """Sweep matrix: CSV ``accuracy_s,q0,L0_mm``, one cell per row."""
    rows = read_csv(path, ("accuracy_s", "q0", "L0_mm"), [float, float, float])
    for i, (acc, q0, L0) in enumerate(rows, 2):
        if not (acc >= 0 and math.isfinite(q0) and L0 > 0):
            raise ParseError(path, i, f"invalid cell {acc}, {q0}, {L0}")
    return [tuple(r) for r in rows]
