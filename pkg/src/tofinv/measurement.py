"""Synthetic measurements, transit-time quantisation, and measurement files.

File format: a CSV with header ``t_s,lambda_s,T_L_C`` (one row per instant)
and a sidecar ``<name>.meta`` of ``key = value`` lines carrying the accuracy,
seed and synthesis parameters.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .forward import boundary_trace, solve_heat, time_of_flight
from .model import FluxProfile, MaterialProps, MeasurementSet, TimeSeries, ValidationError, make_grid

HEADER = ("t_s", "lambda_s", "T_L_C")


class ParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


@dataclass(frozen=True)
class SynthesisSpec:
    """Ground truth and channel model for a synthetic experiment.

    ``true_q`` is a constant flux or a table sampled at the ``N + 1``
    measurement instants.  ``fine_factor`` refines both space and time of the
    simulation grid relative to the inversion grid of ``M`` cells.
    """

    true_q: float | tuple = 1e5
    true_L: float = 0.05
    T0: float = 26.0
    accuracy: float = 0.0
    temp_noise: float = 0.0
    dither: bool = False
    seed: int = 0
    tau: float = 500.0
    N: int = 500
    M: int = 100
    fine_factor: int = 2

    def __post_init__(self):
        if not (self.true_L > 0 and math.isfinite(self.true_L)):
            raise ValidationError("true_L", f"must be > 0, got {self.true_L!r}")
        if not self.accuracy >= 0:
            raise ValidationError("accuracy", f"must be >= 0, got {self.accuracy!r}")
        if not self.temp_noise >= 0:
            raise ValidationError("temp_noise", f"must be >= 0, got {self.temp_noise!r}")
        if int(self.fine_factor) < 1:
            raise ValidationError("fine_factor", f"must be >= 1, got {self.fine_factor!r}")
        if not np.isscalar(self.true_q):
            object.__setattr__(self, "true_q", tuple(float(v) for v in self.true_q))
            if len(self.true_q) != self.N + 1:
                raise ValidationError("true_q", f"table needs {self.N + 1} samples, got {len(self.true_q)}")

    def flux_at(self, t: np.ndarray) -> np.ndarray:
        if np.isscalar(self.true_q):
            return np.full(t.size, float(self.true_q))
        coarse_t = np.linspace(0.0, self.tau, self.N + 1)
        return np.interp(t, coarse_t, np.asarray(self.true_q))


def quantize(series, quantum: float):
    """Round each sample to the nearest multiple of ``quantum`` (ties to even).

    ``quantum == 0`` returns the input unchanged.  Accepts a :class:`TimeSeries`
    or an array and returns the same kind.
    """
    quantum = float(quantum)
    if not quantum >= 0:
        raise ValidationError("quantum", f"must be >= 0, got {quantum!r}")
    is_series = isinstance(series, TimeSeries)
    values = series.values if is_series else np.asarray(series, dtype=float)
    out = values.copy() if quantum == 0 else quantum * np.round(values / quantum)
    return TimeSeries(out, series.unit) if is_series else out


def exact_signals(spec: SynthesisSpec, props: MaterialProps) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free transit time and far-wall temperature at the measurement instants."""
    f = int(spec.fine_factor)
    grid = make_grid(spec.true_L, spec.tau, spec.M * f, spec.N * f)
    q = FluxProfile(spec.flux_at(grid.t))
    field = solve_heat(props, grid, q, spec.T0)
    lam = time_of_flight(field, props).values[::f]
    trace = boundary_trace(field).values[::f]
    return lam, trace


def synthesize(spec: SynthesisSpec, props: MaterialProps) -> MeasurementSet:
    """Simulate the gauge on the true wall and pass the readings through the channel model."""
    lam, trace = exact_signals(spec, props)
    rng = np.random.default_rng(spec.seed)
    if spec.dither and spec.accuracy > 0:
        lam = lam + rng.uniform(-0.5 * spec.accuracy, 0.5 * spec.accuracy, lam.size)
    lam = quantize(lam, spec.accuracy)
    if spec.temp_noise > 0:
        trace = trace + rng.normal(0.0, spec.temp_noise, trace.size)
    meta = {f"synth.{k}": v for k, v in asdict(spec).items() if k != "true_q"}
    meta["synth.true_q"] = spec.true_q if np.isscalar(spec.true_q) else "table"
    meta["seed"] = spec.seed
    return MeasurementSet(
        TimeSeries(lam, "s"), TimeSeries(trace, "C"), accuracy=spec.accuracy, tau=spec.tau, meta=meta
    )


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta")


def _num(x: float) -> str:
    """Shortest text that reads back to the same float (``0`` rather than ``0.0``)."""
    short = f"{x:g}"
    return short if float(short) == x else repr(float(x))


def save_measurements(path, meas: MeasurementSet) -> Path:
    """Write the CSV and its metadata sidecar.

    Values are printed with 17 significant digits, which reloads bitwise.
    """
    path = Path(path)
    if meas.tau is None:
        raise ValidationError("measurements", "cannot save without a horizon")
    t = np.linspace(0.0, meas.tau, meas.n_samples)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for row in zip(t, meas.lambda_m.values, meas.t_m.values):
            w.writerow([f"{float(v):.16e}" for v in row])
    lines = [f"accuracy = {_num(meas.accuracy)}", f"tau = {_num(float(meas.tau))}"]
    lines += [f"{k} = {v}" for k, v in sorted(meas.meta.items()) if k not in ("accuracy", "tau")]
    meta_path(path).write_text("\n".join(lines) + "\n")
    return path


def read_meta(path) -> dict:
    """Parse a ``key = value`` sidecar; values stay strings."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(path, lineno, f"expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_measurements(path) -> MeasurementSet:
    """Read a measurement CSV (and its sidecar when present)."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise ParseError(path, 1, f"expected header {','.join(HEADER)}, got {header!r}")
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(HEADER):
                raise ParseError(path, lineno, f"expected {len(HEADER)} columns, got {len(row)}")
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise ParseError(path, lineno, f"non-numeric value in row {lineno - 1}: {row!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError(path, lineno, f"non-finite value in row {lineno - 1}")
            rows.append(values)
    if len(rows) < 2:
        raise ValidationError("measurements", f"{path} holds {len(rows)} rows; need at least 2")
    data = np.array(rows)
    t = data[:, 0]
    steps = np.diff(t)
    if t[0] != 0.0 or np.any(steps <= 0) or not np.allclose(steps, steps.mean(), rtol=1e-9, atol=0):
        raise ValidationError("t_s", "instants must start at 0 and be uniformly spaced")

    meta = read_meta(meta_path(path)) if meta_path(path).exists() else {}
    accuracy = float(meta.pop("accuracy", 0.0))
    tau = float(meta.pop("tau", t[-1]))
    return MeasurementSet(
        TimeSeries(data[:, 1], "s"), TimeSeries(data[:, 2], "C"), accuracy=accuracy, tau=tau, meta=meta
    )
