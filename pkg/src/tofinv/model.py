"""Domain types shared by the solver, adjoint, optimizer and I/O layers.

All quantities are SI (m, s, W/m^2) with temperatures in degrees Celsius.
Every type here is a frozen value object; arrays are copied on construction
and marked read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""

    def __init__(self, name: str, message: str):
        super().__init__(f"{name}: {message}")
        self.name = name


class DomainError(ArithmeticError):
    """Raised when a temperature field leaves the admissible velocity range."""


def _finite_positive(name: str, value) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError(name, f"expected a number, got {value!r}") from None
    if not math.isfinite(value) or value <= 0.0:
        raise ValidationError(name, f"must be finite and > 0, got {value!r}")
    return value


def _frozen(values, name: str, length: int | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(name, f"expected a 1-D series, got shape {arr.shape}")
    if length is not None and arr.size != length:
        raise ValidationError(name, f"expected {length} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(name, "contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class MaterialProps:
    """Thermal constants and the linear velocity-temperature calibration.

    The acoustic velocity is ``V(T) = a*T + b``.
    """

    rho: float
    c: float
    k: float
    a: float
    b: float

    def __post_init__(self):
        for name in ("rho", "c", "k", "b"):
            object.__setattr__(self, name, _finite_positive(name, getattr(self, name)))
        a = float(self.a)
        if not math.isfinite(a):
            raise ValidationError("a", f"must be finite, got {self.a!r}")
        object.__setattr__(self, "a", a)

    @property
    def heat_capacity(self) -> float:
        """Volumetric heat capacity rho*c [J/(m^3 C)]."""
        return self.rho * self.c

    @property
    def diffusivity(self) -> float:
        return self.k / (self.rho * self.c)

    def velocity(self, T):
        return self.a * np.asarray(T, dtype=float) + self.b

    def max_admissible_temperature(self) -> float:
        """Temperature at which the velocity would reach zero (inf if a >= 0)."""
        return -self.b / self.a if self.a < 0 else math.inf


#: Steel specimen used in the lab experiments.
STEEL_PROPS = MaterialProps(rho=7800.0, c=400.0, k=50.0, a=-0.4521, b=3259.9)


@dataclass(frozen=True)
class SimGrid:
    """Uniform space-time grid on ``[0, L] x [0, tau]``.

    ``M`` cells give ``M + 1`` nodes; ``N`` steps give ``N + 1`` instants.
    """

    L: float
    tau: float
    M: int
    N: int

    def __post_init__(self):
        object.__setattr__(self, "L", _finite_positive("L", self.L))
        object.__setattr__(self, "tau", _finite_positive("tau", self.tau))
        for name, lo in (("M", 2), ("N", 1)):
            v = getattr(self, name)
            if isinstance(v, bool) or not float(v).is_integer() or int(v) < lo:
                raise ValidationError(name, f"must be an integer >= {lo}, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def dt(self) -> float:
        return self.tau / self.N

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.M + 1) * self.h

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.dt

    @property
    def space_weights(self) -> np.ndarray:
        """Composite trapezoid weights over the nodes."""
        w = np.full(self.M + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    @property
    def time_weights(self) -> np.ndarray:
        """Composite trapezoid weights over the instants."""
        w = np.full(self.N + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    def with_thickness(self, L: float) -> "SimGrid":
        """Same node/step counts, rescaled spacing."""
        return replace(self, L=L)


def make_grid(L: float, tau: float, M: int, N: int) -> SimGrid:
    """Build a :class:`SimGrid`, validating every field."""
    return SimGrid(L=L, tau=tau, M=M, N=N)


@dataclass(frozen=True, eq=False)
class TemperatureField:
    """Nodal temperatures, row ``j`` = node ``x_j``, column ``i`` = instant ``t_i``."""

    grid: SimGrid
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        shape = (self.grid.M + 1, self.grid.N + 1)
        if arr.shape != shape:
            raise ValidationError("values", f"expected shape {shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("temperature field contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def initial(self) -> np.ndarray:
        return self.values[:, 0]


@dataclass(frozen=True, eq=False)
class FluxProfile:
    """Boundary heat-flux density [W/m^2] at each grid instant."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, "flux"))

    def __len__(self):
        return self.values.size

    @classmethod
    def constant(cls, value: float, grid: SimGrid) -> "FluxProfile":
        return cls(np.full(grid.N + 1, float(value)))

    def check_grid(self, grid: SimGrid) -> "FluxProfile":
        if self.values.size != grid.N + 1:
            raise ValidationError("flux", f"expected {grid.N + 1} samples, got {self.values.size}")
        return self


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Scalar samples at the grid instants, tagged with a unit string."""

    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, f"series[{self.unit}]"))

    def __len__(self):
        return self.values.size

    def check_grid(self, grid: SimGrid) -> "TimeSeries":
        if self.values.size != grid.N + 1:
            raise ValidationError(
                f"series[{self.unit}]", f"expected {grid.N + 1} samples, got {self.values.size}"
            )
        return self


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Measured time of flight and far-wall temperature at common instants.

    ``accuracy`` is the time quantum applied to ``lambda_m`` (0 means exact).
    ``meta`` carries free-form provenance (seed, synthesis parameters).
    """

    lambda_m: TimeSeries
    t_m: TimeSeries
    accuracy: float = 0.0
    tau: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.lambda_m) != len(self.t_m):
            raise ValidationError(
                "measurements",
                f"lambda_m has {len(self.lambda_m)} samples but T_m has {len(self.t_m)}",
            )
        acc = float(self.accuracy)
        if not math.isfinite(acc) or acc < 0:
            raise ValidationError("accuracy", f"must be >= 0, got {self.accuracy!r}")
        object.__setattr__(self, "accuracy", acc)

    @property
    def n_samples(self) -> int:
        return len(self.lambda_m)

    def check_grid(self, grid: SimGrid) -> "MeasurementSet":
        if self.n_samples != grid.N + 1:
            raise ValidationError(
                "measurements",
                f"{self.n_samples} rows do not match the {grid.N + 1} grid instants",
            )
        if self.tau is not None and not math.isclose(self.tau, grid.tau, rel_tol=1e-9):
            raise ValidationError("measurements", f"horizon {self.tau} s != grid horizon {grid.tau} s")
        return self
