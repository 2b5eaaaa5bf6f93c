"""Least-squares misfit of transit time and far-wall temperature."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..forward import boundary_trace, solve_heat, time_of_flight
from ..model import FluxProfile, MaterialProps, MeasurementSet, SimGrid, TemperatureField, ValidationError


@dataclass(frozen=True)
class ObjectiveConfig:
    """Regularisation and stopping controls for the alternating driver.

    ``alpha`` weights the far-wall temperature misfit (units s^2/K^2, since
    it converts squared kelvin into squared seconds of transit time); it is
    divided by ``alpha_decay`` whenever the thickness moves by less than
    ``eps_stagnate`` metres.  ``L_min``/``L_max`` clamp the thickness.
    """

    alpha: float = 1e-14
    crl: float = 5e-18
    n_max: int = 500
    eps_stagnate: float = 1e-6
    alpha_decay: float = 10.0
    L_min: float = 1e-4
    L_max: float = 1.0
    trace_source: str = "uniform"

    def __post_init__(self):
        checks = {
            "alpha": self.alpha >= 0,
            "crl": self.crl > 0,
            "n_max": self.n_max >= 1 and float(self.n_max).is_integer(),
            "eps_stagnate": self.eps_stagnate > 0,
            "alpha_decay": self.alpha_decay > 1,
            "L_min": self.L_min > 0,
            "L_max": self.L_max > self.L_min,
            "trace_source": self.trace_source in ("uniform", "boundary"),
        }
        for name, ok in checks.items():
            value = getattr(self, name)
            if not ok or (isinstance(value, float) and not math.isfinite(value)):
                raise ValidationError(name, f"invalid value {value!r}")
        object.__setattr__(self, "n_max", int(self.n_max))


@dataclass(frozen=True)
class InverseProblem:
    """Everything fixed during an inversion: material, data, initial state, grid sizes."""

    props: MaterialProps
    meas: MeasurementSet
    T0: float
    M: int = 100

    def __post_init__(self):
        if self.meas.tau is None:
            raise ValidationError("measurements", "horizon tau is unknown")
        if self.meas.n_samples < 2:
            raise ValidationError("measurements", "need at least two instants")

    @property
    def N(self) -> int:
        return self.meas.n_samples - 1

    @property
    def tau(self) -> float:
        return float(self.meas.tau)

    def grid(self, L: float) -> SimGrid:
        return SimGrid(L=L, tau=self.tau, M=self.M, N=self.N)


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Objective value at ``(q, L)`` with the forward outputs reused by the gradients.

    The two misfit integrals are kept apart so the weight can change without
    another forward solve.
    """

    q: np.ndarray
    L: float
    field: TemperatureField
    lam: np.ndarray
    trace: np.ndarray
    misfit_lambda: float
    misfit_trace: float

    @property
    def grid(self) -> SimGrid:
        return self.field.grid

    def J(self, alpha: float) -> float:
        return self.misfit_lambda + alpha * self.misfit_trace


def evaluate(problem: InverseProblem, q, L: float) -> Evaluation:
    grid = problem.grid(L)
    q = FluxProfile(q).check_grid(grid)
    field = solve_heat(problem.props, grid, q, problem.T0)
    lam = time_of_flight(field, problem.props).values
    trace = boundary_trace(field).values
    w = grid.time_weights
    r_lam = lam - problem.meas.lambda_m.values
    r_trace = trace - problem.meas.t_m.values
    return Evaluation(
        q=q.values,
        L=grid.L,
        field=field,
        lam=lam,
        trace=trace,
        misfit_lambda=0.5 * float(w @ r_lam**2),
        misfit_trace=0.5 * float(w @ r_trace**2),
    )


def objective(q, L: float, problem: InverseProblem, alpha: float) -> tuple[float, Evaluation]:
    """``J = 1/2 int (Lam_L - Lam_m)^2 dt + alpha/2 int (T(L,t) - T_m)^2 dt``.

    Returns the value together with the cached :class:`Evaluation`.
    """
    ev = evaluate(problem, q, L)
    return ev.J(alpha), ev
