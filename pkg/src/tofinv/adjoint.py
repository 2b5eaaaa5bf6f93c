"""Adjoint-state gradients, the sensitivity problem, and a finite-difference oracle.

The adjoint here is the exact transpose of the discrete forward march, so the
gradient it returns is the gradient of the *discrete* objective (trapezoid in
space and time).  Using the trapezoid-weighted inner product ``<u, v> =
sum_{n,j} w_n W_j u v`` the Crank-Nicolson operator is self-adjoint, which
lets the transposed recursion be written as the same forward stencil run in
reversed time ``mu(x, t) = lambda(x, tau - t)`` starting from ``mu(x, 0) = 0``.

Source convention: ``S`` is the right-hand side in
``rho c dmu/dt = d/dx(k dmu/dx) - S(x, tau - t)``, so ``-S`` is the pointwise
derivative of the objective integrand with respect to the temperature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .forward import check_velocity, propagator, solve_increment
from .model import (
    FluxProfile,
    MaterialProps,
    SimGrid,
    TemperatureField,
    TimeSeries,
    ValidationError,
)

__all__ = [
    "AdjointField",
    "GradientPair",
    "assemble_source",
    "solve_adjoint",
    "gradient_q",
    "gradient_L",
    "solve_sensitivity",
    "delta_lambda",
    "fd_gradient",
]

TRACE_SOURCES = ("uniform", "boundary")


@dataclass(frozen=True, eq=False)
class AdjointField:
    """Time-reversed adjoint ``mu``; column ``m`` is ``lambda`` at ``tau - t_m``."""

    grid: SimGrid
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        shape = (self.grid.M + 1, self.grid.N + 1)
        if arr.shape != shape:
            raise ValidationError("adjoint", f"expected shape {shape}, got {arr.shape}")
        if np.any(arr[:, 0] != 0.0):
            raise ValidationError("adjoint", "mu(x, 0) must vanish")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


@dataclass(frozen=True)
class GradientPair:
    grad_q: np.ndarray
    grad_L: float


def _series(s) -> np.ndarray:
    return s.values if isinstance(s, TimeSeries) else np.asarray(s, dtype=float)


def assemble_source(
    lambda_sim,
    lambda_m,
    t_trace,
    t_m,
    field: TemperatureField,
    props: MaterialProps,
    alpha: float,
    trace_source: str = "uniform",
) -> np.ndarray:
    """Adjoint source on the field's grid.

    ``S = 2 (Lam - Lam_m) a / V(T)^2 - alpha_L (T(L) - T_m)``, where the
    far-wall mismatch is spread uniformly with weight ``alpha / L``
    (``trace_source="uniform"``) or concentrated on the last node so that the
    gradient is exact (``trace_source="boundary"``).
    """
    grid = field.grid
    lam_res = _series(lambda_sim) - _series(lambda_m)
    trace_res = _series(t_trace) - _series(t_m)
    for name, arr in (("lambda residual", lam_res), ("trace residual", trace_res)):
        if arr.shape != (grid.N + 1,):
            raise ValidationError(name, f"expected {grid.N + 1} samples, got {arr.size}")
    V = props.velocity(field.values)
    check_velocity(V)
    S = 2.0 * props.a * lam_res[None, :] / V**2
    if alpha:
        if trace_source == "uniform":
            S = S - (alpha / grid.L) * trace_res[None, :]
        elif trace_source == "boundary":
            S[-1, :] -= alpha * trace_res / grid.space_weights[-1]
        else:
            raise ValidationError("trace_source", f"expected one of {TRACE_SOURCES}, got {trace_source!r}")
    return S


def solve_adjoint(props: MaterialProps, grid: SimGrid, source: np.ndarray) -> AdjointField:
    """March ``mu`` forward in reversed time from ``mu(x, 0) = 0``.

    Step ``m`` (``1..N``) carries the source of forward instant ``n = N + 1 - m``
    weighted by ``w_n / dt``; the initial instant never enters because the
    initial temperature is fixed.
    """
    source = np.asarray(source, dtype=float)
    shape = (grid.M + 1, grid.N + 1)
    if source.shape != shape:
        raise ValidationError("source", f"expected shape {shape}, got {source.shape}")
    scaled = -source * (grid.time_weights / grid.dt)[None, :]
    rhs = scaled[:, :0:-1]
    mu = propagator(props, grid).run_sourced(rhs)
    return AdjointField(grid, mu)


def gradient_q(mu: AdjointField) -> np.ndarray:
    """Flux gradient density ``dJ/dq(t_i)`` from the adjoint trace at ``x = 0``.

    ``mu(0, tau - t_i)`` sampled consistently with the Crank-Nicolson flux
    average: the mean of the two adjoint levels bracketing ``tau - t_i``,
    rescaled at the end instants by their half trapezoid weight.  The result
    is a density with respect to the trapezoid measure in time, i.e.
    ``dJ = sum_i w_i g_i dq_i``.
    """
    grid = mu.grid
    rev = np.append(mu.values[0, :], 0.0)[::-1]
    return (grid.dt / (2.0 * grid.time_weights)) * (rev[1:] + rev[:-1])


def gradient_L(lambda_sim, lambda_m, field: TemperatureField, props: MaterialProps, grid: SimGrid | None = None) -> float:
    """Thickness derivative keeping only the moving-boundary term of the transit time.

    ``int_0^tau 2 (Lam - Lam_m) / V(T(L, t)) dt`` (trapezoid).  The
    dependence of the interior temperature on ``L`` is not included.
    """
    grid = grid or field.grid
    res = _series(lambda_sim) - _series(lambda_m)
    V_far = props.velocity(field.values[-1:, :])
    check_velocity(V_far, "far-wall velocity")
    return float(grid.time_weights @ (2.0 * res / V_far[0]))


def solve_sensitivity(props: MaterialProps, grid: SimGrid, direction) -> TemperatureField:
    """Linearised temperature response to a flux perturbation (zero initial data)."""
    p = direction.values if isinstance(direction, FluxProfile) else np.asarray(direction, dtype=float)
    if p.shape != (grid.N + 1,):
        raise ValidationError("direction", f"expected {grid.N + 1} samples, got {p.size}")
    return TemperatureField(grid, solve_increment(props, grid, p))


def delta_lambda(sens: TemperatureField, base: TemperatureField, props: MaterialProps) -> TimeSeries:
    """First-order transit-time change ``-2 int a dT / V(T_base)^2 dx`` under ``sens``."""
    if sens.values.shape != base.values.shape:
        raise ValidationError("sensitivity", f"shape {sens.values.shape} != base {base.values.shape}")
    V = props.velocity(base.values)
    check_velocity(V)
    integrand = -2.0 * props.a * sens.values / V**2
    return TimeSeries(base.grid.space_weights @ integrand, unit="s")


def fd_gradient(
    J: Callable[[np.ndarray, float], float],
    q: np.ndarray,
    L: float,
    which,
    step: float | None = None,
) -> float:
    """Central difference of ``J(q, L)`` in one coordinate.

    ``which`` is an integer flux index or the string ``"L"``.  The default step
    is ``sqrt(eps)`` times the coordinate scale (``max(|q|_inf, 1e3)`` W/m^2 for
    flux components, ``L`` for the thickness).
    """
    q = np.array(q, dtype=float)
    eps = np.sqrt(np.finfo(float).eps)
    if which == "L":
        h = step if step is not None else eps * L
        if h <= 0:
            raise ValueError("step must be positive")
        return (J(q, L + h) - J(q, L - h)) / (2.0 * h)
    i = int(which)
    h = step if step is not None else eps * max(np.abs(q).max(), 1e3)
    if h <= 0:
        raise ValueError("step must be positive")
    qp, qm = q.copy(), q.copy()
    qp[i] += h
    qm[i] -= h
    return (J(qp, L) - J(qm, L)) / (2.0 * h)
