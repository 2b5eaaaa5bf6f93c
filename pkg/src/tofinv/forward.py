"""1-D transient conduction solver and the acoustic time-of-flight functional.

The wall occupies ``[0, L]``; flux ``q(t)`` enters at ``x = 0`` and the far wall
``x = L`` is insulated.  Time stepping is Crank-Nicolson, space is second-order
central with ghost-node Neumann conditions.  With trapezoid weights ``W`` the
discrete operator satisfies ``W K = (W K)^T``; the adjoint solver relies on it.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.linalg import solve_banded

from .model import DomainError, FluxProfile, MaterialProps, SimGrid, TemperatureField, TimeSeries

__all__ = [
    "Propagator",
    "propagator",
    "solve_heat",
    "solve_increment",
    "time_of_flight",
    "boundary_trace",
    "check_velocity",
]


class Propagator:
    """One Crank-Nicolson step written as ``u_next = P u + s * w``.

    ``A u_next = B u + (q_n + q_{n+1}) / h * e_0`` with ``A = rho c/dt - K/2`` and
    ``B = rho c/dt + K/2``.  ``A`` is tridiagonal; it is factored once per
    (material, spacing, step) and the dense propagator is cached.
    """

    def __init__(self, heat_capacity: float, k: float, h: float, dt: float, n_nodes: int):
        m = n_nodes
        r = k / h**2
        d = heat_capacity / dt
        ab = np.zeros((3, m))
        ab[1, :] = d + r
        ab[0, 1:] = -0.5 * r
        ab[2, :-1] = -0.5 * r
        # ghost-node rows: (-2, 2) stencil at both ends
        ab[0, 1] = -r
        ab[2, m - 2] = -r
        B = np.zeros((m, m))
        idx = np.arange(m)
        B[idx, idx] = d - r
        B[idx[:-1], idx[:-1] + 1] = 0.5 * r
        B[idx[1:], idx[1:] - 1] = 0.5 * r
        B[0, 1] = r
        B[m - 1, m - 2] = r
        self.banded = ab
        self.A_inv = solve_banded((1, 1), ab, np.eye(m))
        self.P = self.A_inv @ B
        self.w = self.A_inv[:, 0] / h
        for arr in (self.A_inv, self.P, self.w):
            arr.flags.writeable = False

    def run(self, forcing: np.ndarray) -> np.ndarray:
        """March ``u`` from zero under the per-step forcing ``s_n = q_n + q_{n+1}``."""
        m = self.P.shape[0]
        out = np.zeros((m, forcing.size + 1))
        P, w = self.P, self.w
        u = out[:, 0]
        for i, s in enumerate(forcing):
            u = P @ u + s * w
            out[:, i + 1] = u
        return out

    def run_sourced(self, rhs: np.ndarray) -> np.ndarray:
        """March from zero with a full right-hand side per step: ``A u_next = B u + rhs_n``."""
        m = self.P.shape[0]
        inc = self.A_inv @ rhs
        out = np.zeros((m, rhs.shape[1] + 1))
        P = self.P
        u = out[:, 0]
        for i in range(rhs.shape[1]):
            u = P @ u + inc[:, i]
            out[:, i + 1] = u
        return out


@lru_cache(maxsize=64)
def _cached(heat_capacity: float, k: float, h: float, dt: float, n_nodes: int) -> Propagator:
    return Propagator(heat_capacity, k, h, dt, n_nodes)


def propagator(props: MaterialProps, grid: SimGrid) -> Propagator:
    return _cached(props.heat_capacity, props.k, grid.h, grid.dt, grid.M + 1)


def solve_increment(props: MaterialProps, grid: SimGrid, q: np.ndarray) -> np.ndarray:
    """Temperature rise above a uniform initial state driven by flux ``q``.

    This is the linear part of the solve and doubles as the sensitivity
    problem (zero initial data, boundary flux = search direction).
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (grid.N + 1,):
        raise ValueError(f"flux has {q.size} samples, grid needs {grid.N + 1}")
    return propagator(props, grid).run(q[:-1] + q[1:])


def solve_heat(props: MaterialProps, grid: SimGrid, q: FluxProfile, T0: float) -> TemperatureField:
    """Solve the heated-wall problem from a uniform initial temperature ``T0``.

    Marching the increment over ``T0`` means a zero flux reproduces ``T0``
    exactly (no round-off from the linear solves).
    """
    q.check_grid(grid)
    u = solve_increment(props, grid, q.values)
    return TemperatureField(grid, u + float(T0))


def check_velocity(V: np.ndarray, what: str = "velocity") -> None:
    if np.all(V > 0):
        return
    j, i = np.argwhere(~(V > 0))[0]
    raise DomainError(f"non-positive {what} {V[j, i]:.6g} m/s at node {j}, instant {i}")


def time_of_flight(field: TemperatureField, props: MaterialProps) -> TimeSeries:
    """Round-trip transit time ``2 * int_0^L dx / V(T)`` at each instant (trapezoid)."""
    V = props.velocity(field.values)
    check_velocity(V)
    lam = 2.0 * (field.grid.space_weights @ (1.0 / V))
    return TimeSeries(lam, unit="s")


def boundary_trace(field: TemperatureField) -> TimeSeries:
    """Far-wall temperature ``T(L, t)``."""
    return TimeSeries(field.values[-1, :], unit="C")
