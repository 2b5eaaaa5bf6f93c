"""Adjoint-versus-finite-difference gradient audit (backs the ``gradcheck`` command)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .adjoint import assemble_source, fd_gradient, gradient_L, gradient_q, solve_adjoint
from .measurement import SynthesisSpec, synthesize
from .model import MaterialProps
from .optimize import InverseProblem, evaluate


@dataclass
class GradcheckReport:
    q_rel_errors: np.ndarray
    L_adjoint: list[float] = field(default_factory=list)
    L_fd: list[float] = field(default_factory=list)
    tolerance: float = 1e-3

    @property
    def q_max_error(self) -> float:
        return float(np.max(self.q_rel_errors))

    @property
    def L_sign_agreement(self) -> int:
        return int(sum(np.sign(a) == np.sign(f) for a, f in zip(self.L_adjoint, self.L_fd)))

    @property
    def L_rel_discrepancy(self) -> np.ndarray:
        a, f = np.array(self.L_adjoint), np.array(self.L_fd)
        return np.abs(a - f) / np.abs(f)

    @property
    def passed(self) -> bool:
        return self.q_max_error < self.tolerance and self.L_sign_agreement == len(self.L_fd)


def smooth_random_flux(rng: np.random.Generator, t: np.ndarray, level: float, modes: int = 3) -> np.ndarray:
    tau = t[-1]
    q = np.full(t.size, level)
    for m in range(1, modes + 1):
        q += level * 0.3 / m * rng.uniform(-1, 1) * np.sin(np.pi * m * t / tau + rng.uniform(0, np.pi))
    return q


def _problem(props, rng, tau, M, N, T0, accuracy=0.0):
    t = np.linspace(0.0, tau, N + 1)
    spec = SynthesisSpec(
        true_q=tuple(smooth_random_flux(rng, t, 1e5)),
        true_L=0.05,
        T0=T0,
        accuracy=accuracy,
        tau=tau,
        N=N,
        M=M,
    )
    return InverseProblem(props, synthesize(spec, props), T0, M), t


def flux_gradient_errors(
    problem: InverseProblem,
    q: np.ndarray,
    L: float,
    alpha: float = 0.0,
    trace_source: str = "uniform",
    source_hook: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Adjoint gradient density, FD density, and per-component relative error."""
    ev = evaluate(problem, q, L)
    meas = problem.meas
    S = assemble_source(ev.lam, meas.lambda_m, ev.trace, meas.t_m, ev.field, problem.props, alpha, trace_source)
    if source_hook is not None:
        S = source_hook(S)
    g = gradient_q(solve_adjoint(problem.props, ev.grid, S))
    w = ev.grid.time_weights

    def J(qq, LL):
        return evaluate(problem, qq, LL).J(alpha)

    fd = np.array([fd_gradient(J, q, L, i) for i in range(q.size)]) / w
    scale = np.maximum(np.abs(fd), 1e-12 * np.abs(fd).max())
    return g, fd, np.abs(g - fd) / scale


def thickness_gradient_pair(problem: InverseProblem, q: np.ndarray, L: float) -> tuple[float, float]:
    """Moving-boundary formula and central FD of ``J`` (``alpha = 0``) in ``L``."""
    ev = evaluate(problem, q, L)
    formula = gradient_L(ev.lam, problem.meas.lambda_m, ev.field, problem.props)
    fd = fd_gradient(lambda qq, LL: evaluate(problem, qq, LL).J(0.0), q, L, "L")
    return formula, fd


def gradcheck(
    props: MaterialProps,
    *,
    M: int = 20,
    N: int = 20,
    tau: float = 500.0,
    T0: float = 26.0,
    alpha: float = 0.0,
    configs: int = 20,
    tolerance: float = 1e-3,
    seed: int = 0,
    trace_source: str = "uniform",
    source_hook: Callable[[np.ndarray], np.ndarray] | None = None,
) -> GradcheckReport:
    """Compare the adjoint flux gradient with finite differences on one random
    smooth case, and the thickness formula with finite differences on
    ``configs`` random cases."""
    rng = np.random.default_rng(seed)
    problem, t = _problem(props, rng, tau, M, N, T0)
    q = smooth_random_flux(rng, t, 8e4)
    L = 0.05 * rng.uniform(0.9, 1.1)
    _, _, err = flux_gradient_errors(problem, q, L, alpha, trace_source, source_hook)
    report = GradcheckReport(err, tolerance=tolerance)
    for _ in range(configs):
        L_i = 0.05 * rng.uniform(0.5, 1.5)
        q_i = smooth_random_flux(rng, t, rng.uniform(0.0, 1.5e5))
        a, f = thickness_gradient_pair(problem, q_i, L_i)
        report.L_adjoint.append(a)
        report.L_fd.append(f)
    return report
