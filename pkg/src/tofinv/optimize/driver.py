"""Alternating flux / thickness iteration.

Each outer iteration takes one conjugate-gradient step on ``q`` at fixed
``L`` and, unless the thickness has stagnated, one steepest-descent step on
``L`` at fixed ``q``.  A stagnated thickness instead divides the far-wall
weight ``alpha`` by ``alpha_decay``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..adjoint import assemble_source, delta_lambda, gradient_L, gradient_q, solve_adjoint, solve_sensitivity
from ..model import DomainError
from .linesearch import (
    CgState,
    DegenerateDirection,
    WolfeConfig,
    cg_direction,
    exact_step_q,
    wolfe_powell,
)
from .objective import Evaluation, InverseProblem, ObjectiveConfig, evaluate

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("n", "J", "L_mm", "grad_q_norm", "d_n", "alpha", "beta", "lambda")


class DivergedError(RuntimeError):
    """The objective became non-finite; ``trajectory`` holds the records so far."""

    def __init__(self, message: str, trajectory: list):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class IterationRecord:
    """One trajectory row.

    ``J`` and ``L`` describe the iterate produced by iteration ``n``.
    ``grad_q_norm`` is the l1 norm of the flux gradient density the
    iteration started from, ``d_n`` the thickness direction it used (taken
    at the updated flux), and ``beta``/``lam`` the two step lengths.
    """

    n: int
    J: float
    L: float
    grad_q_norm: float
    d_n: float
    alpha: float
    beta: float
    lam: float
    flags: tuple = ()

    def row(self) -> tuple:
        return (self.n, self.J, self.L * 1e3, self.grad_q_norm, self.d_n, self.alpha, self.beta, self.lam)


@dataclass(frozen=True)
class InversionState:
    q: np.ndarray
    L: float
    cg: CgState | None
    alpha: float
    J: float
    n: int


@dataclass
class InversionResult:
    q: np.ndarray
    L: float
    J: float
    alpha: float
    iterations: int
    stop_reason: str
    trajectory: list[IterationRecord] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.stop_reason in ("J<crl", "grad-floor")


@dataclass(frozen=True)
class LStep:
    L: float
    d: float
    step: float
    evaluation: Evaluation
    flagged: bool = False
    clamped: bool = False


def _safe_evaluate(problem: InverseProblem, q, L: float) -> Evaluation | None:
    try:
        return evaluate(problem, q, L)
    except DomainError:
        return None


def descent_direction_L(problem: InverseProblem, ev: Evaluation) -> float:
    """``d = -dJ/dL`` using the moving-boundary formula."""
    return -gradient_L(ev.lam, problem.meas.lambda_m, ev.field, problem.props)


def sd_step_L(
    problem: InverseProblem,
    ev: Evaluation,
    alpha: float,
    cfg: ObjectiveConfig,
    wolfe: WolfeConfig,
    max_relative_step: float = 0.5,
) -> LStep:
    """One steepest-descent step on the thickness with a Wolfe-Powell step length.

    The bracket end is chosen so that ``lambda_max * |d| <= max_relative_step * L``
    and the step stays inside ``[L_min, L_max]``.  The first trial is the
    Gauss-Newton length for the transit-time misfit.
    """
    L = ev.L
    d = descent_direction_L(problem, ev)
    if d == 0.0:
        return LStep(L, 0.0, 0.0, ev)
    room = (L - cfg.L_min) if d < 0 else (cfg.L_max - L)
    lam_max = min(max_relative_step * L, room) / abs(d)
    if lam_max <= 0.0:
        return LStep(L, d, 0.0, ev, clamped=True)

    V_far = problem.props.velocity(ev.trace)
    curvature = float(ev.grid.time_weights @ (2.0 / V_far) ** 2)
    first = 1.0 / curvature

    cache: dict[float, Evaluation] = {}

    def phi(lam: float) -> tuple[float, float]:
        trial = evaluate(problem, ev.q, L + lam * d)
        cache[lam] = trial
        return trial.J(alpha), -descent_direction_L(problem, trial) * d

    res = wolfe_powell(phi, ev.J(alpha), -d * d, replace(wolfe, lambda_max=lam_max), first_step=first)
    if res.step == 0.0:
        return LStep(L, d, 0.0, ev, flagged=res.flagged)
    L_new = L + res.step * d
    if cfg.L_min <= L_new <= cfg.L_max:
        new_ev = cache[res.step]
    else:
        L_new = min(max(L_new, cfg.L_min), cfg.L_max)
        new_ev = evaluate(problem, ev.q, L_new)
    clamped = L_new <= cfg.L_min or L_new >= cfg.L_max
    return LStep(L_new, d, res.step, new_ev, flagged=res.flagged, clamped=clamped)


def flux_gradient(problem: InverseProblem, ev: Evaluation, alpha: float, cfg: ObjectiveConfig) -> np.ndarray:
    """Adjoint gradient density of ``J`` in ``q`` at the evaluated point."""
    meas = problem.meas
    S = assemble_source(ev.lam, meas.lambda_m, ev.trace, meas.t_m, ev.field, problem.props, alpha, cfg.trace_source)
    return gradient_q(solve_adjoint(problem.props, ev.grid, S))


def cg_step_q(
    problem: InverseProblem,
    ev: Evaluation,
    alpha: float,
    cfg: ObjectiveConfig,
    cg: CgState | None,
    g: np.ndarray | None = None,
):
    """One PRP conjugate-gradient update of the flux at fixed thickness.

    ``g`` is the flux gradient at ``ev`` if already known.  Returns
    ``(new_evaluation, g, p, beta, flags)``.  The closed-form step is applied
    as ``q - beta p``; if that raises the objective the opposite sign and
    then successive halvings are tried, and the flux is left unchanged if
    nothing descends.
    """
    props, meas = problem.props, problem.meas
    grid = ev.grid
    if g is None:
        g = flux_gradient(problem, ev, alpha, cfg)
    flags: list[str] = []
    p, _, reset = cg_direction(g, cg)
    if reset:
        flags.append("cg-reset")
    sens = solve_sensitivity(props, grid, p)
    dlam = delta_lambda(sens, ev.field, props)
    beta = exact_step_q(
        ev.lam,
        meas.lambda_m,
        dlam,
        weights=grid.time_weights,
        trace_residual=ev.trace - meas.t_m.values,
        dtrace=sens.values[-1],
        alpha=alpha,
    )
    J0 = ev.J(alpha)
    trials = [-beta, beta] + [-beta * 0.5**k for k in range(1, 31)]
    for k, s in enumerate(trials):
        trial = _safe_evaluate(problem, ev.q + s * p, ev.L)
        if trial is not None and trial.J(alpha) <= J0:
            if k == 1:
                flags.append("q-flip")
            elif k > 1:
                flags.append("q-backtrack")
            return trial, g, p, -s, flags
    flags.append("q-stalled")
    return ev, g, p, 0.0, flags


def alternate(
    problem: InverseProblem,
    q0,
    L0: float,
    cfg: ObjectiveConfig | None = None,
    wolfe: WolfeConfig | None = None,
    max_relative_step: float = 0.5,
) -> InversionResult:
    """Alternate flux CG steps and thickness SD steps until ``J < crl`` or ``n_max``.

    Raises :class:`DivergedError` if the objective becomes non-finite.
    """
    cfg = cfg or ObjectiveConfig()
    wolfe = wolfe or WolfeConfig()
    q = np.full(problem.N + 1, float(q0)) if np.ndim(q0) == 0 else np.asarray(q0, dtype=float)
    ev = evaluate(problem, q, L0)
    alpha = cfg.alpha
    J = ev.J(alpha)
    cg: CgState | None = None
    ref_L: float | None = None
    records: list[IterationRecord] = []
    stop = None
    n = 0

    g = flux_gradient(problem, ev, alpha, cfg)
    while J >= cfg.crl and n < cfg.n_max:
        if not np.any(g):
            stop = "grad-floor"
            break
        n += 1
        try:
            ev, g_used, p, beta, flags = cg_step_q(problem, ev, alpha, cfg, cg, g)
        except DegenerateDirection:
            stop = "grad-floor"
            n -= 1
            break
        cg = CgState(g_used, p, n)

        if ref_L is None or abs(ev.L - ref_L) > cfg.eps_stagnate:
            ref_L = ev.L
            step = sd_step_L(problem, ev, alpha, cfg, wolfe, max_relative_step)
            ev, d, lam = step.evaluation, step.d, step.step
            if step.flagged:
                flags.append("wolfe-flag")
            if step.clamped:
                flags.append("L-clamped")
        else:
            alpha /= cfg.alpha_decay
            ref_L = None
            d, lam = descent_direction_L(problem, ev), 0.0
            flags.append("alpha-decay")

        J = ev.J(alpha)
        records.append(IterationRecord(n, J, ev.L, float(np.abs(g_used).sum()), d, alpha, beta, lam, tuple(flags)))
        if not math.isfinite(J):
            raise DivergedError(f"objective became {J} at iteration {n}", records)
        g = flux_gradient(problem, ev, alpha, cfg)
        log.debug("n=%d J=%.4g L=%.6f mm alpha=%.3g %s", n, J, ev.L * 1e3, alpha, ",".join(flags))

    if stop is None:
        stop = "J<crl" if J < cfg.crl else "n_max"
    return InversionResult(ev.q.copy(), ev.L, J, alpha, n, stop, records)
