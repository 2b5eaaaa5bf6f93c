"""Polak-Ribiere-Polyak directions, the closed-form flux step and the Wolfe-Powell search."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..model import ValidationError

log = logging.getLogger(__name__)


class GradientVanished(ArithmeticError):
    """The previous gradient is zero: the flux iteration has converged."""


class DegenerateDirection(ArithmeticError):
    """The search direction has no measurable effect on the data."""


class NotADescentDirection(ValueError):
    pass


@dataclass(frozen=True)
class CgState:
    g_prev: np.ndarray
    p_prev: np.ndarray
    iteration: int = 1


@dataclass(frozen=True)
class WolfeConfig:
    """Armijo parameter ``rho``, curvature parameter ``sigma`` and bracket controls."""

    rho: float = 0.25
    sigma: float = 0.75
    lambda_max: float = 1.0
    max_bisections: int = 60

    def __post_init__(self):
        if not 0 < self.rho < 0.5:
            raise ValidationError("rho", f"must lie in (0, 1/2), got {self.rho!r}")
        if not self.rho < self.sigma < 1:
            raise ValidationError("sigma", f"must lie in (rho, 1), got {self.sigma!r}")
        if not (self.lambda_max > 0 and math.isfinite(self.lambda_max)):
            raise ValidationError("lambda_max", f"must be finite and > 0, got {self.lambda_max!r}")
        if self.max_bisections < 1:
            raise ValidationError("max_bisections", f"must be >= 1, got {self.max_bisections!r}")


@dataclass(frozen=True)
class WolfeResult:
    step: float
    value: float
    slope: float
    flagged: bool
    evaluations: int


def prp_coefficient(g, g_prev) -> float:
    """``g . (g - g_prev) / |g_prev|^2``."""
    g = np.asarray(g, dtype=float)
    g_prev = np.asarray(g_prev, dtype=float)
    denom = float(g_prev @ g_prev)
    if denom == 0.0:
        raise GradientVanished("previous gradient is zero")
    return float(g @ (g - g_prev)) / denom


def cg_direction(g, state: CgState | None) -> tuple[np.ndarray, float, bool]:
    """Next conjugate direction.

    Returns ``(p, coefficient, reset)``.  Without history ``p = -g``.  If the
    PRP combination is not a descent direction it is replaced by ``-g``.
    """
    g = np.asarray(g, dtype=float)
    if state is None:
        return -g, 0.0, False
    coef = prp_coefficient(g, state.g_prev)
    p = -g + coef * state.p_prev
    if float(p @ g) > 0.0:
        log.info("PRP direction is ascent (coef=%.3g); restarting with -g", coef)
        return -g, coef, True
    return p, coef, False


def exact_step_q(
    lambda_sim,
    lambda_m,
    dlam,
    *,
    weights=None,
    trace_residual=None,
    dtrace=None,
    alpha: float = 0.0,
) -> float:
    """Closed-form minimiser of the linearised misfit along a direction.

    ``beta = sum (Lam - Lam_m) dLam / sum dLam^2``; the update that removes the
    modelled residual is ``q - beta * p``.  When ``alpha`` and the trace
    quantities are given, the far-wall misfit (linear in ``q``) joins both
    sums with weight ``alpha``.  ``weights`` defaults to plain sums.
    """
    r = np.asarray(getattr(lambda_sim, "values", lambda_sim), dtype=float) - np.asarray(
        getattr(lambda_m, "values", lambda_m), dtype=float
    )
    d = np.asarray(getattr(dlam, "values", dlam), dtype=float)
    w = np.ones_like(r) if weights is None else np.asarray(weights, dtype=float)
    num = float(w @ (r * d))
    den = float(w @ (d * d))
    if alpha and trace_residual is not None and dtrace is not None:
        rt = np.asarray(trace_residual, dtype=float)
        dt = np.asarray(dtrace, dtype=float)
        num += alpha * float(w @ (rt * dt))
        den += alpha * float(w @ (dt * dt))
    if den == 0.0 or not math.isfinite(den):
        raise DegenerateDirection("direction does not change the modelled data")
    return num / den


def wolfe_powell(
    phi: Callable[[float], tuple[float, float]],
    phi0: float,
    dphi0: float,
    cfg: WolfeConfig,
    first_step: float | None = None,
) -> WolfeResult:
    """Bracket-and-bisect search for a step meeting both Wolfe-Powell conditions.

    ``phi(lam)`` returns ``(value, slope)``.  The bracket starts as
    ``[0, lambda_max]``; an Armijo failure shrinks the right end, a curvature
    failure moves the left end, and the next trial is the midpoint.  Trials
    where ``phi`` raises ``ArithmeticError`` count as Armijo failures.  If the
    cap is reached, or ``lambda_max`` itself passes Armijo but not the
    curvature test, the best Armijo-satisfying step seen is returned (0 if
    none) with ``flagged=True``.
    """
    if not dphi0 < 0:
        raise NotADescentDirection(f"phi'(0) = {dphi0!r} is not negative")
    lo, hi = 0.0, cfg.lambda_max
    lam = cfg.lambda_max if first_step is None else min(max(first_step, 0.0), cfg.lambda_max)
    if lam == 0.0:
        lam = 0.5 * cfg.lambda_max
    best = (0.0, phi0, dphi0)
    for count in range(1, cfg.max_bisections + 1):
        try:
            val, slope = phi(lam)
        except ArithmeticError:
            val, slope = math.inf, math.nan
        if val <= phi0 + cfg.rho * lam * dphi0:
            if val < best[1]:
                best = (lam, val, slope)
            if slope >= cfg.sigma * dphi0:
                return WolfeResult(lam, val, slope, False, count)
            if lam >= cfg.lambda_max:
                # still descending at the bracket end: nothing to bisect
                return WolfeResult(best[0], best[1], best[2], True, count)
            lo = lam
        else:
            hi = lam
        lam = 0.5 * (lo + hi)
    log.info("Wolfe-Powell hit %d bisections; returning best Armijo step %.3g", cfg.max_bisections, best[0])
    return WolfeResult(best[0], best[1], best[2], True, cfg.max_bisections)
