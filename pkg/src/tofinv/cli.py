"""Heat-flux and wall-thickness inversion from ultrasonic time of flight.

Subcommands ``simulate``, ``invert``, ``gradcheck`` and ``sweep``.

Exit status: 0 success, 2 validation error, 3 parse error, 4 divergence,
5 I/O error, 6 gradient check failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import reports
from .config import RunConfig, load_config
from .measurement import ParseError, load_measurements, save_measurements, synthesize
from .model import DomainError, ValidationError
from .optimize import DivergedError, InverseProblem, alternate
from .verify import gradcheck

EXIT_OK, EXIT_VALIDATION, EXIT_PARSE, EXIT_DIVERGED, EXIT_IO, EXIT_CHECK = 0, 2, 3, 4, 5, 6

log = logging.getLogger("tofinv")


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out) if args.out else cfg.out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> RunConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides[("run", "seed")] = args.seed
    return load_config(args.config, overrides)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    meas = synthesize(cfg.synthesis, cfg.props)
    path = save_measurements(out / "measurements.csv", meas)
    lam = meas.lambda_m.values
    spec = cfg.synthesis
    w = np.full(spec.N + 1, spec.tau / spec.N)
    w[[0, -1]] *= 0.5
    energy = float(w @ spec.flux_at(np.linspace(0.0, spec.tau, spec.N + 1)))
    mean_T = spec.T0 + energy / (cfg.props.heat_capacity * spec.true_L)
    print(f"lambda range   = {lam.min():.12g} .. {lam.max():.12g} s")
    print(f"lambda(0)      = {lam[0]:.12g} s")
    print(f"final mean T   = {mean_T:.6g} C")
    print(f"accuracy       = {meas.accuracy:g} s" + ("  (exact data)" if meas.accuracy == 0 else ""))
    print(f"measurements   = {path}")
    print(f"metadata       = {path.with_name(path.stem + '.meta')}")
    return EXIT_OK


def run_inversion(cfg: RunConfig, meas, out: Path, q0=None, L0=None) -> dict:
    """Invert one measurement set and write trajectory, flux and summary into ``out``."""
    meas.check_grid(_grid_for(cfg, meas))
    problem = InverseProblem(cfg.props, meas, cfg.T0, cfg.M)
    q0 = cfg.q0_array() if q0 is None else np.full(cfg.N + 1, float(q0))
    L0 = cfg.L0 if L0 is None else L0
    out.mkdir(parents=True, exist_ok=True)
    try:
        res = alternate(problem, q0, L0, cfg.objective, cfg.wolfe, cfg.max_relative_step)
    except DivergedError as exc:
        reports.write_trajectory(out / "trajectory.csv", exc.trajectory)
        raise
    reports.write_trajectory(out / "trajectory.csv", res.trajectory)
    reports.write_flux(out / "q.csv", np.linspace(0.0, cfg.tau, cfg.N + 1), res.q)
    summary = {
        "L_mm": res.L * 1e3,
        "iterations": res.iterations,
        "J": res.J,
        "stop_reason": res.stop_reason,
        "alpha_final": res.alpha,
        "accuracy_s": meas.accuracy,
        "q0_W_per_m2": float(q0[0]) if np.all(q0 == q0[0]) else "table",
        "L0_mm": L0 * 1e3,
    }
    reports.write_summary(out / "summary.txt", summary)
    return summary


def _grid_for(cfg: RunConfig, meas):
    from .model import make_grid

    if meas.n_samples != cfg.N + 1:
        raise ValidationError(
            "measurements", f"{meas.n_samples} rows but the configured grid has N + 1 = {cfg.N + 1} instants"
        )
    return make_grid(cfg.L0, cfg.tau, cfg.M, cfg.N)


def cmd_invert(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    meas = load_measurements(args.measurements)
    summary = run_inversion(cfg, meas, out)
    for k, v in summary.items():
        print(f"{k} = {v}")
    return EXIT_OK


def _corrupt(S: np.ndarray) -> np.ndarray:
    return 1.5 * S


def cmd_gradcheck(args) -> int:
    cfg = _config(args)
    gc = cfg.gradcheck
    rep = gradcheck(
        cfg.props,
        M=gc.M,
        N=gc.N,
        tau=cfg.tau,
        T0=cfg.T0,
        alpha=gc.alpha,
        configs=gc.configs,
        tolerance=gc.tolerance,
        seed=cfg.seed,
        trace_source=cfg.objective.trace_source,
        source_hook=_corrupt if args.corrupt_source else None,
    )
    print("component,rel_error")
    for i, e in enumerate(rep.q_rel_errors):
        print(f"{i},{e:.3e}")
    print(f"q_max_rel_error = {rep.q_max_error:.3e}  (threshold {rep.tolerance:g})")
    print("config,dJdL_formula,dJdL_fd,rel_discrepancy")
    for i, (a, f, d) in enumerate(zip(rep.L_adjoint, rep.L_fd, rep.L_rel_discrepancy)):
        print(f"{i},{a:.6e},{f:.6e},{d:.3e}")
    print(f"L_sign_agreement = {rep.L_sign_agreement}/{len(rep.L_fd)}")
    print(f"L_median_rel_discrepancy = {np.median(rep.L_rel_discrepancy):.3e}  (moving-boundary term only)")
    print("gradcheck = " + ("pass" if rep.passed else "FAIL"))
    return EXIT_OK if rep.passed else EXIT_CHECK


def _sweep_cell(task):
    cfg, meas, out, acc, q0, L0_mm = task
    try:
        s = run_inversion(cfg, meas, out, q0=q0, L0=L0_mm * 1e-3)
        return (acc, q0, L0_mm, s["L_mm"], s["iterations"], s["J"], s["stop_reason"])
    except DivergedError as exc:
        return (acc, q0, L0_mm, float("nan"), len(exc.trajectory), float("nan"), "diverged")
    except (ArithmeticError, ValueError) as exc:
        log.warning("cell %s/%s/%s failed: %s", acc, q0, L0_mm, exc)
        return (acc, q0, L0_mm, float("nan"), 0, float("nan"), "error")


def run_sweep(cfg: RunConfig, cells, out: Path, jobs: int = 1) -> list[tuple]:
    """Invert every ``(accuracy, q0, L0_mm)`` cell; one synthetic truth per accuracy."""
    datasets = {}
    for acc in sorted({c[0] for c in cells}):
        spec = replace(cfg.synthesis, accuracy=acc)
        datasets[acc] = synthesize(spec, cfg.props)
        save_measurements(out / f"measurements_{acc:g}.csv", datasets[acc])
    tasks = [
        (cfg, datasets[acc], out / "cells" / f"{i:03d}", acc, q0, L0)
        for i, (acc, q0, L0) in enumerate(cells)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(t) for t in tasks]
    reports.write_sweep(out / "table.csv", rows)
    return rows


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    cells = reports.read_matrix(args.matrix)
    rows = run_sweep(cfg, cells, out, args.jobs)
    print(",".join(reports.SWEEP_COLUMNS))
    for r in rows:
        print(",".join(reports._fmt(v) for v in r))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tofinv", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="key = value config file")
        sp.add_argument("--out", help="output directory (default: [run] out)")
        sp.add_argument("--seed", type=int, help="override [run] seed")
        return sp

    s = common(sub.add_parser("simulate", help="synthesize a measurement set"))
    s.set_defaults(func=cmd_simulate)
    s = common(sub.add_parser("invert", help="reconstruct q(t) and L from measurements"))
    s.add_argument("--measurements", required=True)
    s.set_defaults(func=cmd_invert)
    s = common(sub.add_parser("gradcheck", help="adjoint vs finite-difference gradients"))
    s.add_argument("--corrupt-source", action="store_true", help=argparse.SUPPRESS)
    s.set_defaults(func=cmd_gradcheck)
    s = common(sub.add_parser("sweep", help="run an accuracy x q0 x L0 matrix"))
    s.add_argument("--matrix", required=True, help="CSV accuracy_s,q0,L0_mm")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (DivergedError, DomainError) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
