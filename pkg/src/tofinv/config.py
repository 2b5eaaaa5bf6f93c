"""Run configuration: a flat ``key = value`` file with sections.

Example::

    [material]
    rho = 7800
    c = 400
    k = 50
    a = -0.4521
    b = 3259.9

    [grid]
    tau = 500
    N = 500
    M = 100

    [initial]
    T0 = 26
    q0 = 0          # W/m^2, or a path to a t_s,q_W_per_m2 CSV
    L0_mm = 3

Every section except ``[material]`` is optional; unknown sections or keys
are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .measurement import SynthesisSpec
from .model import MaterialProps, ValidationError
from .optimize import ObjectiveConfig, WolfeConfig

_FLOAT, _INT, _STR, _BOOL = float, int, str, bool

SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "material": {k: (_FLOAT, None) for k in ("rho", "c", "k", "a", "b")},
    "grid": {"tau": (_FLOAT, 500.0), "N": (_INT, 500), "M": (_INT, 100)},
    "synthesis": {
        "true_q": (_STR, "1e5"),
        "true_L_mm": (_FLOAT, 50.0),
        "accuracy": (_FLOAT, 1e-10),
        "temp_noise": (_FLOAT, 0.0),
        "dither": (_BOOL, False),
        "fine_factor": (_INT, 2),
    },
    "objective": {
        "alpha": (_FLOAT, 1e-14),
        "crl": (_FLOAT, 5e-18),
        "n_max": (_INT, 500),
        "eps_stagnate": (_FLOAT, 1e-6),
        "alpha_decay": (_FLOAT, 10.0),
        "L_min_mm": (_FLOAT, 0.1),
        "L_max_mm": (_FLOAT, 1000.0),
        "trace_source": (_STR, "uniform"),
    },
    "wolfe": {
        "rho": (_FLOAT, 0.25),
        "sigma": (_FLOAT, 0.75),
        "max_bisections": (_INT, 60),
        "max_relative_step": (_FLOAT, 0.5),
    },
    "initial": {"T0": (_FLOAT, 26.0), "q0": (_STR, "0"), "L0_mm": (_FLOAT, 3.0)},
    "gradcheck": {
        "M": (_INT, 20),
        "N": (_INT, 20),
        "alpha": (_FLOAT, 0.0),
        "configs": (_INT, 20),
        "tolerance": (_FLOAT, 1e-3),
    },
    "run": {"seed": (_INT, 0), "out": (_STR, "out")},
}


@dataclass(frozen=True)
class GradcheckConfig:
    M: int = 20
    N: int = 20
    alpha: float = 0.0
    configs: int = 20
    tolerance: float = 1e-3


@dataclass(frozen=True)
class RunConfig:
    props: MaterialProps
    tau: float
    N: int
    M: int
    T0: float
    synthesis: SynthesisSpec
    objective: ObjectiveConfig
    wolfe: WolfeConfig
    max_relative_step: float
    q0: object
    L0: float
    gradcheck: GradcheckConfig = field(default_factory=GradcheckConfig)
    seed: int = 0
    out: Path = Path("out")

    def q0_array(self) -> np.ndarray:
        if np.ndim(self.q0) == 0:
            return np.full(self.N + 1, float(self.q0))
        q = np.asarray(self.q0, dtype=float)
        if q.size != self.N + 1:
            raise ValidationError("q0", f"table has {q.size} samples, grid needs {self.N + 1}")
        return q


def _convert(section: str, key: str, raw: str, kind: type):
    try:
        if kind is _BOOL:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is _INT:
            value = float(raw)
            if not value.is_integer():
                raise ValueError(raw)
            return int(value)
        return kind(raw.strip())
    except ValueError:
        raise ValidationError(key, f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from None


def _flux_source(text: str, base: Path, key: str):
    try:
        return float(text)
    except ValueError:
        pass
    path = Path(text)
    if not path.is_absolute():
        path = base / path
    from .reports import read_flux

    return read_flux(path)[1]


def read_config(text: str, base: Path = Path("."), overrides: dict | None = None) -> dict[str, dict[str, object]]:
    """Parse and type-check config text; returns ``{section: {key: value}}`` with defaults filled."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError("config", str(exc).splitlines()[0]) from None
    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ValidationError(section, f"unknown section [{section}]")
    for section, keys in SCHEMA.items():
        got = dict(parser[section]) if parser.has_section(section) else {}
        for key in got:
            if key not in keys:
                raise ValidationError(key, f"unknown key {key!r} in [{section}]")
        sec = {}
        for key, (kind, default) in keys.items():
            if key in got:
                sec[key] = _convert(section, key, got[key], kind)
            elif default is None:
                raise ValidationError(key, f"missing required key {key!r} in [{section}]")
            else:
                sec[key] = default
        values[section] = sec
    for (section, key), value in (overrides or {}).items():
        values[section][key] = value
    return values


def build_run_config(values: dict, base: Path = Path(".")) -> RunConfig:
    """Validate every field through its owning type before anything is solved."""
    mat, grid, syn, obj, wolfe = (values[s] for s in ("material", "grid", "synthesis", "objective", "wolfe"))
    init, gc, run = values["initial"], values["gradcheck"], values["run"]
    props = MaterialProps(**mat)
    from .model import make_grid

    make_grid(syn["true_L_mm"] * 1e-3, grid["tau"], grid["M"], grid["N"])
    true_q = _flux_source(syn["true_q"], base, "true_q")
    spec = SynthesisSpec(
        true_q=true_q if np.ndim(true_q) == 0 else tuple(true_q),
        true_L=syn["true_L_mm"] * 1e-3,
        T0=init["T0"],
        accuracy=syn["accuracy"],
        temp_noise=syn["temp_noise"],
        dither=syn["dither"],
        seed=run["seed"],
        tau=grid["tau"],
        N=grid["N"],
        M=grid["M"],
        fine_factor=syn["fine_factor"],
    )
    objective = ObjectiveConfig(
        alpha=obj["alpha"],
        crl=obj["crl"],
        n_max=obj["n_max"],
        eps_stagnate=obj["eps_stagnate"],
        alpha_decay=obj["alpha_decay"],
        L_min=obj["L_min_mm"] * 1e-3,
        L_max=obj["L_max_mm"] * 1e-3,
        trace_source=obj["trace_source"],
    )
    wolfe_cfg = WolfeConfig(rho=wolfe["rho"], sigma=wolfe["sigma"], max_bisections=wolfe["max_bisections"])
    if not 0 < wolfe["max_relative_step"] <= 1:
        raise ValidationError("max_relative_step", "must lie in (0, 1]")
    if not init["L0_mm"] > 0:
        raise ValidationError("L0_mm", f"must be > 0, got {init['L0_mm']!r}")
    if not gc["M"] >= 2 or not gc["N"] >= 1 or gc["M"] > 40 or gc["N"] > 40:
        raise ValidationError("gradcheck", "gradient check grid must satisfy 2 <= M <= 40, 1 <= N <= 40")
    cfg = RunConfig(
        props=props,
        tau=grid["tau"],
        N=grid["N"],
        M=grid["M"],
        T0=init["T0"],
        synthesis=spec,
        objective=objective,
        wolfe=wolfe_cfg,
        max_relative_step=wolfe["max_relative_step"],
        q0=_flux_source(init["q0"], base, "q0"),
        L0=init["L0_mm"] * 1e-3,
        gradcheck=GradcheckConfig(**gc),
        seed=run["seed"],
        out=Path(run["out"]),
    )
    cfg.q0_array()
    return cfg


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    return build_run_config(read_config(path.read_text(), path.parent, overrides), path.parent)
