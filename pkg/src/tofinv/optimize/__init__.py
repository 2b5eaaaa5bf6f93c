from .driver import (
    TRAJECTORY_COLUMNS,
    DivergedError,
    InversionResult,
    InversionState,
    IterationRecord,
    alternate,
    cg_step_q,
    sd_step_L,
)
from .linesearch import (
    CgState,
    DegenerateDirection,
    GradientVanished,
    NotADescentDirection,
    WolfeConfig,
    WolfeResult,
    cg_direction,
    exact_step_q,
    prp_coefficient,
    wolfe_powell,
)
from .objective import Evaluation, InverseProblem, ObjectiveConfig, evaluate, objective
