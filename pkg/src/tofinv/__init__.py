"""Joint recovery of surface heat flux and wall thickness from ultrasonic time of flight.

Submodules: ``model`` (data types), ``forward`` (heat solver and transit
time), ``adjoint`` (gradients), ``optimize`` (alternating CG / steepest
descent), ``measurement`` (synthesis and files) and ``cli``.
"""

from .model import STEEL_PROPS, MaterialProps, MeasurementSet, SimGrid, make_grid

__version__ = "0.1.0"

__all__ = ["STEEL_PROPS", "MaterialProps", "MeasurementSet", "SimGrid", "make_grid", "__version__"]
