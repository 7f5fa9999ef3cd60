"""Space-time tensor-train integration of linear ODE systems with conservation laws."""
from .chebyshev import ChebyshevGrid
from .integrator import (
    IntegrationError,
    IntegratorConfig,
    InvariantSpec,
    StepReport,
    Trajectory,
    exp_uniform_intervals,
    extract_state,
    picard_solve,
    propagate,
    tamen_interval,
)
from .spacetime import TimeAffineOperator
from .tt import TTOperator, TTVector

__all__ = [
    "ChebyshevGrid", "IntegrationError", "IntegratorConfig", "InvariantSpec", "StepReport",
    "TTOperator", "TTVector", "TimeAffineOperator", "Trajectory", "exp_uniform_intervals",
    "extract_state", "picard_solve", "propagate", "tamen_interval",
]
__version__ = "0.1.0"
