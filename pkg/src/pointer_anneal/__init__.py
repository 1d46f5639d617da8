"""Simulation of a collective two-state measurement driven by annealing a
pointer qubit through a sequence of short qubit-pointer interactions."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Case,
    ConvergenceError,
    InvalidParameterError,
    PointerDensity,
    QubitPureState,
    ResourceError,
    SimParams,
    StateKind,
    coupling_at,
    make_state,
    overlap_collective,
    scaling_lambda,
)
from .collision import RunResult, run, run_case_psi_via_symmetry  # noqa: E402

__all__ = [
    "Case",
    "ConvergenceError",
    "InvalidParameterError",
    "PointerDensity",
    "QubitPureState",
    "ResourceError",
    "RunResult",
    "SimParams",
    "StateKind",
    "coupling_at",
    "make_state",
    "overlap_collective",
    "run",
    "run_case_psi_via_symmetry",
    "scaling_lambda",
]
