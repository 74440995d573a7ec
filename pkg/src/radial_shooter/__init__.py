"""Shooting laboratory for radial bound states of -Δu = f(u) in R^N.

Modules
-------
nonlinearity
    Model nonlinearities, their odd extensions and structural constants.
shooting
    Dense DOPRI5 integration of the radial initial value problem with events.
classify
    Nodal verdicts, alpha scans and bisection to bound states.
functionals
    The J operator on monotone arcs, energy, Pohozaev and Peletier-Serrin
    functionals, identity residuals and phase-plane checks.
experiments
    Limit sweeps over piecewise nonlinearities and bound-state counting.
cli
    Command-line front end.
"""

from .classify import (
    BoundStateRecord,
    Classification,
    classify_alpha,
    confirm_bound_state,
    find_boundary,
    locate_bound_state,
    scan_range,
)
from .nonlinearity import (
    PiecewiseA,
    PiecewiseMu,
    PowerDifference,
    PurePower,
    ShiftedPower,
    build_fa,
    build_fmu,
    make_nonlinearity,
    model_from_dict,
)
from .shooting import InitialCondition, ProblemParams, Trajectory, integrate, shoot

__version__ = "0.1.0"

__all__ = [
    "BoundStateRecord",
    "Classification",
    "InitialCondition",
    "PiecewiseA",
    "PiecewiseMu",
    "PowerDifference",
    "ProblemParams",
    "PurePower",
    "ShiftedPower",
    "Trajectory",
    "build_fa",
    "build_fmu",
    "classify_alpha",
    "confirm_bound_state",
    "find_boundary",
    "integrate",
    "locate_bound_state",
    "make_nonlinearity",
    "model_from_dict",
    "scan_range",
    "shoot",
]
