"""Path planning and synchronized control for two quadrotors carrying a hanging rope."""

from .catenary import CatenaryParams, PlaneFrame, fit_catenary, solve_catenary_ratio
from .formation import FormationState, VehiclePair, compose, decompose, interpolate
from .vbody import VBodyConfig, body_for_state

__version__ = "0.1.0"

__all__ = [
    "CatenaryParams", "PlaneFrame", "fit_catenary", "solve_catenary_ratio",
    "FormationState", "VehiclePair", "compose", "decompose", "interpolate",
    "VBodyConfig", "body_for_state",
]
