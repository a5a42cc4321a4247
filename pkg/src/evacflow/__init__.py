"""Crowd evacuation on 2-D floor plans.

A regularized eikonal potential routes pedestrians to the exits; the
crowd density then follows a scalar conservation law along that routing
field, and individual paths follow its streamlines.
"""

__version__ = "0.1.0"

from .elliptic import EllipticParams, PotentialSolution, exit_flux_report, solve_u  # noqa: E402
from .errors import (  # noqa: E402
    EvacflowError,
    ScenarioSyntaxError,
    SolverError,
    StabilityError,
    ValidationError,
)
from .field import RoutingField, build_routing_field, regularized_normalize  # noqa: E402
from .geometry import Grid, build_grid  # noqa: E402
from .hyperbolic import DensityState, SpeedLaw, evolve, step  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .scenario import Scenario, emit_scenario, load_scenario, parse_scenario  # noqa: E402
from .trajectory import PathTracer, evacuation_map  # noqa: E402

__all__ = [
    "BACKEND", "DensityState", "EllipticParams", "EvacflowError", "Grid", "PathTracer",
    "PotentialSolution", "RoutingField", "Scenario", "ScenarioSyntaxError", "SolverError",
    "SpeedLaw", "StabilityError", "ValidationError", "build_grid", "build_routing_field",
    "emit_scenario", "evacuation_map", "evolve", "exit_flux_report", "load_scenario",
    "parse_scenario", "regularized_normalize", "solve_u", "step",
]
