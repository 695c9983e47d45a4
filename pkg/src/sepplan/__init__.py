"""Trajectory planning with smooth set-separation constraints.

The library builds nonlinear programs for parking and overtaking problems
where vehicle bodies, obstacles, and the drivable region are convex sets.
Collision avoidance enters either through explicit separating planes or
through face-multiplier certificates, both exactly once differentiable, so
a standard smooth solver applies.  A geometric layer certifies solutions
independently of the formulation that produced them.
"""

from .baseline_dual import FormulationKind, UnsupportedCombinationError
from .dynamics import VehicleModelParams, VehicleState
from .geometry import Ellipsoid, GeometryError, Polytope, Pose
from .initializer import InitializationError, assemble_guess
from .ocp import (
    BodyPart,
    Obstacle,
    Scenario,
    TranscriptionError,
    build,
    count_variables,
    unpack_controls,
    unpack_pair_aux,
    unpack_states,
    unpack_tf,
)
from .scenario_io import (
    ScenarioFormatError,
    load_scenario,
    parse_scenario,
    save_scenario,
    scenario_to_dict,
)
from .solver import SolverOptions, SolveStatus, Solution, solve
from .verification import (
    CertificationReport,
    certify_trajectory,
    oracle_contained,
    oracle_disjoint,
)

__all__ = [
    "BodyPart",
    "CertificationReport",
    "Ellipsoid",
    "FormulationKind",
    "GeometryError",
    "InitializationError",
    "Obstacle",
    "Polytope",
    "Pose",
    "Scenario",
    "ScenarioFormatError",
    "Solution",
    "SolveStatus",
    "SolverOptions",
    "TranscriptionError",
    "UnsupportedCombinationError",
    "VehicleModelParams",
    "VehicleState",
    "assemble_guess",
    "build",
    "certify_trajectory",
    "count_variables",
    "load_scenario",
    "oracle_contained",
    "oracle_disjoint",
    "parse_scenario",
    "save_scenario",
    "scenario_to_dict",
    "solve",
    "unpack_controls",
    "unpack_pair_aux",
    "unpack_states",
    "unpack_tf",
]

__version__ = "0.1.0"
