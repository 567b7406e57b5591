"""Constrained growth simulation for tree stems and vines."""

__version__ = "0.1.0"

from .config import SeedCurve, SimConfig, config_from_dict, config_to_dict, load_config
from .curves import (
    ArclengthGrid,
    TangentField,
    cumulative_angular_velocity,
    integrate_tangents,
    rodrigues,
    rotate_vectors,
)
from .diagnostics import (
    audit_state,
    gronwall_certificate,
    minimal_rotation,
    rotation_field,
    weighted_norm,
)
from .growth import GrowthLaw, eval_psi, psi_field
from .obstacles import Cylinder, HalfSpace, Scene, Sphere, outer_normal, signed_distance
from .reaction import (
    ContactSet,
    ConstraintSystem,
    ReactionSolution,
    assemble_constraints,
    detect_contacts,
    oracle_solve_reaction,
    reaction_velocity,
    solve_reaction,
)
from .stepper import StemState, detect_breakdown, init_state, run, step, twin_run
from .trajectory import Event, Trajectory, TrajectoryFrame

__all__ = [
    "ArclengthGrid",
    "ContactSet",
    "ConstraintSystem",
    "Cylinder",
    "Event",
    "GrowthLaw",
    "HalfSpace",
    "ReactionSolution",
    "Scene",
    "SeedCurve",
    "SimConfig",
    "Sphere",
    "StemState",
    "TangentField",
    "Trajectory",
    "TrajectoryFrame",
    "assemble_constraints",
    "audit_state",
    "config_from_dict",
    "config_to_dict",
    "cumulative_angular_velocity",
    "detect_breakdown",
    "detect_contacts",
    "eval_psi",
    "gronwall_certificate",
    "init_state",
    "integrate_tangents",
    "load_config",
    "minimal_rotation",
    "oracle_solve_reaction",
    "outer_normal",
    "psi_field",
    "reaction_velocity",
    "rodrigues",
    "rotate_vectors",
    "rotation_field",
    "run",
    "signed_distance",
    "solve_reaction",
    "step",
    "twin_run",
    "weighted_norm",
]
