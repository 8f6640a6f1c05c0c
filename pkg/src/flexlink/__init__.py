"""Single flexible link: modal model, tracking/force control and simulation."""

from ._validation import ConfigurationError, DivergenceError, DomainError
from .beam import BeamParams, ModalBasis, ModalConstants, solve_characteristic_roots
from .contact import ContactForce, Environment, contact_force, reaction_torque
from .control import (
    ForceLoopState,
    JointReference,
    TrackingController,
    cartesian_to_joint_reference,
    force_outer_update,
    lyapunov_value,
    tracking_control,
)
from .dynamics import dynamics_matrices, make_state, state_derivative, total_energy
from .kinematics import PlanarPoint, deflection, jacobian, tip_position
from .simulation import SimConfig, SimLog, rk4_step, run_scenario, summarize, sweep

__all__ = [
    "BeamParams",
    "ConfigurationError",
    "ContactForce",
    "DivergenceError",
    "DomainError",
    "Environment",
    "ForceLoopState",
    "JointReference",
    "ModalBasis",
    "ModalConstants",
    "PlanarPoint",
    "SimConfig",
    "SimLog",
    "TrackingController",
    "cartesian_to_joint_reference",
    "contact_force",
    "deflection",
    "dynamics_matrices",
    "force_outer_update",
    "jacobian",
    "lyapunov_value",
    "make_state",
    "reaction_torque",
    "rk4_step",
    "run_scenario",
    "solve_characteristic_roots",
    "state_derivative",
    "summarize",
    "sweep",
    "tip_position",
    "total_energy",
    "tracking_control",
]
