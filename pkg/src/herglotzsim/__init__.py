"""Simulation of dissipative (Herglotz) mechanical systems with impacts and
constraints that switch on and off across the configuration space."""

from .constraints import (ConstraintSet, PointKind, Transition, TransitionCase, UnilateralConstraint,
                          classify_point, distribution_rank, rank_at, transition_case)
from .dynamics import Rates, constrained_rhs, free_rhs
from .errors import (DegenerateNormal, GrazingContact, HerglotzSimError, InconsistentInitialState,
                     InvalidTriple, NonPositiveDefinite, SingularConstraintMass, StepSizeUnderflow,
                     ZenoDetected)
from .geometry import MetricField, christoffel_at, gradient, metric_at
from .impacts import (EventKind, ImpulseAudit, activation_jump, activation_projector, carnot_check,
                      restitution_jump, unilateral_projectors)
from .lagrangian import MechanicalSystem, State, energy, kinetic_energy, lagrangian, potential_energy
from .simulator import (Guard, HybridTrajectory, IntegratorOptions, ReleaseGuard, Scenario, StopReason,
                        energy_ledger, integrate_segment, simulate)

__all__ = [
    "activation_jump", "activation_projector", "carnot_check", "christoffel_at", "classify_point",
    "constrained_rhs", "ConstraintSet", "DegenerateNormal", "distribution_rank", "energy",
    "energy_ledger", "EventKind", "free_rhs", "gradient", "GrazingContact", "Guard",
    "HerglotzSimError", "HybridTrajectory", "ImpulseAudit", "InconsistentInitialState",
    "integrate_segment", "IntegratorOptions", "InvalidTriple", "kinetic_energy", "lagrangian",
    "MechanicalSystem", "metric_at", "MetricField", "NonPositiveDefinite", "PointKind",
    "potential_energy", "rank_at", "Rates", "ReleaseGuard", "restitution_jump", "Scenario",
    "simulate", "SingularConstraintMass", "State", "StepSizeUnderflow", "StopReason", "Transition",
    "transition_case", "TransitionCase", "unilateral_projectors", "UnilateralConstraint",
    "ZenoDetected",
]

__version__ = "0.1.0"
