"""Online convex optimization with time-varying constraints via virtual queues."""

from .bounds import ProblemConstants
from .errors import ConfigError, InputError, NumericalError, SequencingError
from .geometry import Ball, Box, Polytope
from .solver import AlgorithmParams, advance, decision_step, doubling_run, init, queue_update, zinkevich_step
from .streams import ConstraintSpec, ObjectiveSpec, ScenarioSpec, generate_slot

__version__ = "0.1.0"

__all__ = [
    "AlgorithmParams",
    "Ball",
    "Box",
    "ConfigError",
    "ConstraintSpec",
    "InputError",
    "NumericalError",
    "ObjectiveSpec",
    "Polytope",
    "ProblemConstants",
    "ScenarioSpec",
    "SequencingError",
    "advance",
    "decision_step",
    "doubling_run",
    "generate_slot",
    "init",
    "queue_update",
    "zinkevich_step",
]
