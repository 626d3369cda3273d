"""Corridor-constrained contouring MPC with seamless goal-pose docking."""

from dockmpc.model import ControlInput, ModelParams, VehicleState
from dockmpc.path import Corridor, GoalPose, ReferencePath, build_path
from dockmpc.weights import WeightConfig, WeightSchedule, build_schedule

__all__ = [
    "ControlInput",
    "Corridor",
    "GoalPose",
    "ModelParams",
    "ReferencePath",
    "VehicleState",
    "WeightConfig",
    "WeightSchedule",
    "build_path",
    "build_schedule",
]

__version__ = "0.1.0"
