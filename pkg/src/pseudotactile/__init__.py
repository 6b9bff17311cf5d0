"""Pseudo-tactile gripper feedback for grasp-based imitation learning.

A kinematic grasping simulator (pick-and-lift, drawer, oven) with a
force-controlled gripper whose equilibrium angle tells an empty close from a
real grasp, a closed-loop controller that reopens on empty closes, admittance
control for articulated objects, a scripted expert, a nearest-neighbour
behaviour-cloning policy and the disturbance benchmark.
"""
from .admittance import AdmittanceParams, AdmittanceState, Wrench, admittance_step
from .bench import MetricsReport, RolloutResult, compute_metrics, run_ablation, run_benchmark
from .datagen import Dataset, Demonstration, collect, dataset_stats, load_dataset, save_dataset
from .expert import Stage, StagePlan, expert_rollout, plan_approach, plan_postgrasp
from .gripper import (
    CLOSE,
    OPEN,
    GraspCondition,
    GripperModel,
    GripperState,
    PseudoTactileSignal,
    classify_grasp_condition,
    step_gripper,
)
from .policy import ActionChunk, PolicyConfig, PolicyModel, fit, infer
from .se3 import Pose, Trajectory, compose, interpolate, inverse, slerp
from .tactile import ControllerConfig, TactileController, filter_command
from .world import (
    DisturbanceSchedule,
    Scene,
    StepObservation,
    Task,
    WorldConfig,
    apply_disturbance,
    check_success,
    reset,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "CLOSE",
    "OPEN",
    "ActionChunk",
    "AdmittanceParams",
    "AdmittanceState",
    "ControllerConfig",
    "Dataset",
    "Demonstration",
    "DisturbanceSchedule",
    "GraspCondition",
    "GripperModel",
    "GripperState",
    "MetricsReport",
    "PolicyConfig",
    "PolicyModel",
    "Pose",
    "PseudoTactileSignal",
    "RolloutResult",
    "Scene",
    "Stage",
    "StagePlan",
    "StepObservation",
    "TactileController",
    "Task",
    "Trajectory",
    "WorldConfig",
    "Wrench",
    "admittance_step",
    "apply_disturbance",
    "check_success",
    "classify_grasp_condition",
    "collect",
    "compose",
    "compute_metrics",
    "dataset_stats",
    "expert_rollout",
    "filter_command",
    "fit",
    "infer",
    "interpolate",
    "inverse",
    "load_dataset",
    "plan_approach",
    "plan_postgrasp",
    "reset",
    "run_ablation",
    "run_benchmark",
    "save_dataset",
    "slerp",
    "step",
    "step_gripper",
]
