"""Privileged scripted expert.

Stage machine ``PRE_GRASP -> GRASP -> POST_GRASP`` driven by object-centric
key poses: targets are defined in the object frame and mapped to the world
with ``T_WE = T_WO @ T_OK``. The expert reads the simulator's grasp condition
directly; after an empty close it backs off to the pre-grasp pose and tries
again.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .gripper import CLOSE, OPEN, GraspCondition
from .se3 import (
    Pose,
    Trajectory,
    compose,
    interpolate,
    inverse,
    quat_from_axis_angle,
    quat_mul,
    quat_rotate,
)
from .tactile import ControllerConfig, TactileController
from .world import (
    DisturbanceSchedule,
    Scene,
    StepObservation,
    Task,
    TraceRecord,
    WorkspaceFault,
    apply_disturbance,
    check_success,
    observe,
    step,
)

APPROACH_SPEED = (0.2, 1.0)  # m/s, rad/s
FINAL_SPEED = (0.1, 1.0)
POST_SPEED = (0.15, 1.0)
PREGRASP_BACKOFF = 0.08
LIFT_DISTANCE = 0.20
PULL_DISTANCE = 0.25
ARC_SWEEP = math.radians(75.0)
ARC_STEP = math.radians(2.0)


class PlanningError(RuntimeError):
    """A key pose is unreachable; the rollout is discarded."""


class Stage(enum.Enum):
    PRE_GRASP = "pregrasp"
    GRASP = "grasp"
    POST_GRASP = "postgrasp"


@dataclass(frozen=True)
class StagePlan:
    stage: Stage
    key_pose_pregrasp: Pose
    key_pose_grasp: Pose

    def __post_init__(self):
        # pre-grasp must sit behind the grasp pose along the approach axis
        rel = compose(inverse(self.key_pose_grasp), self.key_pose_pregrasp)
        if -rel.translation[2] < 0.05 - 1e-12:
            raise ValueError("pre-grasp key pose must be backed off >= 0.05 m along the approach axis")


def default_plan(scene: Scene, backoff: float = PREGRASP_BACKOFF) -> StagePlan:
    """Key poses in the object frame for ``scene``'s task."""
    grasp = compose(scene.grasp_point, Pose((0.0, 0.0, 0.0), scene.approach_rotation))
    pre = compose(grasp, Pose((0.0, 0.0, -backoff)))
    return StagePlan(Stage.PRE_GRASP, pre, grasp)


def _part_frame(scene: Scene) -> Pose:
    """Frame in which key poses are expressed: the moving part at rest."""
    if scene.joint_axis_true is None:
        return scene.object_pose
    return compose(scene.object_pose, scene.joint_axis_nominal.part_transform(0.0))


def key_poses_world(scene: Scene, plan: StagePlan | None = None) -> tuple[Pose, Pose]:
    plan = plan or default_plan(scene)
    frame = _part_frame(scene)
    pre = compose(frame, plan.key_pose_pregrasp)
    grasp = compose(frame, plan.key_pose_grasp)
    lim = scene.config.workspace
    for p in (pre, grasp):
        if any(abs(c) > lim for c in p.translation):
            raise PlanningError(f"key pose {p} outside the workspace")
    return pre, grasp


def approach_legs(scene: Scene, plan: StagePlan | None = None,
                  start: Pose | None = None) -> tuple[Trajectory, Trajectory]:
    dt = scene.config.dt
    pre, grasp = key_poses_world(scene, plan)
    start = scene.ee_pose if start is None else start
    leg1 = interpolate(start, pre, dt, *APPROACH_SPEED)
    leg2 = interpolate(pre, grasp, dt, *FINAL_SPEED)
    return leg1, leg2


def plan_approach(scene: Scene, plan: StagePlan | None = None) -> Trajectory:
    """Current pose -> pre-grasp -> grasp; close is commanded on the last waypoint."""
    leg1, leg2 = approach_legs(scene, plan)
    return leg1.then(leg2)


def grasp_step_index(scene: Scene, plan: StagePlan | None = None) -> int:
    """Control step at which the nominal plan commands close."""
    return len(plan_approach(scene, plan)) - 2


def plan_postgrasp(scene: Scene, plan: StagePlan | None = None) -> Trajectory:
    if not scene.attachment.active:
        raise PlanningError("post-grasp motion needs an active attachment")
    dt = scene.config.dt
    _, start = key_poses_world(scene, plan)
    tx, ty, tz = start.translation
    if scene.task is Task.PICK_AND_LIFT:
        end = Pose((tx, ty, tz + LIFT_DISTANCE), start.rotation)
        return interpolate(start, end, dt, *POST_SPEED)
    axis = scene.joint_axis_nominal
    rot = scene.object_pose.rotation
    if scene.task is Task.DRAWER_OPENING:
        dx, dy, dz = quat_rotate(rot, axis.direction)
        end = Pose((tx + PULL_DISTANCE * dx, ty + PULL_DISTANCE * dy, tz + PULL_DISTANCE * dz), start.rotation)
        return interpolate(start, end, dt, *POST_SPEED)
    # oven: rigid rotation of the grasp pose about the nominal hinge
    c = scene.object_pose.apply(axis.point)
    a = quat_rotate(rot, axis.direction)
    r0 = (tx - c[0], ty - c[1], tz - c[2])
    n = math.ceil(ARC_SWEEP / ARC_STEP - 1e-9)
    poses = [start]
    for k in range(1, n + 1):
        q = quat_from_axis_angle(a, ARC_SWEEP * k / n)
        rx, ry, rz = quat_rotate(q, r0)
        poses.append(Pose((c[0] + rx, c[1] + ry, c[2] + rz), quat_mul(q, start.rotation)))
    return Trajectory(tuple(poses), dt)


@dataclass(frozen=True)
class DemoStep:
    """Observation before the step and the expert's action for it."""

    observation: StepObservation
    target: Pose
    command: int
    stage: Stage


@dataclass
class ExpertRollout:
    success: bool
    steps: list = field(default_factory=list)
    records: list = field(default_factory=list)
    override_steps: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    fault: str | None = None

    @property
    def trace(self) -> list[TraceRecord]:
        return self.records

    def __iter__(self):
        # allows ``trace, success = expert_rollout(...)``
        return iter((self.records, self.success))


def expert_rollout(scene: Scene, controller_config: ControllerConfig | None = None,
                   disturbance: DisturbanceSchedule | None = None,
                   plan: StagePlan | None = None) -> ExpertRollout:
    """Run the expert on ``scene`` until success or timeout."""
    scene.controller = TactileController(controller_config)
    leg1, leg2 = approach_legs(scene, plan)
    traj = leg1.then(leg2)
    pre_idx = len(leg1) - 1
    stage = Stage.PRE_GRASP
    i = 0
    post = None
    j = 0
    out = ExpertRollout(success=False)
    obs = observe(scene)
    for k in range(scene.config.max_steps):
        cond = scene.grasp_condition
        if stage is not Stage.POST_GRASP:
            if cond is GraspCondition.EMPTY_CLOSE:
                leg1, leg2 = approach_legs(scene, plan)
                traj = leg1.then(leg2)
                pre_idx = len(leg1) - 1
                i = 0
                stage = Stage.PRE_GRASP
            elif cond is GraspCondition.GRASP_CLOSE:
                post = plan_postgrasp(scene, plan)
                stage = Stage.POST_GRASP
                j = 0
        if stage is Stage.POST_GRASP:
            j = min(j + 1, len(post) - 1)
            target, command = post[j], CLOSE
        else:
            i = min(i + 1, len(traj) - 1)
            target = traj[i]
            if i > pre_idx:
                stage = Stage.GRASP
            command = CLOSE if i == len(traj) - 1 else OPEN
        out.steps.append(DemoStep(obs, target, command, stage))
        out.stages.append(stage)
        applied = apply_disturbance(disturbance, k, command)
        try:
            _, obs, _ = step(scene, target, applied)
        except WorkspaceFault as exc:
            out.fault = str(exc)
            break
        out.records.append(scene.last_record)
        if check_success(scene):
            out.success = True
            break
    out.override_steps = list(scene.controller.override_steps)
    return out
