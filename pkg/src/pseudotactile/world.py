"""Kinematic simulation of the three grasp tasks.

* pick: a free block lifted off the table,
* drawer: a handle on a prismatic joint pulled out of a cabinet,
* oven: a door handle on a revolute joint pulled down about a hinge whose
  true position is offset from the nominal one.

The end effector is position controlled through the admittance filter; an
articulated object that is held pushes back on the end effector with a
stiffness ``constraint_gain`` times the part of the motion that its joint
cannot follow. The gripper only accepts a new command once it has settled,
so a forced close always runs to its equilibrium.

World frame: ``x`` away from the robot, ``z`` up, table top at ``z = 0``.
End-effector frame: ``z`` is the approach axis.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .admittance import (
    ZERO_WRENCH,
    AdmittanceParams,
    AdmittanceState,
    Wrench,
    admittance_step,
    offset_pose,
)
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
from .se3 import Pose, compose, inverse, quat_from_axis_angle, quat_rotate
from .tactile import ControllerConfig, TactileController


class WorkspaceFault(RuntimeError):
    """Commanded pose left the workspace; the rollout counts as failed."""


class Task(enum.Enum):
    PICK_AND_LIFT = "pick"
    DRAWER_OPENING = "drawer"
    OVEN_OPENING = "oven"

    @classmethod
    def parse(cls, value) -> Task:
        if isinstance(value, Task):
            return value
        aliases = {
            "pick": cls.PICK_AND_LIFT,
            "pick-and-lift": cls.PICK_AND_LIFT,
            "pickandlift": cls.PICK_AND_LIFT,
            "drawer": cls.DRAWER_OPENING,
            "drawer-opening": cls.DRAWER_OPENING,
            "draweropening": cls.DRAWER_OPENING,
            "oven": cls.OVEN_OPENING,
            "oven-opening": cls.OVEN_OPENING,
            "ovenopening": cls.OVEN_OPENING,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown task {value!r}; expected pick, drawer or oven") from None


ALL_TASKS = (Task.PICK_AND_LIFT, Task.DRAWER_OPENING, Task.OVEN_OPENING)

# end effector approaching along world -z (top-down grasp)
TOP_DOWN = quat_from_axis_angle((1.0, 0.0, 0.0), math.pi)
# end effector approaching along object +x, fingers closing along y
FRONTAL = Pose.from_matrix(np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])).rotation


@dataclass(frozen=True)
class JointAxis:
    """Joint of an articulated part, expressed in the object frame."""

    kind: str  # "prismatic" or "revolute"
    point: tuple
    direction: tuple
    lower: float
    upper: float

    def part_transform(self, q: float) -> Pose:
        """Pose of the moving part relative to the object frame at joint value ``q``."""
        dx, dy, dz = self.direction
        if self.kind == "prismatic":
            return Pose((dx * q, dy * q, dz * q))
        rot = quat_from_axis_angle(self.direction, q)
        cx, cy, cz = self.point
        rx, ry, rz = quat_rotate(rot, self.point)
        return Pose((cx - rx, cy - ry, cz - rz), rot)

    def project(self, p, rest) -> tuple[float, tuple]:
        """Joint value reached by dragging the handle to ``p`` (object frame).

        ``rest`` is the handle position at ``q = 0``. Returns the clamped
        joint value and the handle position it implies.
        """
        dx, dy, dz = self.direction
        if self.kind == "prismatic":
            q = (p[0] - rest[0]) * dx + (p[1] - rest[1]) * dy + (p[2] - rest[2]) * dz
            q = min(max(q, self.lower), self.upper)
            return q, (rest[0] + dx * q, rest[1] + dy * q, rest[2] + dz * q)
        cx, cy, cz = self.point
        ux, uy, uz = rest[0] - cx, rest[1] - cy, rest[2] - cz
        vx, vy, vz = p[0] - cx, p[1] - cy, p[2] - cz
        # remove axial components
        ua = ux * dx + uy * dy + uz * dz
        ux, uy, uz = ux - ua * dx, uy - ua * dy, uz - ua * dz
        va = vx * dx + vy * dy + vz * dz
        vx, vy, vz = vx - va * dx, vy - va * dy, vz - va * dz
        cross = (uy * vz - uz * vy) * dx + (uz * vx - ux * vz) * dy + (ux * vy - uy * vx) * dz
        dot = ux * vx + uy * vy + uz * vz
        q = math.atan2(cross, dot)
        q = min(max(q, self.lower), self.upper)
        h = self.part_transform(q).apply(rest)
        return q, h


@dataclass(frozen=True)
class TaskLayout:
    object_pose: Pose
    grasp_point: Pose
    approach_rotation: tuple
    object_width: float
    ee_start: Pose
    joint: JointAxis | None = None


def task_layout(task: Task) -> TaskLayout:
    """Nominal (un-randomised) geometry of ``task``."""
    task = Task.parse(task)
    if task is Task.PICK_AND_LIFT:
        return TaskLayout(
            object_pose=Pose((0.5, 0.0, 0.02)),
            grasp_point=Pose(),
            approach_rotation=TOP_DOWN,
            object_width=0.04,
            ee_start=Pose((0.4, 0.0, 0.30), TOP_DOWN),
        )
    if task is Task.DRAWER_OPENING:
        return TaskLayout(
            object_pose=Pose((0.65, 0.0, 0.25)),
            grasp_point=Pose((-0.03, 0.0, 0.0)),
            approach_rotation=FRONTAL,
            object_width=0.02,
            ee_start=Pose((0.35, 0.0, 0.30), FRONTAL),
            joint=JointAxis("prismatic", (0.0, 0.0, 0.0), (-1.0, 0.0, 0.0), 0.0, 0.3),
        )
    return TaskLayout(
        object_pose=Pose((0.6, 0.0, 0.15)),
        grasp_point=Pose((0.0, 0.0, 0.35)),
        approach_rotation=FRONTAL,
        object_width=0.025,
        ee_start=Pose((0.35, 0.0, 0.45), FRONTAL),
        joint=JointAxis("revolute", (0.0, 0.0, 0.0), (0.0, -1.0, 0.0), 0.0, math.pi / 2),
    )


@dataclass(frozen=True)
class WorldConfig:
    dt: float = 0.05
    gripper: GripperModel = field(default_factory=GripperModel)
    admittance: AdmittanceParams = field(default_factory=AdmittanceParams)
    admittance_enabled: bool = True
    substeps: int = 10
    constraint_gain: float = 2000.0
    hinge_offset: float = 0.01
    planar_range: float = 0.10
    yaw_range: float = math.radians(15.0)
    start_range: float = 0.05
    workspace: float = 1.5
    capture_radius: float = 0.02
    success_hold: int = 10
    timeout: float = 30.0
    lift_height: float = 0.15
    drawer_open: float = 0.20
    oven_open: float = math.radians(60.0)

    @property
    def max_steps(self) -> int:
        return int(round(self.timeout / self.dt))

    @classmethod
    def canonical(cls, **kwargs) -> WorldConfig:
        """Configuration with every randomisation range set to zero."""
        return cls(planar_range=0.0, yaw_range=0.0, start_range=0.0, **kwargs)


@dataclass(frozen=True)
class Attachment:
    active: bool = False
    grasp_offset: Pose = field(default_factory=Pose)


@dataclass(frozen=True)
class DisturbanceSchedule:
    enabled: bool = False
    trigger_step: int = -1


NO_DISTURBANCE = DisturbanceSchedule()


def apply_disturbance(schedule: DisturbanceSchedule | None, step_index: int, policy_gripper_command: int) -> int:
    if schedule is not None and schedule.enabled and step_index == schedule.trigger_step:
        return CLOSE
    return policy_gripper_command


def sample_disturbance(rng: np.random.Generator, grasp_step: int) -> DisturbanceSchedule:
    """Trigger drawn uniformly from the middle half of the nominal approach.

    ``grasp_step`` is the control step at which the nominal plan commands
    close; the trigger always falls strictly before it.
    """
    lo = max(1, grasp_step // 4)
    hi = max(lo + 1, math.ceil(3 * grasp_step / 4))
    hi = min(hi, grasp_step)
    if lo >= hi:
        raise ValueError(f"approach of {grasp_step} steps is too short to disturb")
    return DisturbanceSchedule(True, int(rng.integers(lo, hi)))


@dataclass(frozen=True)
class StepObservation:
    ee_pose: Pose
    binary_gripper: int
    object_pose: Pose
    grasp_pose: Pose
    joint_value: float
    sim_time: float

    def features(self) -> np.ndarray:
        """Raw 11-d feature: EE position, EE quaternion, grasp point in EE frame, gripper bit."""
        ee = self.ee_pose
        w, x, y, z = ee.rotation
        gx = self.grasp_pose.translation[0] - ee.translation[0]
        gy = self.grasp_pose.translation[1] - ee.translation[1]
        gz = self.grasp_pose.translation[2] - ee.translation[2]
        rel = quat_rotate((w, -x, -y, -z), (gx, gy, gz))
        return np.array(ee.translation + ee.rotation + rel + (float(self.binary_gripper),))

    def to_list(self) -> list:
        return (
            self.ee_pose.to_list()
            + [self.binary_gripper]
            + self.object_pose.to_list()
            + self.grasp_pose.to_list()
            + [self.joint_value, self.sim_time]
        )

    @classmethod
    def from_list(cls, v) -> StepObservation:
        return cls(
            Pose.from_array(v[0:7]),
            int(v[7]),
            Pose.from_array(v[8:15]),
            Pose.from_array(v[15:22]),
            float(v[22]),
            float(v[23]),
        )


@dataclass(frozen=True)
class TraceRecord:
    """One simulated control step, written as one line of a rollout trace."""

    step: int
    sim_time: float
    ee_pose: Pose
    gripper_angle: float
    gripper_command: int
    at_equilibrium: bool
    binary_gripper: int
    object_pose: Pose
    joint_value: float
    wrench: Wrench
    override: bool
    attached: bool

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "t": self.sim_time,
            "ee": self.ee_pose.to_list(),
            "gripper": [self.gripper_angle, self.gripper_command, int(self.at_equilibrium)],
            "obs": self.binary_gripper,
            "object": self.object_pose.to_list(),
            "joint": self.joint_value,
            "wrench": list(self.wrench.force + self.wrench.torque),
            "override": int(self.override),
            "attached": int(self.attached),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


@dataclass
class Scene:
    task: Task
    object_pose: Pose
    joint_value: float
    joint_axis_nominal: JointAxis | None
    joint_axis_true: JointAxis | None
    grasp_point: Pose
    object_width: float
    rng_seed: int
    config: WorldConfig
    spawn_pose: Pose
    ee_pose: Pose
    approach_rotation: tuple
    gripper: GripperState = field(default_factory=GripperState)
    contact_width: float | None = None
    signal: PseudoTactileSignal | None = None
    attachment: Attachment = field(default_factory=Attachment)
    compliance: AdmittanceState = field(default_factory=AdmittanceState)
    controller: TactileController = field(default_factory=TactileController)
    step_index: int = 0
    success_streak: int = 0
    ever_attached: bool = False
    last_record: TraceRecord | None = None

    @property
    def sim_time(self) -> float:
        return self.step_index * self.config.dt

    def part_pose(self, nominal: bool = False) -> Pose:
        """World pose of the part carrying the grasp point."""
        axis = self.joint_axis_nominal if nominal else self.joint_axis_true
        if axis is None:
            return self.object_pose
        return compose(self.object_pose, axis.part_transform(self.joint_value))

    def grasp_pose(self) -> Pose:
        return compose(self.part_pose(), self.grasp_point)

    @property
    def grasp_condition(self) -> GraspCondition:
        g = self.gripper
        if g.command == CLOSE and g.at_equilibrium and self.signal is not None:
            return classify_grasp_condition(self.signal, CLOSE)
        return GraspCondition.EMPTY_OPEN

    def success_quantity(self) -> float:
        if self.task is Task.PICK_AND_LIFT:
            return self.object_pose.translation[2] - self.spawn_pose.translation[2]
        return self.joint_value

    def success_threshold(self) -> float:
        cfg = self.config
        return {
            Task.PICK_AND_LIFT: cfg.lift_height,
            Task.DRAWER_OPENING: cfg.drawer_open,
            Task.OVEN_OPENING: cfg.oven_open,
        }[self.task]


def reset(task, seed: int, config: WorldConfig | None = None,
          controller: ControllerConfig | None = None) -> Scene:
    """Fresh scene with object and robot start poses randomised from ``seed``."""
    task = Task.parse(task)
    cfg = config or WorldConfig()
    layout = task_layout(task)
    rng = np.random.default_rng(seed)
    dx, dy = rng.uniform(-1.0, 1.0, 2) * cfg.planar_range
    yaw = rng.uniform(-1.0, 1.0) * cfg.yaw_range
    start = rng.uniform(-1.0, 1.0, 3) * cfg.start_range

    ox, oy, oz = layout.object_pose.translation
    object_pose = Pose((ox + dx, oy + dy, oz), quat_from_axis_angle((0.0, 0.0, 1.0), yaw))
    sx, sy, sz = layout.ee_start.translation
    ee_start = Pose((sx + start[0], sy + start[1], sz + start[2]), layout.ee_start.rotation)

    true_axis = layout.joint
    if layout.joint is not None and layout.joint.kind == "revolute":
        px, py, pz = layout.joint.point
        true_axis = replace(layout.joint, point=(px, py, pz - cfg.hinge_offset))

    return Scene(
        task=task,
        object_pose=object_pose,
        joint_value=0.0,
        joint_axis_nominal=layout.joint,
        joint_axis_true=true_axis,
        grasp_point=layout.grasp_point,
        object_width=layout.object_width,
        rng_seed=int(seed),
        config=cfg,
        spawn_pose=object_pose,
        ee_pose=ee_start,
        approach_rotation=layout.approach_rotation,
        controller=TactileController(controller),
    )


def observe(scene: Scene) -> StepObservation:
    return StepObservation(
        ee_pose=scene.ee_pose,
        binary_gripper=scene.controller.observe(scene.grasp_condition),
        object_pose=scene.object_pose,
        grasp_pose=scene.grasp_pose(),
        joint_value=scene.joint_value,
        sim_time=scene.sim_time,
    )


def _constraint(scene: Scene, grasp_world) -> tuple[float, tuple]:
    """Joint value and world-frame residual of the held handle at ``grasp_world``."""
    inv = inverse(scene.object_pose)
    p = inv.apply(grasp_world)
    q, h = scene.joint_axis_true.project(p, scene.grasp_point.translation)
    r = quat_rotate(scene.object_pose.rotation, (p[0] - h[0], p[1] - h[1], p[2] - h[2]))
    return q, r


def _move(scene: Scene, target: Pose) -> Wrench:
    """Move the end effector towards ``target``; returns the contact wrench."""
    cfg = scene.config
    att = scene.attachment
    articulated = att.active and scene.joint_axis_true is not None
    comp = scene.compliance

    if not cfg.admittance_enabled:
        scene.ee_pose = target
        if not articulated:
            return ZERO_WRENCH
        grasp = target.apply(att.grasp_offset.translation)
        q, r = _constraint(scene, grasp)
        scene.joint_value = q
        k = -cfg.constraint_gain
        return Wrench((k * r[0], k * r[1], k * r[2]))

    if not articulated:
        if not comp.at_rest:
            comp = admittance_step(cfg.admittance, comp, ZERO_WRENCH, cfg.dt, cfg.substeps)
            scene.compliance = comp
            scene.ee_pose = offset_pose(target, comp.x_c)
        else:
            scene.ee_pose = target
        return ZERO_WRENCH

    # held articulated part: integrate the translational error dynamics with
    # the constraint force re-evaluated every substep
    m, d, kk = cfg.admittance.mass, cfg.admittance.damping, cfg.admittance.stiffness
    e = [float(c) for c in comp.x_c[:3]]
    v = [float(c) for c in comp.xdot_c[:3]]
    h = cfg.dt / cfg.substeps
    tx, ty, tz = target.translation
    if comp.x_c[3:].any() or comp.xdot_c[3:].any():
        rot_state = admittance_step(
            cfg.admittance,
            AdmittanceState(np.r_[np.zeros(3), comp.x_c[3:]], np.r_[np.zeros(3), comp.xdot_c[3:]]),
            ZERO_WRENCH,
            cfg.dt,
            cfg.substeps,
        )
        rot_e, rot_v = rot_state.x_c[3:], rot_state.xdot_c[3:]
    else:
        rot_e, rot_v = np.zeros(3), np.zeros(3)
    ee_rot = offset_pose(target, np.r_[0.0, 0.0, 0.0, rot_e]).rotation
    ox, oy, oz = quat_rotate(ee_rot, att.grasp_offset.translation)
    kc = cfg.constraint_gain
    f = (0.0, 0.0, 0.0)
    for _ in range(cfg.substeps):
        _, r = _constraint(scene, (tx + e[0] + ox, ty + e[1] + oy, tz + e[2] + oz))
        f = (-kc * r[0], -kc * r[1], -kc * r[2])
        for i in range(3):
            a = (f[i] - d[i] * v[i] - kk[i] * e[i]) / m[i]
            v[i] += h * a
            e[i] += h * v[i]
    scene.compliance = AdmittanceState(np.r_[e, rot_e], np.r_[v, rot_v])
    scene.ee_pose = Pose((tx + e[0], ty + e[1], tz + e[2]), ee_rot)
    q, r = _constraint(scene, (tx + e[0] + ox, ty + e[1] + oy, tz + e[2] + oz))
    scene.joint_value = q
    return Wrench((-kc * r[0], -kc * r[1], -kc * r[2]))


def _in_workspace(pose: Pose, limit: float) -> bool:
    return all(abs(c) <= limit for c in pose.translation)


def step(scene: Scene, ee_target: Pose, gripper_command: int, dt: float | None = None):
    """Advance one control step.

    Returns ``(scene, observation, wrench)``; the scene is updated in place
    and the step's trace line is left in ``scene.last_record``. Raises :class:`WorkspaceFault` when ``ee_target`` leaves the
    workspace box.
    """
    cfg = scene.config
    if dt is not None and abs(dt - cfg.dt) > 1e-12:
        raise ValueError(f"scene was built for dt={cfg.dt}, got {dt}")
    if not _in_workspace(ee_target, cfg.workspace):
        raise WorkspaceFault(f"target {ee_target.translation} outside the +/-{cfg.workspace} m box")

    condition = scene.grasp_condition
    controller = scene.controller
    n_overrides = len(controller.override_steps)
    requested = controller.filter(gripper_command, condition, scene.step_index)

    # motion first: a held object moves with the end effector this step
    wrench = _move(scene, ee_target)
    att = scene.attachment
    if att.active and scene.joint_axis_true is None:
        scene.object_pose = compose(compose(scene.ee_pose, att.grasp_offset), inverse(scene.grasp_point))

    g = scene.gripper
    if g.command == CLOSE and not g.at_equilibrium and scene.contact_width is not None:
        # the hand moved away while the fingers were still closing
        if math.dist(scene.grasp_pose().translation, scene.ee_pose.translation) > cfg.capture_radius:
            scene.contact_width = None
    applied = requested if g.at_equilibrium else g.command
    if applied == CLOSE and g.command == OPEN:
        grasp = scene.grasp_pose()
        near = math.dist(grasp.translation, scene.ee_pose.translation) <= cfg.capture_radius
        fits = scene.object_width < cfg.gripper.width(g.joint_angle)
        scene.contact_width = scene.object_width if (near and fits) else None
        scene.signal = None
    elif applied == OPEN and g.command == CLOSE:
        scene.contact_width = None
        scene.signal = None
        scene.attachment = Attachment()
    new_g, signal = step_gripper(cfg.gripper, g, applied, scene.contact_width, cfg.dt)
    scene.gripper = new_g
    controller.record_applied(applied)
    if signal is not None:
        scene.signal = signal
        if signal.contact:
            offset = compose(inverse(scene.ee_pose), scene.grasp_pose())
            scene.attachment = Attachment(True, offset)
            scene.ever_attached = True

    scene.step_index += 1
    if scene.success_quantity() >= scene.success_threshold():
        scene.success_streak += 1
    else:
        scene.success_streak = 0

    obs = observe(scene)
    scene.last_record = TraceRecord(
        step=scene.step_index - 1,
        sim_time=obs.sim_time,
        ee_pose=scene.ee_pose,
        gripper_angle=new_g.joint_angle,
        gripper_command=applied,
        at_equilibrium=new_g.at_equilibrium,
        binary_gripper=obs.binary_gripper,
        object_pose=scene.part_pose(),
        joint_value=scene.joint_value,
        wrench=wrench,
        override=len(controller.override_steps) > n_overrides,
        attached=scene.attachment.active,
    )
    return scene, obs, wrench


def check_success(scene: Scene) -> bool:
    return scene.success_streak >= scene.config.success_hold


def world_config_to_dict(cfg: WorldConfig) -> dict:
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, GripperModel):
            v = {g.name: getattr(v, g.name) for g in fields(v)}
        elif isinstance(v, AdmittanceParams):
            v = {g.name: getattr(v, g.name).tolist() for g in fields(v)}
        out[f.name] = v
    return out


def world_config_from_dict(data: dict) -> WorldConfig:
    known = {f.name for f in fields(WorldConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown world config keys: {sorted(unknown)}")
    kw = dict(data)
    if "gripper" in kw:
        kw["gripper"] = GripperModel(**kw["gripper"])
    if "admittance" in kw:
        kw["admittance"] = AdmittanceParams(**{k: np.array(v) for k, v in kw["admittance"].items()})
    return WorldConfig(**kw)
