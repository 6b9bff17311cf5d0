"""Force-controlled two-finger gripper used as a tactile sensor.

The joint angle ``q`` is normalised to ``[0, 1]`` (0 fully open, 1 fully
closed) and maps to the finger opening through ``w = (1 - q) * stroke``.
Closing stops either when the fingers meet the object (force balance) or at
the mechanical limit; the angle at which the fingers come to rest is the
pseudo-tactile reading.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

OPEN = 0
CLOSE = 1


class GraspCondition(enum.Enum):
    EMPTY_OPEN = "empty_open"
    GRASP_CLOSE = "grasp_close"
    EMPTY_CLOSE = "empty_close"


class TransientGripperError(RuntimeError):
    """Raised when a closing gripper is classified before it has settled."""


@dataclass(frozen=True)
class GripperModel:
    stroke: float = 0.085
    closing_rate: float = 2.0
    max_angle: float = 1.0
    angle_epsilon: float = 0.02

    def __post_init__(self):
        if not self.stroke > 0:
            raise ValueError("stroke must be positive")
        if not 0 < self.angle_epsilon < 0.05:
            raise ValueError("angle_epsilon must lie in (0, 0.05)")
        if not self.closing_rate > 0:
            raise ValueError("closing_rate must be positive")

    def width(self, joint_angle: float) -> float:
        """Finger opening in metres at ``joint_angle``."""
        return (1.0 - joint_angle) * self.stroke

    def contact_angle(self, contact_width: float) -> float:
        """Joint angle at which the fingers touch an object of ``contact_width``."""
        return min(self.max_angle, 1.0 - contact_width / self.stroke)


@dataclass(frozen=True)
class GripperState:
    joint_angle: float = 0.0
    command: int = OPEN
    at_equilibrium: bool = True

    def __post_init__(self):
        if not 0.0 <= self.joint_angle <= 1.0:
            raise ValueError(f"joint_angle must be in [0, 1], got {self.joint_angle}")
        if self.command not in (OPEN, CLOSE):
            raise ValueError("command must be OPEN (0) or CLOSE (1)")


@dataclass(frozen=True)
class PseudoTactileSignal:
    equilibrium_angle: float
    contact: bool


def step_gripper(
    model: GripperModel,
    state: GripperState,
    command: int,
    contact_width: float | None,
    dt: float,
) -> tuple[GripperState, PseudoTactileSignal | None]:
    """Advance the gripper one control step.

    A :class:`PseudoTactileSignal` is returned only on the step where a close
    command first settles; opening never produces one.
    """
    if command not in (OPEN, CLOSE):
        raise ValueError("command must be OPEN (0) or CLOSE (1)")
    if contact_width is not None and not 0.0 < contact_width < model.stroke:
        raise ValueError(
            f"contact_width must lie in (0, {model.stroke}), got {contact_width}"
        )

    if command == CLOSE:
        target = model.max_angle if contact_width is None else model.contact_angle(contact_width)
    else:
        target = 0.0

    q = state.joint_angle
    step = model.closing_rate * dt
    if abs(target - q) <= step:
        q = target
    elif target > q:
        q += step
    else:
        q -= step

    settled = q == target
    already_settled = state.at_equilibrium and state.command == command and state.joint_angle == q
    new_state = GripperState(q, command, settled)
    if command == CLOSE and settled and not already_settled:
        contact = q < model.max_angle - model.angle_epsilon
        return new_state, PseudoTactileSignal(q, contact)
    return new_state, None


def classify_grasp_condition(signal: PseudoTactileSignal | None, command: int) -> GraspCondition:
    if command == OPEN:
        return GraspCondition.EMPTY_OPEN
    if signal is None:
        raise TransientGripperError("gripper is still closing; wait for equilibrium")
    return GraspCondition.GRASP_CLOSE if signal.contact else GraspCondition.EMPTY_CLOSE
