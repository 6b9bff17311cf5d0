"""Closed-loop gripper controller driven by the pseudo-tactile signal.

When the gripper has settled closed on nothing (``EMPTY_CLOSE``) the
controller replaces the high-level close command with an open command, so the
binary observation handed back to the policy is 1 only for a real grasp.
With the controller disabled the observation simply echoes the last applied
command, which is the ambiguous feed-forward signal.
"""
from __future__ import annotations

from dataclasses import dataclass

from .gripper import CLOSE, OPEN, GraspCondition


@dataclass(frozen=True)
class ControllerConfig:
    enabled: bool = True
    reopen_latency: int = 1

    def __post_init__(self):
        if self.reopen_latency < 1:
            raise ValueError("reopen_latency must be >= 1")


def filter_command(
    config: ControllerConfig, policy_command: int, condition: GraspCondition
) -> tuple[int, int]:
    """Stateless decision rule: returns ``(gripper_command, observation)``.

    Latency is not modelled here; :class:`TactileController` adds it.
    """
    if not config.enabled:
        return policy_command, policy_command
    if policy_command == CLOSE and condition is GraspCondition.EMPTY_CLOSE:
        return OPEN, 0
    if policy_command == CLOSE and condition is GraspCondition.GRASP_CLOSE:
        return CLOSE, 1
    return policy_command, 0


class TactileController:
    """Per-rollout controller instance.

    Keeps the last applied command (the feed-forward observation used when
    disabled) and counts how long ``EMPTY_CLOSE`` has persisted so the
    reopen can be delayed by ``reopen_latency - 1`` steps. Each empty-close
    episode that the controller resolves by commanding open is logged once
    in ``override_steps``, whether or not the upstream command was already
    open on that step.
    """

    def __init__(self, config: ControllerConfig | None = None):
        self.config = config or ControllerConfig()
        self.last_applied = OPEN
        self._empty_close_steps = 0
        self._reopening = False
        self.override_steps: list[int] = []

    def filter(self, policy_command: int, condition: GraspCondition, step_index: int = -1) -> int:
        """Return the command to send to the gripper and log overrides."""
        cfg = self.config
        if condition is GraspCondition.EMPTY_CLOSE:
            self._empty_close_steps += 1
        else:
            self._empty_close_steps = 0
            self._reopening = False

        if cfg.enabled and condition is GraspCondition.EMPTY_CLOSE:
            if self._empty_close_steps >= cfg.reopen_latency:
                if not self._reopening:
                    self._reopening = True
                    self.override_steps.append(step_index)
                return OPEN
            return policy_command
        command, _ = filter_command(cfg, policy_command, condition)
        return command

    def record_applied(self, command: int) -> None:
        self.last_applied = command

    def observe(self, condition: GraspCondition) -> int:
        """Binary gripper observation for the current (post-step) condition."""
        if self.config.enabled:
            return 1 if condition is GraspCondition.GRASP_CLOSE else 0
        return self.last_applied
