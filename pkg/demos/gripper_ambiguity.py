"""Forced early close with and without the pseudo-tactile controller.

Runs the scripted expert on one oven scene with a close forced before the
grasp pose. With feedback off the binary observation reads 1 while nothing is
held; with feedback on it reads 0 and the controller reopens the gripper.
"""
import argparse

from pseudotactile.expert import expert_rollout, grasp_step_index
from pseudotactile.tactile import ControllerConfig
from pseudotactile.world import DisturbanceSchedule, reset


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--task", default="oven")
    p.add_argument("--seed", type=int, default=4)
    args = p.parse_args()

    trigger = grasp_step_index(reset(args.task, args.seed)) // 2
    for enabled in (False, True):
        scene = reset(args.task, args.seed)
        out = expert_rollout(scene, ControllerConfig(enabled), DisturbanceSchedule(True, trigger))
        lies = sum(r.binary_gripper == 1 and not r.attached for r in out.records)
        print(f"feedback {'on ' if enabled else 'off'}: forced close at step {trigger}, "
              f"steps reading 1 while empty {lies}, overrides {out.override_steps}, "
              f"success {out.success}")
        end = (out.override_steps[0] if out.override_steps else trigger + 12) + 4
        window = out.records[trigger:end]
        print("  step  cmd  obs  attached")
        for r in window:
            print(f"  {r.step:4d}  {r.gripper_command:3d}  {r.binary_gripper:3d}  {int(r.attached):8d}")


if __name__ == "__main__":
    main()
