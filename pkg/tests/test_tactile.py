"""Tactile controller decision rule and its closed-loop guarantees."""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudotactile.expert import expert_rollout, grasp_step_index
from pseudotactile.gripper import CLOSE, OPEN, GraspCondition
from pseudotactile.tactile import ControllerConfig, TactileController, filter_command
from pseudotactile.world import DisturbanceSchedule, reset, step

ON = ControllerConfig(True)
OFF = ControllerConfig(False)


def test_filter_examples():
    assert filter_command(ON, CLOSE, GraspCondition.EMPTY_CLOSE) == (OPEN, 0)
    assert filter_command(ON, CLOSE, GraspCondition.GRASP_CLOSE) == (CLOSE, 1)
    assert filter_command(OFF, CLOSE, GraspCondition.EMPTY_CLOSE) == (CLOSE, 1)
    assert filter_command(ON, OPEN, GraspCondition.EMPTY_OPEN) == (OPEN, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(True, 0)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([OPEN, CLOSE]), st.sampled_from(list(GraspCondition)))
def test_prop_pass_through_unless_empty_close(cmd, cond):
    out, _ = filter_command(ON, cmd, cond)
    if cond is not GraspCondition.EMPTY_CLOSE:
        assert out == cmd


def test_disabled_observation_echoes_applied_command():
    c = TactileController(OFF)
    assert c.observe(GraspCondition.EMPTY_CLOSE) == 0
    c.record_applied(CLOSE)
    assert c.observe(GraspCondition.EMPTY_CLOSE) == 1
    assert c.observe(GraspCondition.GRASP_CLOSE) == 1


@pytest.mark.parametrize("latency", [1, 2, 4])
def test_bounded_recovery(latency):
    c = TactileController(ControllerConfig(True, latency))
    outs = [c.filter(CLOSE, GraspCondition.EMPTY_CLOSE, k) for k in range(latency + 2)]
    assert outs.index(OPEN) == latency - 1
    assert c.override_steps == [latency - 1]


def _close_in_free_space(controller):
    scene = reset("pick", 5, controller=controller)
    hold = scene.ee_pose
    obs = []
    for _ in range(20):
        _, o, _ = step(scene, hold, CLOSE)
        obs.append((o.binary_gripper, scene.attachment.active, scene.last_record.gripper_command))
    return scene, obs


def test_enabled_closed_loop_never_reports_phantom_grasp():
    scene, obs = _close_in_free_space(ON)
    assert all(b == 0 for b, _, _ in obs)
    # the gripper reaches the limit, settles, and is forced open the step after
    commands = [c for _, _, c in obs]
    assert OPEN in commands[commands.index(CLOSE):]
    assert len(scene.controller.override_steps) >= 1


def test_disabled_reaches_ambiguous_state():
    _, obs = _close_in_free_space(OFF)
    assert obs[0][0] == 1 and not obs[0][1]


@pytest.mark.parametrize("task", ["pick", "drawer", "oven"])
def test_disturbed_expert_trace_observation_matches_attachment(task):
    scene = reset(task, 11)
    g = grasp_step_index(scene)
    out = expert_rollout(scene, ON, DisturbanceSchedule(True, g // 2))
    assert out.success
    for rec in out.records:
        assert rec.binary_gripper == int(rec.attached)
