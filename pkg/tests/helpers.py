"""Shared scripted scenes for the test suite."""
from pseudotactile.expert import expert_rollout, key_poses_world
from pseudotactile.gripper import CLOSE
from pseudotactile.world import WorldConfig, reset, step


def grasped_scene(task, seed=0, config=None, controller=None):
    """Scene whose end effector sits on the grasp pose with the object attached."""
    scene = reset(task, seed, config, controller)
    _, grasp = key_poses_world(scene)
    for _ in range(40):
        step(scene, grasp, CLOSE)
        if scene.attachment.active:
            return scene
    raise AssertionError("scripted grasp did not attach")


def peak_wrench(task, seed, admittance_enabled):
    cfg = WorldConfig(admittance_enabled=admittance_enabled)
    out = expert_rollout(reset(task, seed, cfg))
    return out.success, max(r.wrench.norm() for r in out.records)


def random_results(rng, max_per_arm=12):
    """Synthetic result list with both arms present and valid field combinations."""
    from pseudotactile.bench import RolloutResult

    out = []
    for disturbed in (False, True):
        for i in range(int(rng.integers(1, max_per_arm + 1))):
            grasp = bool(rng.integers(2))
            task = grasp and bool(rng.integers(2))
            out.append(RolloutResult(
                seed=i,
                disturbed=disturbed,
                task_success=task,
                grasp_success=grasp,
                recovered=bool(rng.integers(2)) if disturbed else None,
                sim_time_to_success=float(rng.uniform(0.05, 30.0)) if task else None,
                peak_wrench=float(rng.uniform(0.0, 100.0)),
            ))
    rng.shuffle(out)
    return out


def recount(results):
    """Naive re-tally of the metric fields, with exact rational arithmetic."""
    from fractions import Fraction

    def pct(rows, key):
        hits = 0
        for r in rows:
            if key(r):
                hits += 1
        return float(Fraction(100 * hits, len(rows)))

    nd, d = [], []
    for r in results:
        (d if r.disturbed else nd).append(r)
    times = [Fraction(r.sim_time_to_success) for r in results if r.task_success]
    at = float(float(sum(times, Fraction(0))) / len(times)) if times else None
    return {
        "sr_nd": pct(nd, lambda r: r.task_success),
        "sr_d": pct(d, lambda r: r.task_success),
        "sr": pct(results, lambda r: r.task_success),
        "at": at,
        "sr_r": pct(d, lambda r: r.recovered is True),
        "gsr_nd": pct(nd, lambda r: r.grasp_success),
        "gsr_d": pct(d, lambda r: r.grasp_success),
        "gsr": pct(results, lambda r: r.grasp_success),
    }


def seven_and_nine_of_ten():
    """Ten undisturbed rollouts with 7 successes and ten disturbed with 9."""
    from pseudotactile.bench import RolloutResult

    def r(i, disturbed, ok):
        return RolloutResult(i, disturbed, ok, ok, True if disturbed else None,
                             10.0 if ok else None, 0.0)

    return [r(i, False, i < 7) for i in range(10)] + [r(i, True, i < 9) for i in range(10)]
