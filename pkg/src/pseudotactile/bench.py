"""Evaluation protocol: disturbed and undisturbed policy rollouts and metrics.

Metrics (percentages, AT in simulated seconds):

* SR-ND, SR-D, SR: task success without disturbance, with it, pooled
* GSR-ND, GSR-D, GSR: the same for grasp success (attachment ever formed)
* AT: mean time to success over successful rollouts
* SR-R: share of disturbed rollouts that reopened the gripper and closed it
  again within the recovery window after the forced close
"""
from __future__ import annotations

import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .datagen import Dataset, derive_seed
from .expert import Stage, grasp_step_index
from .gripper import CLOSE, OPEN
from .policy import PolicyConfig, PolicyModel, fit, infer
from .se3 import Pose, rotation_distance, slerp, translation_distance
from .tactile import ControllerConfig
from .world import (
    NO_DISTURBANCE,
    DisturbanceSchedule,
    Task,
    WorkspaceFault,
    WorldConfig,
    apply_disturbance,
    check_success,
    observe,
    reset,
    sample_disturbance,
    step,
    world_config_from_dict,
    world_config_to_dict,
)

RECOVERY_WINDOW = 3.0  # s
DEFAULT_N_PER_ARM = 25
RESULTS_FORMAT = "pseudotactile-results"
# tracking limits of the arm while executing policy actions; just above the
# fastest expert motion (the oven arc) so expert-like chunks pass unchanged
MAX_LINEAR_SPEED = 0.25  # m/s
MAX_ANGULAR_SPEED = 1.0  # rad/s


def rate_limit(previous: Pose, target: Pose, dt: float,
               linear: float = MAX_LINEAR_SPEED, angular: float = MAX_ANGULAR_SPEED) -> Pose:
    """Move from ``previous`` towards ``target`` by at most one step of the speed caps."""
    dist = translation_distance(previous, target)
    angle = rotation_distance(previous, target)
    s = 1.0
    if dist > linear * dt:
        s = linear * dt / dist
    if angle > angular * dt:
        s = min(s, angular * dt / angle)
    if s == 1.0:
        return target
    p0, p1 = previous.translation, target.translation
    return Pose(
        tuple(a + s * (b - a) for a, b in zip(p0, p1)),
        slerp(previous.rotation, target.rotation, s),
    )


@dataclass(frozen=True)
class RolloutResult:
    seed: int
    disturbed: bool
    task_success: bool
    grasp_success: bool
    recovered: bool | None
    sim_time_to_success: float | None
    peak_wrench: float
    failure_mode: bool = False
    fault: bool = False

    def __post_init__(self):
        if self.task_success and not self.grasp_success:
            raise ValueError("task success without a grasp")
        if self.disturbed != (self.recovered is not None):
            raise ValueError("recovered is defined exactly for disturbed rollouts")
        if self.task_success != (self.sim_time_to_success is not None):
            raise ValueError("time to success is present exactly for successes")


@dataclass
class PolicyRollout:
    result: RolloutResult
    records: list = field(default_factory=list)
    override_steps: list = field(default_factory=list)
    chunk_stages: list = field(default_factory=list)
    schedule: DisturbanceSchedule = NO_DISTURBANCE


def detect_recovery(commands, trigger_step: int, window_steps: int) -> bool:
    """True when the applied command goes open and then close again in the window.

    ``commands[k]`` is the gripper command applied at control step ``k``.
    """
    end = min(len(commands), trigger_step + window_steps + 1)
    reopened = False
    for k in range(trigger_step + 1, end):
        if not reopened and commands[k] == OPEN:
            reopened = True
        elif reopened and commands[k] == CLOSE:
            return True
    return False


def policy_rollout(task, seed: int, model: PolicyModel, controller: ControllerConfig | None = None,
                   disturbance: DisturbanceSchedule | None = None,
                   config: WorldConfig | None = None,
                   recovery_window: float = RECOVERY_WINDOW) -> PolicyRollout:
    """Closed-loop receding-horizon rollout of ``model``.

    A new chunk is retrieved after ``execute`` steps, or as soon as the
    binary gripper observation changes. Targets are rate limited by
    :func:`rate_limit` before they reach the arm.
    """
    scene = reset(task, seed, config, controller)
    cfg = scene.config
    disturbance = disturbance or NO_DISTURBANCE
    obs = observe(scene)
    out = PolicyRollout(result=None, schedule=disturbance)
    chunk, idx, last_bit = None, 0, obs.binary_gripper
    success = fault = failure_mode = False
    commands = []
    peak = 0.0
    last_target = scene.ee_pose
    for k in range(cfg.max_steps):
        if chunk is None or idx >= chunk.execute or obs.binary_gripper != last_bit:
            chunk, idx = infer(model, obs), 0
            last_bit = obs.binary_gripper
        out.chunk_stages.append(chunk.stage)
        if obs.binary_gripper == 1 and not scene.attachment.active and chunk.stage is Stage.POST_GRASP:
            failure_mode = True
        target = rate_limit(last_target, chunk.targets[idx], cfg.dt)
        command = chunk.commands[idx]
        last_target = target
        idx += 1
        try:
            _, obs, wrench = step(scene, target, apply_disturbance(disturbance, k, command))
        except WorkspaceFault:
            fault = True
            break
        rec = scene.last_record
        out.records.append(rec)
        commands.append(rec.gripper_command)
        peak = max(peak, wrench.norm())
        if check_success(scene):
            success = True
            break
    recovered = None
    if disturbance.enabled:
        window = int(round(recovery_window / cfg.dt))
        recovered = detect_recovery(commands, disturbance.trigger_step, window)
    out.override_steps = list(scene.controller.override_steps)
    out.result = RolloutResult(
        seed=seed,
        disturbed=disturbance.enabled,
        task_success=success,
        grasp_success=scene.ever_attached,
        recovered=recovered,
        sim_time_to_success=scene.sim_time if success else None,
        peak_wrench=peak,
        failure_mode=failure_mode,
        fault=fault,
    )
    return out


def policy_grasp_step(task, seed: int, model: PolicyModel, config: WorldConfig | None = None):
    """First step at which an undisturbed rollout of ``model`` commands a close, else None.

    Before the first close the binary observation is 0 whether or not the
    feedback is enabled, so the result does not depend on the controller.
    """
    rollout = policy_rollout(task, seed, model, None, NO_DISTURBANCE, config)
    return next((r.step for r in rollout.records if r.gripper_command == CLOSE), None)


def rollout_plan(task, seed: int, n_per_arm: int, config: WorldConfig | None = None,
                 model: PolicyModel | None = None):
    """``(scene_seed, schedule)`` for every rollout of a benchmark run.

    The forced close of a disturbed scene is drawn before the nominal grasp
    step: that of an undisturbed pilot rollout of ``model`` when given (the
    policy may reach the object sooner than the expert), else the expert's.
    """
    if n_per_arm < 1:
        raise ValueError("n_per_arm must be >= 1")
    plan = []
    for i in range(2 * n_per_arm):
        scene_seed = derive_seed(seed, "bench", i)
        schedule = NO_DISTURBANCE
        if i >= n_per_arm:
            g = policy_grasp_step(task, scene_seed, model, config) if model is not None else None
            if g is None or g < 2:
                g = grasp_step_index(reset(task, scene_seed, config))
            rng = np.random.default_rng(derive_seed(seed, "bench-disturb", i))
            schedule = sample_disturbance(rng, g)
        plan.append((scene_seed, schedule))
    return plan


_WORKER_MODEL: PolicyModel | None = None


def _init_worker(model: PolicyModel) -> None:
    global _WORKER_MODEL
    _WORKER_MODEL = model


def _run_one(args):
    task, scene_seed, schedule, controller, config, window = args
    return policy_rollout(task, scene_seed, _WORKER_MODEL, controller, schedule, config, window)


def run_rollouts(task, policy: PolicyModel, controller_config: ControllerConfig | None,
                 n_per_arm: int, seed: int, config: WorldConfig | None = None,
                 recovery_window: float = RECOVERY_WINDOW, jobs: int = 1) -> list[PolicyRollout]:
    task = Task.parse(task)
    args = [
        (task, s, sched, controller_config, config, recovery_window)
        for s, sched in rollout_plan(task, seed, n_per_arm, config, policy)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(policy,)) as pool:
            rollouts = list(pool.map(_run_one, args, chunksize=max(1, len(args) // (4 * jobs))))
    else:
        rollouts = [
            policy_rollout(task, s, policy, c, sched, cfg, w) for task, s, sched, c, cfg, w in args
        ]
    return sorted(rollouts, key=lambda r: (r.result.disturbed, r.result.seed))


def run_benchmark(task, policy: PolicyModel, controller_config: ControllerConfig | None,
                  n_per_arm: int = DEFAULT_N_PER_ARM, seed: int = 0,
                  config: WorldConfig | None = None, recovery_window: float = RECOVERY_WINDOW,
                  jobs: int = 1) -> list[RolloutResult]:
    """``n_per_arm`` undisturbed then ``n_per_arm`` disturbed results, each arm sorted by seed."""
    rollouts = run_rollouts(task, policy, controller_config, n_per_arm, seed, config,
                            recovery_window, jobs)
    return [r.result for r in rollouts]


@dataclass(frozen=True)
class MetricsReport:
    sr_nd: float
    sr_d: float
    sr: float
    at: float | None
    sr_r: float
    gsr_nd: float
    gsr_d: float
    gsr: float


COLUMNS = ("SR-ND", "SR-D", "SR", "AT", "SR-R", "GSR-ND", "GSR-D", "GSR")


def _pct(k: int, n: int) -> float:
    return 100.0 * k / n


def compute_metrics(results) -> MetricsReport:
    results = list(results)
    nd = [r for r in results if not r.disturbed]
    d = [r for r in results if r.disturbed]
    if not nd or not d:
        raise ValueError("metrics need at least one rollout in each arm")
    times = [r.sim_time_to_success for r in results if r.task_success]
    return MetricsReport(
        sr_nd=_pct(sum(r.task_success for r in nd), len(nd)),
        sr_d=_pct(sum(r.task_success for r in d), len(d)),
        sr=_pct(sum(r.task_success for r in results), len(results)),
        at=math.fsum(times) / len(times) if times else None,
        sr_r=_pct(sum(bool(r.recovered) for r in d), len(d)),
        gsr_nd=_pct(sum(r.grasp_success for r in nd), len(nd)),
        gsr_d=_pct(sum(r.grasp_success for r in d), len(d)),
        gsr=_pct(sum(r.grasp_success for r in results), len(results)),
    )


def _cells(report: MetricsReport) -> list[str]:
    out = []
    for f in fields(report):
        v = getattr(report, f.name)
        if v is None:
            out.append("-")
        elif f.name == "at":
            out.append(f"{v:.2f}")
        else:
            out.append(f"{v:.1f}")
    return out


def format_csv(rows: list[tuple[str, MetricsReport]]) -> str:
    buf = io.StringIO()
    buf.write(",".join(("config",) + COLUMNS) + "\n")
    for label, report in rows:
        buf.write(",".join([label] + _cells(report)) + "\n")
    return buf.getvalue()


def format_table(rows: list[tuple[str, MetricsReport]]) -> str:
    table = [["config", *COLUMNS]] + [[label, *_cells(r)] for label, r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    lines = []
    for row in table:
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AblationRow:
    label: str
    disturbed_data: bool
    feedback: bool
    report: MetricsReport
    failure_mode_share: float


ABLATION_ROWS = (
    ("clean data, no feedback", False, False),
    ("disturbed data, no feedback", True, False),
    ("clean data, feedback", False, True),
)


def run_ablation(task, seed: int, clean: Dataset, disturbed: Dataset,
                 n_per_arm: int = DEFAULT_N_PER_ARM, policy_config: PolicyConfig | None = None,
                 config: WorldConfig | None = None, recovery_window: float = RECOVERY_WINDOW,
                 jobs: int = 1) -> list[AblationRow]:
    """The three data/feedback combinations, each scored on the same scenes."""
    models = {False: fit(clean, policy_config), True: fit(disturbed, policy_config)}
    rows = []
    for label, use_disturbed, feedback in ABLATION_ROWS:
        rollouts = run_rollouts(task, models[use_disturbed], ControllerConfig(enabled=feedback),
                                n_per_arm, seed, config, recovery_window, jobs)
        results = [r.result for r in rollouts]
        dist = [r for r in results if r.disturbed]
        rows.append(
            AblationRow(
                label,
                use_disturbed,
                feedback,
                compute_metrics(results),
                _pct(sum(r.failure_mode for r in dist), len(dist)),
            )
        )
    return rows


def result_to_dict(r: RolloutResult) -> dict:
    return {f.name: getattr(r, f.name) for f in fields(r)}


def save_results(results, path, meta: dict | None = None) -> None:
    """One JSON line per rollout, preceded by a header line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": RESULTS_FORMAT, **(meta or {})}, sort_keys=True) + "\n")
        for r in results:
            fh.write(json.dumps(result_to_dict(r), sort_keys=True) + "\n")


def load_results(path) -> tuple[dict, list[RolloutResult]]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines or json.loads(lines[0]).get("format") != RESULTS_FORMAT:
        raise ValueError(f"{path}: not a results file")
    return json.loads(lines[0]), [RolloutResult(**json.loads(ln)) for ln in lines[1:]]


TRACE_FORMAT = "pseudotactile-trace"


def save_trace(rollout: PolicyRollout, path, task, schedule: DisturbanceSchedule,
               controller: ControllerConfig, config: WorldConfig, model_path=None,
               recovery_window: float = RECOVERY_WINDOW) -> None:
    """Header line with everything needed to re-run the rollout, then one line per step."""
    header = {
        "format": TRACE_FORMAT,
        "task": Task.parse(task).value,
        "seed": rollout.result.seed,
        "disturbed": schedule.enabled,
        "trigger_step": schedule.trigger_step,
        "feedback": controller.enabled,
        "reopen_latency": controller.reopen_latency,
        "recovery_window": recovery_window,
        "model": model_path,
        "world": world_config_to_dict(config),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in rollout.records:
            fh.write(rec.to_json() + "\n")


def replay_trace(path, model: PolicyModel) -> tuple[list[str], list[str]]:
    """Re-run the rollout described by a trace header; returns (stored, replayed) lines."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = json.loads(lines[0])
    if header.get("format") != TRACE_FORMAT:
        raise ValueError(f"{path}: not a trace file")
    schedule = DisturbanceSchedule(header["disturbed"], header["trigger_step"])
    rollout = policy_rollout(
        header["task"],
        header["seed"],
        model,
        ControllerConfig(header["feedback"], header["reopen_latency"]),
        schedule,
        world_config_from_dict(header["world"]),
        header["recovery_window"],
    )
    return lines[1:], [rec.to_json() for rec in rollout.records]
