"""Batch demonstration collection with the scripted expert.

Datasets are line-delimited JSON: one header line with the normalisation
statistics, then for every demonstration a ``demo`` line followed by one
line per step. Only successful rollouts are kept.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .expert import DemoStep, PlanningError, Stage, expert_rollout, grasp_step_index
from .se3 import Pose
from .tactile import ControllerConfig
from .world import (
    NO_DISTURBANCE,
    DisturbanceSchedule,
    StepObservation,
    Task,
    WorldConfig,
    reset,
    sample_disturbance,
    world_config_from_dict,
    world_config_to_dict,
)

FORMAT = "pseudotactile-demos"
VERSION = 1
N_FEATURES = 11


class CollectionAborted(RuntimeError):
    """Expert success rate fell below the misconfiguration guard."""


def derive_seed(*parts) -> int:
    """Independent 63-bit seed for a named sub-stream of ``parts``."""
    ints = []
    for p in parts:
        if isinstance(p, str):
            ints.append(int.from_bytes(hashlib.sha256(p.encode()).digest()[:4], "little"))
        else:
            ints.append(int(p))
    return int(np.random.SeedSequence(ints).generate_state(2, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class Demonstration:
    demo_id: int
    task: Task
    seed: int
    steps: tuple  # DemoStep
    disturbed: bool = False
    trigger_step: int = -1
    override_steps: tuple = ()

    @property
    def length(self) -> int:
        return len(self.steps)


@dataclass(eq=False)
class Dataset:
    demonstrations: list
    feature_mean: np.ndarray
    feature_std: np.ndarray
    task: Task
    seed: int = 0
    disturb_fraction: float = 0.0
    feedback: bool = True
    attempts: int = 0
    path: str | None = field(default=None, compare=False)
    world: WorldConfig | None = None

    def __len__(self):
        return len(self.demonstrations)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.feature_mean, other.feature_mean)
            and np.array_equal(self.feature_std, other.feature_std)
            and (self.demonstrations, self.task, self.seed, self.disturb_fraction, self.feedback,
                 self.attempts, self.world)
            == (other.demonstrations, other.task, other.seed, other.disturb_fraction,
                other.feedback, other.attempts, other.world)
        )


def feature_stats(demos) -> tuple[np.ndarray, np.ndarray]:
    feats = np.array([s.observation.features() for d in demos for s in d.steps])
    if feats.size == 0:
        raise ValueError("no steps to compute statistics over")
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std < 1e-12] = 1.0
    return mean, std


def _attempt(task: Task, seed: int, attempt: int, disturb_fraction: float, feedback: bool,
             config: WorldConfig):
    scene_seed = derive_seed(seed, "scene", attempt)
    rng = np.random.default_rng(derive_seed(seed, "disturb", attempt))
    scene = reset(task, scene_seed, config)
    disturbed = bool(rng.random() < disturb_fraction)
    schedule = NO_DISTURBANCE
    try:
        if disturbed:
            schedule = sample_disturbance(rng, grasp_step_index(scene))
        result = expert_rollout(scene, ControllerConfig(enabled=feedback), schedule)
    except PlanningError:
        return attempt, scene_seed, None, schedule
    return attempt, scene_seed, result, schedule


def _attempt_star(args):
    return _attempt(*args)


def collect(task, n_demos: int, seed: int, disturb_fraction: float = 0.0,
            config: WorldConfig | None = None, feedback: bool = True, jobs: int = 1,
            min_success_rate: float = 0.5, guard_after: int = 100) -> Dataset:
    """Run expert rollouts until ``n_demos`` successes are stored.

    Attempts are numbered from 0 and each one draws its scene and
    disturbance from ``seed`` and its number, so the result does not depend
    on ``jobs``.
    """
    task = Task.parse(task)
    if n_demos < 1:
        raise ValueError("n_demos must be >= 1")
    if not 0.0 <= disturb_fraction <= 1.0:
        raise ValueError("disturb_fraction must lie in [0, 1]")
    cfg = config or WorldConfig()
    demos: list[Demonstration] = []
    attempts = 0
    pool = ProcessPoolExecutor(jobs) if jobs > 1 else None
    try:
        while len(demos) < n_demos:
            batch = max(jobs, n_demos - len(demos)) if pool is not None else 1
            args = [(task, seed, attempts + b, disturb_fraction, feedback, cfg) for b in range(batch)]
            results = pool.map(_attempt_star, args) if pool is not None else map(_attempt_star, args)
            for _, scene_seed, result, schedule in results:
                if len(demos) == n_demos:
                    break
                attempts += 1
                if result is not None and result.success:
                    demos.append(
                        Demonstration(
                            demo_id=len(demos),
                            task=task,
                            seed=scene_seed,
                            steps=tuple(result.steps),
                            disturbed=schedule.enabled,
                            trigger_step=schedule.trigger_step,
                            override_steps=tuple(result.override_steps),
                        )
                    )
                if attempts >= guard_after and len(demos) < min_success_rate * attempts:
                    raise CollectionAborted(
                        f"expert succeeded in {len(demos)} of {attempts} attempts; check the configuration"
                    )
    finally:
        if pool is not None:
            pool.shutdown()
    mean, std = feature_stats(demos)
    return Dataset(demos, mean, std, task, seed, disturb_fraction, feedback, attempts, world=cfg)


@dataclass(frozen=True)
class DatasetSummary:
    n_demos: int
    per_task: dict
    mean_length: float
    disturbance_share: float
    total_steps: int


def dataset_stats(dataset: Dataset) -> DatasetSummary:
    demos = dataset.demonstrations
    if not demos:
        raise ValueError("dataset is empty")
    per_task: dict[str, int] = {}
    for d in demos:
        per_task[d.task.value] = per_task.get(d.task.value, 0) + 1
    total = sum(d.length for d in demos)
    return DatasetSummary(
        n_demos=len(demos),
        per_task=per_task,
        mean_length=total / len(demos),
        disturbance_share=sum(d.disturbed for d in demos) / len(demos),
        total_steps=total,
    )


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def dump_lines(dataset: Dataset):
    header = {
        "format": FORMAT,
        "version": VERSION,
        "task": dataset.task.value,
        "seed": dataset.seed,
        "disturb_fraction": dataset.disturb_fraction,
        "feedback": dataset.feedback,
        "attempts": dataset.attempts,
        "n_demos": len(dataset.demonstrations),
        "feature_mean": dataset.feature_mean.tolist(),
        "feature_std": dataset.feature_std.tolist(),
    }
    if dataset.world is not None:
        header["world"] = world_config_to_dict(dataset.world)
    yield _dumps(header)
    for d in dataset.demonstrations:
        yield _dumps(
            {
                "demo": d.demo_id,
                "task": d.task.value,
                "seed": d.seed,
                "disturbed": d.disturbed,
                "trigger_step": d.trigger_step,
                "overrides": list(d.override_steps),
                "length": d.length,
            }
        )
        for t, s in enumerate(d.steps):
            yield _dumps(
                {
                    "t": t,
                    "obs": s.observation.to_list(),
                    "target": s.target.to_list(),
                    "cmd": s.command,
                    "stage": s.stage.value,
                }
            )


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in dump_lines(dataset):
            fh.write(line + "\n")


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = json.loads(lines[0])
    if header.get("format") != FORMAT:
        raise ValueError(f"{path}: not a demonstration file")
    if header.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported version {header.get('version')}")
    demos = []
    current = None
    steps: list[DemoStep] = []

    def flush():
        if current is not None:
            if len(steps) != current["length"]:
                raise ValueError(f"{path}: demo {current['demo']} is truncated")
            demos.append(
                Demonstration(
                    demo_id=current["demo"],
                    task=Task.parse(current["task"]),
                    seed=current["seed"],
                    steps=tuple(steps),
                    disturbed=current["disturbed"],
                    trigger_step=current["trigger_step"],
                    override_steps=tuple(current["overrides"]),
                )
            )

    for ln in lines[1:]:
        rec = json.loads(ln)
        if "demo" in rec:
            flush()
            current, steps = rec, []
        else:
            steps.append(
                DemoStep(
                    StepObservation.from_list(rec["obs"]),
                    Pose.from_array(rec["target"]),
                    int(rec["cmd"]),
                    Stage(rec["stage"]),
                )
            )
    flush()
    if len(demos) != header["n_demos"]:
        raise ValueError(f"{path}: header announces {header['n_demos']} demos, found {len(demos)}")
    return Dataset(
        demos,
        np.array(header["feature_mean"]),
        np.array(header["feature_std"]),
        Task.parse(header["task"]),
        header["seed"],
        header["disturb_fraction"],
        header["feedback"],
        header["attempts"],
        path=str(path),
        world=world_config_from_dict(header["world"]) if "world" in header else None,
    )


def replay_demo(demo: Demonstration, config: WorldConfig | None = None,
                feedback: bool = True) -> list[DemoStep]:
    """Re-simulate ``demo`` from its seed with the expert; returns the new steps.

    ``config`` and ``feedback`` must match the collection run (see the
    dataset's ``world`` and ``feedback`` fields).
    """
    scene = reset(demo.task, demo.seed, config)
    schedule = DisturbanceSchedule(True, demo.trigger_step) if demo.disturbed else NO_DISTURBANCE
    return expert_rollout(scene, ControllerConfig(enabled=feedback), schedule).steps


def steps_identical(a, b) -> bool:
    """Bit-level comparison through the serialised form."""
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        if (x.observation.to_list(), x.target.to_list(), x.command, x.stage) != (
            y.observation.to_list(), y.target.to_list(), y.command, y.stage
        ):
            return False
    return True
