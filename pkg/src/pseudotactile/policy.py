"""Nearest-neighbour behaviour cloning with action chunks.

Every demonstration step with at least ``horizon`` successors becomes an
index entry: its standardised observation feature (gripper bit scaled by
``gripper_weight``) maps to the ``horizon`` expert actions starting at that
step. Steps too close to the end of their demonstration are skipped. Approach
actions are stored relative to the grasp frame seen at that step, post-grasp
actions relative to the end effector, so a retrieved chunk transfers to a
scene with a different object placement.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .datagen import Dataset, load_dataset
from .expert import Stage
from .se3 import compose, inverse
from .gripper import OPEN
from .world import StepObservation, Task

MODEL_FORMAT = "pseudotactile-policy"
GRIPPER_DIM = 10
_ALIGN_TOL = 1e-6


@dataclass(frozen=True)
class PolicyConfig:
    horizon: int = 8
    execute: int = 4
    gripper_weight: float = 10.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 1 <= self.execute <= self.horizon:
            raise ValueError("execute must lie in [1, horizon]")
        if not self.gripper_weight > 0:
            raise ValueError("gripper_weight must be positive")


@dataclass(frozen=True)
class ActionChunk:
    targets: tuple  # world-frame Pose per step
    commands: tuple
    execute: int
    stage: Stage
    source: tuple  # (demo_id, step) of the retrieved entry

    def __post_init__(self):
        if len(self.targets) != len(self.commands):
            raise ValueError("one gripper command per target")
        if not 1 <= self.execute <= len(self.targets):
            raise ValueError("execute must lie in [1, len(targets)]")

    def __len__(self):
        return len(self.targets)


@dataclass(frozen=True)
class _Entry:
    demo_id: int
    step: int
    stage: Stage
    ee_frame: bool  # targets relative to the end effector (else the grasp frame)
    targets: tuple
    commands: tuple


class PolicyModel:
    """Immutable fitted index; safe to share between rollouts."""

    def __init__(self, keys, entries, mean, std, config: PolicyConfig, dataset_path=None,
                 task: Task | None = None):
        self.keys = keys
        self.keys.setflags(write=False)
        self.entries = tuple(entries)
        self.mean = mean
        self.std = std
        self.config = config
        self.dataset_path = dataset_path
        self.task = task

    def __len__(self):
        return len(self.entries)

    def encode(self, obs: StepObservation) -> np.ndarray:
        return encode(obs.features(), self.mean, self.std, self.config.gripper_weight)


def encode(features, mean, std, gripper_weight) -> np.ndarray:
    z = (np.asarray(features, dtype=float) - mean) / std
    z[..., GRIPPER_DIM] *= gripper_weight
    return z


def fit(dataset: Dataset, config: PolicyConfig | None = None) -> PolicyModel:
    cfg = config or PolicyConfig()
    h = cfg.horizon
    feats, entries = [], []
    for d in dataset.demonstrations:
        steps = d.steps
        for t in range(len(steps) - h):
            s = steps[t]
            obs = s.observation
            ee_frame = s.stage is Stage.POST_GRASP
            frame_inv = inverse(obs.ee_pose if ee_frame else obs.grasp_pose)
            chunk = steps[t: t + h]
            feats.append(obs.features())
            entries.append(
                _Entry(
                    d.demo_id,
                    t,
                    s.stage,
                    ee_frame,
                    tuple(compose(frame_inv, c.target) for c in chunk),
                    tuple(c.command for c in chunk),
                )
            )
    if not entries:
        raise ValueError(f"no demonstration is longer than the horizon ({h} steps)")
    keys = encode(np.array(feats), dataset.feature_mean, dataset.feature_std, cfg.gripper_weight)
    return PolicyModel(keys, entries, dataset.feature_mean, dataset.feature_std, cfg, dataset.path, dataset.task)


def nearest(model: PolicyModel, key: np.ndarray) -> int:
    """Index of the closest key; ``argmin`` keeps the lowest (demo, step) on ties."""
    diff = model.keys - key
    return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def infer(model: PolicyModel, observation: StepObservation) -> ActionChunk:
    e = model.entries[nearest(model, model.encode(observation))]
    frame = observation.ee_pose if e.ee_frame else observation.grasp_pose
    targets, commands = e.targets, e.commands
    if not e.ee_frame:
        targets, commands = _align_progress(targets, commands, observation)
    return ActionChunk(
        tuple(compose(frame, t) for t in targets),
        commands,
        model.config.execute,
        e.stage,
        (e.demo_id, e.step),
    )


def _align_progress(targets, commands, observation: StepObservation):
    """Drop leading approach targets no closer to the grasp than the arm already is.

    The nearest entry may come from a demonstration that was slightly behind
    the current pose; replaying its first targets would pull the arm back and
    can trap the rollout in a retrieve-retreat cycle. Skipped targets are
    replaced by repeating the last one so the chunk keeps its length; commands
    shift with their targets. Only open-gripper targets are ever skipped.
    """
    here = np.linalg.norm(compose(inverse(observation.grasp_pose), observation.ee_pose).translation)
    skip = 0
    while (skip < len(targets) - 1 and commands[skip] == OPEN
           and np.linalg.norm(targets[skip].translation) > here + _ALIGN_TOL):
        skip += 1
    if skip == 0:
        return targets, commands
    return targets[skip:] + (targets[-1],) * skip, commands[skip:] + (commands[-1],) * skip


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def save_model(model: PolicyModel, path) -> None:
    """Persist the dataset reference and parameters; the index is rebuilt on load."""
    if model.dataset_path is None:
        raise ValueError("model was fitted on an in-memory dataset; save the dataset first")
    data = {
        "format": MODEL_FORMAT,
        "version": 1,
        "dataset": os.path.abspath(model.dataset_path),
        "dataset_sha256": _sha256(model.dataset_path),
        "horizon": model.config.horizon,
        "execute": model.config.execute,
        "gripper_weight": model.config.gripper_weight,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> PolicyModel:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a policy file")
    ds_path = data["dataset"]
    if _sha256(ds_path) != data["dataset_sha256"]:
        raise ValueError(f"{path}: dataset {ds_path} changed since the model was trained")
    cfg = PolicyConfig(data["horizon"], data["execute"], data["gripper_weight"])
    return fit(load_dataset(ds_path), cfg)
