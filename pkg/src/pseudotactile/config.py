"""Flat ``key = value`` experiment configuration.

Lines starting with ``#`` are comments. Every key has a default; unknown keys
and malformed values raise :class:`ConfigError` naming the field.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields, replace

import numpy as np

from .admittance import AdmittanceParams
from .gripper import GripperModel
from .policy import PolicyConfig
from .tactile import ControllerConfig
from .world import Task, WorldConfig

ENV_VAR = "PSEUDOTACTILE_CONFIG"


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "oven"
    seed: int = 0
    n_demos: int = 200
    disturb_fraction: float = 0.0
    ablation_disturb_fraction: float = 0.3
    # randomisation
    planar_range: float = 0.10
    yaw_range_deg: float = 15.0
    start_range: float = 0.05
    hinge_offset: float = 0.01
    # simulation
    dt: float = 0.05
    timeout: float = 30.0
    constraint_gain: float = 2000.0
    admittance_enabled: bool = True
    admittance_substeps: int = 10
    mass_linear: float = 1.0
    mass_angular: float = 0.1
    damping_linear: float = 40.0
    damping_angular: float = 4.0
    stiffness_linear: float = 400.0
    stiffness_angular: float = 40.0
    # gripper and controller
    gripper_stroke: float = 0.085
    closing_rate: float = 2.0
    angle_epsilon: float = 0.02
    feedback: bool = True
    reopen_latency: int = 1
    # policy
    horizon: int = 8
    execute: int = 4
    gripper_weight: float = 10.0
    # benchmark
    n_per_arm: int = 25
    recovery_window: float = 3.0
    jobs: int = 0  # 0 means one per available core
    out_dir: str = "runs"

    def validate(self) -> ExperimentConfig:
        try:
            Task.parse(self.task)
        except ValueError as exc:
            raise ConfigError("task", str(exc)) from None
        checks = {
            "n_demos": self.n_demos >= 1,
            "disturb_fraction": 0.0 <= self.disturb_fraction <= 1.0,
            "ablation_disturb_fraction": 0.0 < self.ablation_disturb_fraction <= 1.0,
            "planar_range": self.planar_range >= 0,
            "yaw_range_deg": 0 <= self.yaw_range_deg < 180,
            "start_range": self.start_range >= 0,
            "hinge_offset": math.isfinite(self.hinge_offset),
            "dt": 0 < self.dt <= 0.1,
            "timeout": self.timeout > 0,
            "constraint_gain": self.constraint_gain > 0,
            "admittance_substeps": self.admittance_substeps >= 1,
            "mass_linear": self.mass_linear > 0,
            "mass_angular": self.mass_angular > 0,
            "damping_linear": self.damping_linear > 0,
            "damping_angular": self.damping_angular > 0,
            "stiffness_linear": self.stiffness_linear > 0,
            "stiffness_angular": self.stiffness_angular > 0,
            "gripper_stroke": self.gripper_stroke > 0,
            "closing_rate": self.closing_rate > 0,
            "angle_epsilon": 0 < self.angle_epsilon < 1,
            "reopen_latency": self.reopen_latency >= 1,
            "horizon": self.horizon >= 1,
            "execute": 1 <= self.execute <= self.horizon,
            "gripper_weight": self.gripper_weight > 0,
            "n_per_arm": self.n_per_arm >= 1,
            "recovery_window": self.recovery_window > 0,
            "jobs": self.jobs >= 0,
        }
        for name, ok in checks.items():
            if not ok:
                raise ConfigError(name, f"invalid value {getattr(self, name)!r}")
        for build in (self.world_config, self.policy_config, self.controller_config):
            try:
                build()
            except ValueError as exc:
                raise ConfigError(build.__name__.replace("_config", ""), str(exc)) from None
        return self

    @property
    def task_enum(self) -> Task:
        return Task.parse(self.task)

    @property
    def n_jobs(self) -> int:
        return self.jobs or (os.cpu_count() or 1)

    def world_config(self) -> WorldConfig:
        lin_ang = lambda a, b: np.array([a, a, a, b, b, b])  # noqa: E731
        return WorldConfig(
            dt=self.dt,
            gripper=GripperModel(self.gripper_stroke, self.closing_rate, 1.0, self.angle_epsilon),
            admittance=AdmittanceParams(
                lin_ang(self.mass_linear, self.mass_angular),
                lin_ang(self.damping_linear, self.damping_angular),
                lin_ang(self.stiffness_linear, self.stiffness_angular),
            ),
            admittance_enabled=self.admittance_enabled,
            substeps=self.admittance_substeps,
            constraint_gain=self.constraint_gain,
            hinge_offset=self.hinge_offset,
            planar_range=self.planar_range,
            yaw_range=math.radians(self.yaw_range_deg),
            start_range=self.start_range,
            timeout=self.timeout,
        )

    def policy_config(self) -> PolicyConfig:
        return PolicyConfig(self.horizon, self.execute, self.gripper_weight)

    def controller_config(self) -> ControllerConfig:
        return ControllerConfig(self.feedback, self.reopen_latency)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, raw):
    kind = _FIELDS[name].type
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"expected a boolean, got {text!r}")
        if kind == "int":
            return int(text)
        if kind == "float":
            v = float(text)
            if not math.isfinite(v):
                raise ValueError("must be finite")
            return v
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None
    return text


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected key = value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(key, f"unknown key in {source}:{lineno}")
        values[key] = _coerce(key, raw)
    return values


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file (``path`` or ``$PSEUDOTACTILE_CONFIG``), then ``overrides``."""
    path = path or os.environ.get(ENV_VAR) or None
    values = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                values.update(parse_config_text(fh.read(), str(path)))
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    for key, v in (overrides or {}).items():
        if v is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(key, "unknown key")
        values[key] = _coerce(key, v)
    return replace(ExperimentConfig(), **values).validate()


def dump_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in fields(cfg))
