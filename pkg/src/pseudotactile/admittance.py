"""Admittance control of the end effector.

The commanded pose ``x_d`` is tracked exactly unless an external wrench acts
on the end effector, in which case the compliant pose ``x_c`` deviates from it
according to the mass-spring-damper error dynamics

    M (xdd_c - xdd_d) + D (xd_c - xd_d) + K (x_c - x_d) = F_ext

with diagonal ``M``, ``D`` and ``K``. The state is kept in error coordinates
(``x_c - x_d`` and its rate), so with zero wrench and zero initial error the
compliant pose equals the desired pose bit for bit.

6-vectors are ordered ``(x, y, z, rx, ry, rz)``; rotations are rotation
vectors of the offset applied on the left of the desired orientation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .se3 import Pose, quat_from_rotvec, quat_mul


def _vec6(v, name):
    a = np.array(v, dtype=float).reshape(-1)
    if a.shape != (6,):
        raise ValueError(f"{name} must have 6 entries")
    return a


@dataclass(frozen=True, eq=False)
class AdmittanceParams:
    mass: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0, 1.0, 0.1, 0.1, 0.1]))
    damping: np.ndarray = field(default_factory=lambda: np.array([40.0, 40.0, 40.0, 4.0, 4.0, 4.0]))
    stiffness: np.ndarray = field(
        default_factory=lambda: np.array([400.0, 400.0, 400.0, 40.0, 40.0, 40.0])
    )

    def __post_init__(self):
        for name in ("mass", "damping", "stiffness"):
            a = _vec6(getattr(self, name), name)
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise ValueError(f"{name} entries must be finite and strictly positive")
            object.__setattr__(self, name, a)

    def __eq__(self, other):
        if not isinstance(other, AdmittanceParams):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, n), getattr(other, n)) for n in ("mass", "damping", "stiffness")
        )

    def __hash__(self):
        return hash(tuple(tuple(getattr(self, n)) for n in ("mass", "damping", "stiffness")))

    @classmethod
    def uniform(cls, mass: float, damping: float, stiffness: float) -> AdmittanceParams:
        return cls(np.full(6, mass), np.full(6, damping), np.full(6, stiffness))


@dataclass(frozen=True)
class Wrench:
    force: tuple = (0.0, 0.0, 0.0)
    torque: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        f = tuple(float(c) for c in self.force)
        t = tuple(float(c) for c in self.torque)
        if len(f) != 3 or len(t) != 3:
            raise ValueError("force and torque are 3-vectors")
        if not all(math.isfinite(c) for c in f + t):
            raise ValueError("wrench entries must be finite")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "torque", t)

    def as_array(self) -> np.ndarray:
        return np.array(self.force + self.torque)

    def norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.force + self.torque))

    @property
    def is_zero(self) -> bool:
        return not any(self.force) and not any(self.torque)


ZERO_WRENCH = Wrench()


@dataclass(frozen=True)
class AdmittanceState:
    """Compliant pose and velocity, both relative to the desired trajectory."""

    x_c: np.ndarray = field(default_factory=lambda: np.zeros(6))
    xdot_c: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        x = _vec6(self.x_c, "x_c")
        v = _vec6(self.xdot_c, "xdot_c")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("admittance state diverged (non-finite entries)")
        if np.linalg.norm(x[3:]) >= math.pi - 1e-6:
            raise ValueError("rotational compliance offset too close to pi")
        object.__setattr__(self, "x_c", x)
        object.__setattr__(self, "xdot_c", v)

    @property
    def at_rest(self) -> bool:
        return not self.x_c.any() and not self.xdot_c.any()


@dataclass(frozen=True)
class DesiredPoint:
    x_d: np.ndarray
    xdot_d: np.ndarray = field(default_factory=lambda: np.zeros(6))
    xddot_d: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        for name in ("x_d", "xdot_d", "xddot_d"):
            a = _vec6(getattr(self, name), name)
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, a)


def admittance_step(
    params: AdmittanceParams,
    state: AdmittanceState,
    f_ext: Wrench,
    dt: float,
    substeps: int = 10,
) -> AdmittanceState:
    """Semi-implicit Euler update of the decoupled error dynamics.

    ``dt`` is split into ``substeps`` equal integration steps.
    """
    if not 0.0 < dt <= 0.1:
        raise ValueError(f"dt must lie in (0, 0.1], got {dt}")
    f = f_ext.as_array()
    h = dt / substeps
    e = state.x_c.copy()
    v = state.xdot_c.copy()
    inv_m = 1.0 / params.mass
    for _ in range(substeps):
        a = inv_m * (f - params.damping * v - params.stiffness * e)
        v = v + h * a
        e = e + h * v
    return AdmittanceState(e, v)


def spring_offset(params: AdmittanceParams, f_ext: Wrench) -> np.ndarray:
    """Steady-state compliant offset ``K^-1 F_ext``."""
    return f_ext.as_array() / params.stiffness


def compliant_point(desired: DesiredPoint, state: AdmittanceState, params: AdmittanceParams,
                    f_ext: Wrench) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Absolute ``(x_c, xdot_c, xddot_c)`` for a desired point and error state."""
    e, v = state.x_c, state.xdot_c
    a = (f_ext.as_array() - params.damping * v - params.stiffness * e) / params.mass
    return desired.x_d + e, desired.xdot_d + v, desired.xddot_d + a


def offset_pose(desired: Pose, offset) -> Pose:
    """Apply a 6-vector compliant offset to a desired pose."""
    ox, oy, oz, rx, ry, rz = (float(c) for c in offset)
    tx, ty, tz = desired.translation
    if rx == 0.0 and ry == 0.0 and rz == 0.0:
        rot = desired.rotation
    else:
        rot = quat_mul(quat_from_rotvec((rx, ry, rz)), desired.rotation)
    return Pose((tx + ox, ty + oy, tz + oz), rot)
