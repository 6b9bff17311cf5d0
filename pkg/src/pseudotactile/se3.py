"""Rigid transforms with unit quaternions and capped-speed pose interpolation.

Quaternions are stored scalar-first ``(w, x, y, z)`` and kept on the
``w >= 0`` hemisphere so that the angular distance between two poses is
unambiguous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_IDENTITY_Q = (1.0, 0.0, 0.0, 0.0)


def _canonical(w, x, y, z):
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n == 0.0 or not math.isfinite(n):
        raise ValueError("quaternion must be finite and non-zero")
    # already-unit quaternions are kept bit for bit so that a serialised
    # pose reloads to the identical value
    if abs(n - 1.0) > 1e-12:
        w, x, y, z = w / n, x / n, y / n, z / n
    if w < 0.0 or (w == 0.0 and (x, y, z) < (0.0, 0.0, 0.0)):
        w, x, y, z = -w, -x, -y, -z
    return w, x, y, z


def quat_mul(a, b):
    """Hamilton product of two scalar-first quaternions (plain tuples)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_rotate(q, v):
    """Rotate the 3-vector ``v`` by the unit quaternion ``q``."""
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 * (u x v)
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )


def quat_from_rotvec(rv):
    rx, ry, rz = (float(c) for c in rv)
    angle = math.sqrt(rx * rx + ry * ry + rz * rz)
    if angle < 1e-12:
        # second-order Taylor expansion of sin(a/2)/a
        s = 0.5 - angle * angle / 48.0
        return _canonical(1.0, rx * s, ry * s, rz * s)
    s = math.sin(0.5 * angle) / angle
    return _canonical(math.cos(0.5 * angle), rx * s, ry * s, rz * s)


def quat_to_rotvec(q):
    w, x, y, z = _canonical(*q)
    s = math.sqrt(x * x + y * y + z * z)
    if s < 1e-12:
        return np.array([2.0 * x, 2.0 * y, 2.0 * z])
    angle = 2.0 * math.atan2(s, w)
    return np.array([x, y, z]) * (angle / s)


def quat_angle(q):
    """Rotation angle in ``[0, pi]`` of a unit quaternion."""
    w, x, y, z = q
    return 2.0 * math.atan2(math.sqrt(x * x + y * y + z * z), abs(w))


def quat_from_axis_angle(axis, angle: float):
    a = np.asarray(axis, dtype=float)
    n = float(np.linalg.norm(a))
    if n == 0.0:
        raise ValueError("rotation axis must be non-zero")
    return quat_from_rotvec(a * (angle / n))


def quat_from_matrix(m) -> tuple:
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = (0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
    else:
        s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)
    return _canonical(*q)


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: rotate by ``rotation`` then translate by ``translation``.

    Both fields are plain float tuples so that poses are hashable, cheap to
    compose inside the simulation loop, and exactly reproducible.
    """

    translation: tuple = (0.0, 0.0, 0.0)
    rotation: tuple = _IDENTITY_Q

    def __post_init__(self):
        t = tuple(float(c) for c in self.translation)
        if len(t) != 3 or not all(math.isfinite(c) for c in t):
            raise ValueError(f"translation must be 3 finite numbers, got {self.translation!r}")
        r = tuple(float(c) for c in self.rotation)
        if len(r) != 4:
            raise ValueError(f"rotation must be a 4-element quaternion, got {self.rotation!r}")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", _canonical(*r))

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> Pose:
        return cls((x, y, z))

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> Pose:
        return cls(translation, quat_from_rotvec(rotvec))

    @classmethod
    def from_matrix(cls, rotation, translation=(0.0, 0.0, 0.0)) -> Pose:
        return cls(translation, quat_from_matrix(rotation))

    @classmethod
    def from_array(cls, values) -> Pose:
        """Inverse of :meth:`to_array`: ``(tx, ty, tz, qw, qx, qy, qz)``."""
        v = [float(c) for c in values]
        if len(v) != 7:
            raise ValueError("a serialized pose has exactly 7 numbers")
        return cls(tuple(v[:3]), tuple(v[3:]))

    def to_array(self) -> np.ndarray:
        return np.array(self.translation + self.rotation)

    def to_list(self) -> list:
        return list(self.translation + self.rotation)

    @property
    def position(self) -> np.ndarray:
        return np.array(self.translation)

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def rotvec(self) -> np.ndarray:
        return quat_to_rotvec(self.rotation)

    def apply(self, point):
        """Map a point given in this frame into the parent frame."""
        rx, ry, rz = quat_rotate(self.rotation, point)
        tx, ty, tz = self.translation
        return (rx + tx, ry + ty, rz + tz)

    def __matmul__(self, other: Pose) -> Pose:
        return compose(self, other)

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return self.translation == other.translation and self.rotation == other.rotation

    def __hash__(self):
        return hash((self.translation, self.rotation))

    def __repr__(self):
        t = ", ".join(f"{c:.6g}" for c in self.translation)
        q = ", ".join(f"{c:.6g}" for c in self.rotation)
        return f"Pose(t=({t}), q=({q}))"


def compose(a: Pose, b: Pose) -> Pose:
    """Transform that applies ``b`` first and then ``a`` (``a @ b``)."""
    return Pose(a.apply(b.translation), quat_mul(a.rotation, b.rotation))


def inverse(p: Pose) -> Pose:
    w, x, y, z = p.rotation
    qi = (w, -x, -y, -z)
    tx, ty, tz = quat_rotate(qi, p.translation)
    return Pose((-tx, -ty, -tz), qi)


def translation_distance(a: Pose, b: Pose) -> float:
    return math.dist(a.translation, b.translation)


def rotation_distance(a: Pose, b: Pose) -> float:
    """Geodesic angle between the orientations of ``a`` and ``b``."""
    w, x, y, z = a.rotation
    return quat_angle(quat_mul((w, -x, -y, -z), b.rotation))


def slerp(q0, q1, s: float):
    """Shortest-arc spherical interpolation, ``s`` in ``[0, 1]``."""
    w, x, y, z = q0
    rel = _canonical(*quat_mul((w, -x, -y, -z), q1))
    rv = quat_to_rotvec(rel)
    return _canonical(*quat_mul(q0, quat_from_rotvec(rv * s)))


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled pose sequence; waypoint ``i`` sits at ``t0 + i * dt``."""

    poses: tuple
    dt: float
    t0: float = 0.0
    times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not self.poses:
            raise ValueError("a trajectory needs at least one waypoint")
        object.__setattr__(self, "poses", tuple(self.poses))
        object.__setattr__(self, "times", self.t0 + self.dt * np.arange(len(self.poses)))

    def __len__(self):
        return len(self.poses)

    def __getitem__(self, i) -> Pose:
        return self.poses[i]

    def __iter__(self):
        return iter(self.poses)

    @property
    def waypoints(self) -> list:
        return list(zip(self.times.tolist(), self.poses))

    @property
    def duration(self) -> float:
        return self.dt * (len(self.poses) - 1)

    def then(self, other: Trajectory) -> Trajectory:
        """Append ``other``, dropping its first waypoint (assumed to equal our last)."""
        return Trajectory(self.poses + other.poses[1:], self.dt, self.t0)


def interpolate(
    start: Pose, end: Pose, dt: float, linear_speed: float, angular_speed: float
) -> Trajectory:
    """Straight-line, shortest-arc trajectory from ``start`` to ``end``.

    The number of steps is the smallest integer keeping every step within
    ``linear_speed * dt`` metres and ``angular_speed * dt`` radians. The first
    and last waypoints are ``start`` and ``end`` exactly.
    """
    if not (dt > 0 and linear_speed > 0 and angular_speed > 0):
        raise ValueError("dt and speed caps must be positive")
    dist = translation_distance(start, end)
    angle = rotation_distance(start, end)
    duration = max(dist / linear_speed, angle / angular_speed)
    # the tolerance absorbs round-off in exact multiples (0.3 / 0.1 / 0.05 -> 60)
    n = math.ceil(duration / dt - 1e-9)
    if start == end:
        return Trajectory((start,), dt)
    n = max(n, 1)

    p0 = np.array(start.translation)
    dp = np.array(end.translation) - p0
    w, x, y, z = start.rotation
    rv = quat_to_rotvec(quat_mul((w, -x, -y, -z), end.rotation))
    poses = [start]
    for i in range(1, n):
        s = i / n
        poses.append(Pose(p0 + s * dp, quat_mul(start.rotation, quat_from_rotvec(rv * s))))
    poses.append(end)
    return Trajectory(tuple(poses), dt)
