"""Quaternion and rigid-transform helpers shared across the toolkit.

Conventions, stated once:
  - quaternions are [w, x, y, z], unit norm, float64
  - rotations are right-handed about the given axis
  - a rigid transform is (translation, quaternion) applied as p' = R(q) p + t
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

UNIT_TOL = 1e-9


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n < 1e-12:
        raise ValueError("cannot normalize near-zero quaternion")
    return q / n


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate 3-vector v by unit quaternion q (no matrix round trip)."""
    w = q[0]
    u = np.asarray(q[1:], dtype=float)
    v = np.asarray(v, dtype=float)
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    half = 0.5 * angle
    s = math.sin(half)
    return np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_matrix(m) -> np.ndarray:
    """Rotation matrix to unit quaternion, w kept non-negative."""
    m = np.asarray(m, dtype=float)
    t = np.trace(m)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    else:
        i = int(np.argmax([m[0, 0], m[1, 1], m[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def quat_angle(q) -> float:
    """Rotation angle in [0, pi] of a unit quaternion."""
    v = math.sqrt(float(q[1] ** 2 + q[2] ** 2 + q[3] ** 2))
    return 2.0 * math.atan2(v, abs(float(q[0])))


def quat_log_vector(q) -> np.ndarray:
    """Axis-angle vector (angle * unit axis) of the shortest arc of q."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0:
        q = -q
    v = q[1:]
    n = math.sqrt(float(v @ v))
    if n < 1e-12:
        return np.zeros(3)
    angle = 2.0 * math.atan2(n, float(q[0]))
    return (angle / n) * v


def quat_distance(a, b) -> float:
    """Sign-insensitive euclidean distance between unit quaternions."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def quat_slerp(a, b, u: float) -> np.ndarray:
    """Shortest-arc spherical interpolation between unit quaternions."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dot = float(a @ b)
    if dot < 0:
        b = -b
        dot = -dot
    if dot > 1.0 - 1e-12:
        return quat_normalize(a + u * (b - a))
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    return quat_normalize((math.sin((1 - u) * theta) / s) * a
                          + (math.sin(u * theta) / s) * b)


@dataclass(frozen=True)
class Transform:
    """Rigid transform: rotation q then translation t (p' = R(q) p + t)."""

    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float).reshape(3).copy())
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(4).copy())
        self.t.flags.writeable = False
        self.q.flags.writeable = False

    @staticmethod
    def identity() -> "Transform":
        return Transform()

    def compose(self, other: "Transform") -> "Transform":
        return Transform(self.t + quat_rotate(self.q, other.t),
                         quat_normalize(quat_mul(self.q, other.q)))

    def inverse(self) -> "Transform":
        qi = quat_conj(self.q)
        return Transform(-quat_rotate(qi, self.t), qi)

    def apply(self, p) -> np.ndarray:
        return self.t + quat_rotate(self.q, p)

    def rotate(self, v) -> np.ndarray:
        return quat_rotate(self.q, v)

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.q)
        m[:3, 3] = self.t
        return m
