"""Kinematic chain data model, default 7-DoF arm profile, FK and Jacobian.

The chain is pure data: an ordered list of revolute joints, each with a
fixed rigid offset from its parent frame, a rotation axis in its own frame
and position limits. The joint rotation is applied after the fixed offset:

    pose = base o (offset_1 o Rot(axis_1, q_1)) o ... o (offset_N o Rot(axis_N, q_N)) o tool

Chains are immutable after construction and safe to share across tasks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import (
    Transform,
    UNIT_TOL,
    quat_from_matrix,
    quat_normalize,
    quat_to_matrix,
)


@dataclass(frozen=True)
class Pose:
    """End-effector pose: position in meters, orientation as a unit quaternion."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3).copy()
        q = np.asarray(self.orientation, dtype=float).reshape(4).copy()
        if abs(np.linalg.norm(q) - 1.0) > UNIT_TOL:
            raise ValueError("orientation quaternion is not unit norm")
        p.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    def as_transform(self) -> Transform:
        return Transform(self.position, self.orientation)


@dataclass(frozen=True)
class JointSpec:
    """One revolute joint: rotation axis in its own frame plus position limits.

    offset is the fixed transform from the parent joint frame to this joint's
    frame at zero angle.
    """

    name: str
    axis: np.ndarray
    limit_lo: float
    limit_hi: float
    offset: Transform = field(default_factory=Transform.identity)

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float).reshape(3).copy()
        if abs(np.linalg.norm(a) - 1.0) > UNIT_TOL:
            raise ValueError(f"joint {self.name!r}: axis is not unit norm")
        if not self.limit_lo < self.limit_hi:
            raise ValueError(f"joint {self.name!r}: limit_lo must be < limit_hi")
        if abs(np.linalg.norm(self.offset.q) - 1.0) > UNIT_TOL:
            raise ValueError(f"joint {self.name!r}: offset quaternion is not unit norm")
        a.flags.writeable = False
        object.__setattr__(self, "axis", a)


class KinematicChain:
    """Ordered revolute chain with a base and a tool transform."""

    def __init__(self, joints: Sequence[JointSpec],
                 base: Transform | None = None,
                 tool: Transform | None = None):
        joints = tuple(joints)
        names = [j.name for j in joints]
        if len(set(names)) != len(names):
            raise ValueError("joint names must be unique")
        self.joints = joints
        self.base = base if base is not None else Transform.identity()
        self.tool = tool if tool is not None else Transform.identity()
        self._lo = np.array([j.limit_lo for j in joints])
        self._hi = np.array([j.limit_hi for j in joints])
        self._precompute()

    def _precompute(self):
        """Cache per-joint arrays so the FK/Jacobian path stays allocation-light."""
        n = len(self.joints)
        axes = np.array([j.axis for j in self.joints]).reshape(n, 3)
        self._axes = axes
        self._off_R = np.array([quat_to_matrix(j.offset.q) for j in self.joints]
                               ).reshape(n, 3, 3)
        self._off_t = np.array([j.offset.t for j in self.joints]).reshape(n, 3)
        # joint axis expressed in the parent frame (offset rotation applied)
        self._axis_parent = np.einsum("nij,nj->ni", self._off_R, axes)
        K = np.zeros((n, 3, 3))
        K[:, 0, 1] = -axes[:, 2]
        K[:, 0, 2] = axes[:, 1]
        K[:, 1, 0] = axes[:, 2]
        K[:, 1, 2] = -axes[:, 0]
        K[:, 2, 0] = -axes[:, 1]
        K[:, 2, 1] = axes[:, 0]
        self._K = K
        self._K2 = K @ K
        self._base_R = quat_to_matrix(self.base.q)
        self._base_t = np.asarray(self.base.t)
        self._tool_R = quat_to_matrix(self.tool.q)
        self._tool_t = np.asarray(self.tool.t)

    def __len__(self) -> int:
        return len(self.joints)

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    @property
    def limits_lo(self) -> np.ndarray:
        return self._lo.copy()

    @property
    def limits_hi(self) -> np.ndarray:
        return self._hi.copy()

    def _check_length(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != len(self.joints):
            raise ValueError(f"expected {len(self.joints)} joint values, got {q.shape[0]}")
        return q


# The nominal profile: ranges match the arm hardware description, limits are
# centered about zero, and link lengths are configurable approximations of a
# medium-sized human arm. None of the lengths are asserted as ground truth.
_DEFAULT_PROFILE = {
    "upper_arm": 0.28,
    "forearm": 0.25,
    "hand_offset": 0.10,
    "ranges_deg": {
        "shoulder_pitch": 180.0,
        "shoulder_roll": 180.0,
        "shoulder_yaw": 120.0,
        "elbow_pitch": 127.0,
        "wrist_yaw": 180.0,
        "wrist_roll": 40.0,
        "wrist_pitch": 45.0,
    },
}

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])


def open_arms_chain(profile: str | dict = "default") -> KinematicChain:
    """Build the 7-DoF arm chain.

    profile is either "default" or a dict overriding any of upper_arm,
    forearm, hand_offset (meters) and ranges_deg (per-joint full spans).
    At zero angles the arm hangs along -z with the tool at
    (0, 0, -(upper_arm + forearm + hand_offset)).
    """
    if isinstance(profile, str):
        if profile != "default":
            raise ValueError(f"unknown chain profile {profile!r}")
        params = _DEFAULT_PROFILE
    elif isinstance(profile, dict):
        params = dict(_DEFAULT_PROFILE, **profile)
        ranges = dict(_DEFAULT_PROFILE["ranges_deg"])
        ranges.update(profile.get("ranges_deg", {}))
        params["ranges_deg"] = ranges
    else:
        raise ValueError("profile must be a name or a parameter dict")

    spans = {k: math.radians(v) for k, v in params["ranges_deg"].items()}

    def lim(name):
        half = 0.5 * spans[name]
        return {"limit_lo": -half, "limit_hi": half}

    upper = float(params["upper_arm"])
    fore = float(params["forearm"])
    hand = float(params["hand_offset"])

    joints = [
        JointSpec("shoulder_pitch", _Y, **lim("shoulder_pitch")),
        JointSpec("shoulder_roll", _X, **lim("shoulder_roll")),
        JointSpec("shoulder_yaw", _Z, **lim("shoulder_yaw")),
        JointSpec("elbow_pitch", _Y, offset=Transform([0.0, 0.0, -upper]),
                  **lim("elbow_pitch")),
        JointSpec("wrist_yaw", _Z, **lim("wrist_yaw")),
        JointSpec("wrist_roll", _X, offset=Transform([0.0, 0.0, -fore]),
                  **lim("wrist_roll")),
        JointSpec("wrist_pitch", _Y, **lim("wrist_pitch")),
    ]
    return KinematicChain(joints, tool=Transform([0.0, 0.0, -hand]))


def _joint_rotations(chain: KinematicChain, q: np.ndarray) -> np.ndarray:
    """Rodrigues rotation matrices for all joints at once, shape (N, 3, 3)."""
    s = np.sin(q)
    c = 1.0 - np.cos(q)
    R = chain._K * s[:, None, None] + chain._K2 * c[:, None, None]
    R[:, 0, 0] += 1.0
    R[:, 1, 1] += 1.0
    R[:, 2, 2] += 1.0
    return R


def _fk_raw(chain: KinematicChain, q: np.ndarray):
    """Core FK pass.

    Returns (p_tool, R_tool, P, Z) where P[i]/Z[i] are world origin and
    world axis of joint i, taken after the fixed offset and before the
    joint's own rotation (rotating joint i leaves them fixed).
    """
    n = len(chain.joints)
    # per-joint transform after combining fixed offset and joint rotation
    M = chain._off_R @ _joint_rotations(chain, q)
    P = np.empty((n, 3))
    Z = np.empty((n, 3))
    R = chain._base_R
    p = chain._base_t
    for i in range(n):
        p = p + R @ chain._off_t[i]
        P[i] = p
        Z[i] = R @ chain._axis_parent[i]
        R = R @ M[i]
    p_tool = p + R @ chain._tool_t
    R_tool = R @ chain._tool_R
    return p_tool, R_tool, P, Z


def forward_kinematics(chain: KinematicChain, q) -> Pose:
    """Pose of the tool frame for joint values q (radians).

    Defined for all angles; q is not required to be inside limits.
    """
    q = chain._check_length(q)
    p_tool, R_tool, _, _ = _fk_raw(chain, q)
    return Pose(p_tool, quat_from_matrix(R_tool))


def fk_joint_frames(chain: KinematicChain, q):
    """World origin and world axis of every joint, plus the tool pose."""
    q = chain._check_length(q)
    p_tool, R_tool, P, Z = _fk_raw(chain, q)
    return list(P), list(Z), Pose(p_tool, quat_from_matrix(R_tool))


def jacobian(chain: KinematicChain, q) -> np.ndarray:
    """Geometric Jacobian, 6 x N in the world frame.

    Column i is (z_i x (p_tool - p_i), z_i): rows 0-2 linear velocity,
    rows 3-5 angular velocity.
    """
    q = chain._check_length(q)
    p_tool, _, P, Z = _fk_raw(chain, q)
    J = np.empty((6, len(chain.joints)))
    J[:3] = np.cross(Z, p_tool[None, :] - P).T
    J[3:] = Z.T
    return J


def fk_and_jacobian(chain: KinematicChain, q) -> tuple[Pose, np.ndarray]:
    """Single-pass FK plus Jacobian."""
    q = chain._check_length(q)
    p_tool, R_tool, P, Z = _fk_raw(chain, q)
    J = np.empty((6, len(chain.joints)))
    J[:3] = np.cross(Z, p_tool[None, :] - P).T
    J[3:] = Z.T
    return Pose(p_tool, quat_from_matrix(R_tool)), J


def clamp_to_limits(chain: KinematicChain, q) -> np.ndarray:
    """Clamp each joint value into [limit_lo, limit_hi]."""
    q = chain._check_length(q)
    return np.clip(q, chain._lo, chain._hi)


# ----------------------------------------------------------------------------
# Chain config file format: UTF-8, line oriented key/value grouped in sections.
# See docs/formats.md for the grammar. Example:
#
#   [base]
#   translation 0 0 0
#   quaternion 1 0 0 0
#   [joint shoulder_pitch]
#   axis 0 1 0
#   offset_translation 0 0 0
#   offset_quaternion 1 0 0 0
#   limit_lo_deg -90
#   limit_hi_deg 90
#   [tool]
#   translation 0 0 -0.1
#   quaternion 1 0 0 0

_JOINT_FIELDS = ("axis", "offset_translation", "offset_quaternion",
                 "limit_lo_deg", "limit_hi_deg")


class ChainConfigError(ValueError):
    pass


def parse_chain_config(text: str) -> KinematicChain:
    """Parse the chain config file format; rejects missing or malformed fields."""
    base = Transform.identity()
    tool = Transform.identity()
    joints: list[JointSpec] = []
    section = None          # "base" | "tool" | ("joint", name)
    fields: dict[str, list[float]] = {}

    def close_section():
        nonlocal base, tool
        if section is None:
            return
        if section == "base" or section == "tool":
            t = fields.get("translation", [0.0, 0.0, 0.0])
            qv = fields.get("quaternion", [1.0, 0.0, 0.0, 0.0])
            if len(t) != 3 or len(qv) != 4:
                raise ChainConfigError(f"[{section}] translation/quaternion arity")
            tr = Transform(t, quat_normalize(qv))
            if section == "base":
                base = tr
            else:
                tool = tr
        else:
            _, name = section
            missing = [f for f in _JOINT_FIELDS if f not in fields]
            if missing:
                raise ChainConfigError(f"joint {name!r}: missing fields {missing}")
            axis = fields["axis"]
            t = fields["offset_translation"]
            qv = fields["offset_quaternion"]
            if len(axis) != 3 or len(t) != 3 or len(qv) != 4:
                raise ChainConfigError(f"joint {name!r}: field arity")
            lo = fields["limit_lo_deg"]
            hi = fields["limit_hi_deg"]
            if len(lo) != 1 or len(hi) != 1:
                raise ChainConfigError(f"joint {name!r}: limits must be single values")
            axis = np.asarray(axis, dtype=float)
            n = np.linalg.norm(axis)
            if n < 1e-12:
                raise ChainConfigError(f"joint {name!r}: zero axis")
            joints.append(JointSpec(
                name=name,
                axis=axis / n,
                limit_lo=math.radians(lo[0]),
                limit_hi=math.radians(hi[0]),
                offset=Transform(t, quat_normalize(qv)),
            ))

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ChainConfigError(f"line {lineno}: unterminated section header")
            close_section()
            fields = {}
            header = line[1:-1].strip()
            if header in ("base", "tool"):
                section = header
            elif header.startswith("joint "):
                name = header[len("joint "):].strip()
                if not name:
                    raise ChainConfigError(f"line {lineno}: joint section needs a name")
                section = ("joint", name)
            else:
                raise ChainConfigError(f"line {lineno}: unknown section [{header}]")
            continue
        if section is None:
            raise ChainConfigError(f"line {lineno}: key/value outside any section")
        parts = line.split()
        key, values = parts[0], parts[1:]
        if not values:
            raise ChainConfigError(f"line {lineno}: key {key!r} has no values")
        try:
            fields[key] = [float(v) for v in values]
        except ValueError as exc:
            raise ChainConfigError(f"line {lineno}: non-numeric value for {key!r}") from exc
    close_section()

    if not joints:
        raise ChainConfigError("config defines no joints")
    return KinematicChain(joints, base=base, tool=tool)


def format_chain_config(chain: KinematicChain) -> str:
    """Serialize a chain into the config file format (degrees for limits)."""
    def vec(v):
        return " ".join(f"{x:.17g}" for x in v)

    lines = ["[base]",
             f"translation {vec(chain.base.t)}",
             f"quaternion {vec(chain.base.q)}"]
    for j in chain.joints:
        lines += [
            f"[joint {j.name}]",
            f"axis {vec(j.axis)}",
            f"offset_translation {vec(j.offset.t)}",
            f"offset_quaternion {vec(j.offset.q)}",
            f"limit_lo_deg {math.degrees(j.limit_lo):.17g}",
            f"limit_hi_deg {math.degrees(j.limit_hi):.17g}",
        ]
    lines += ["[tool]",
              f"translation {vec(chain.tool.t)}",
              f"quaternion {vec(chain.tool.q)}"]
    return "\n".join(lines) + "\n"
