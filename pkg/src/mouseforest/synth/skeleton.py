"""24-joint kinematic mouse.

Joint ids run 1..24 and are stored at index ``id - 1``.  The body frame has
x pointing forward (toward the nose), y to the mouse's left and z up, in mm.
Joint 5 (mid spine) is the root.  Each joint's three angles rotate the bone
that ends at that joint, and the rotation is inherited by everything further
down the chain.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.transform import Rotation

N_JOINTS = 24
ROOT = 5
SPINE_HEIGHT = 22.0  # mm above the floor at scale 1
PIVOT_X = -15.0  # body-frame x of the point the global rotation turns about

# joint id -> (parent id, rest offset from parent in the body frame)
_REST = {
    5: (0, (0.0, 0.0, 0.0)),
    4: (5, (16.0, 0.0, 0.0)),
    3: (4, (16.0, 0.0, 0.0)),
    2: (3, (13.0, 0.0, 0.0)),
    1: (2, (15.0, 0.0, 0.0)),
    6: (5, (-40.0, 0.0, 0.0)),
    7: (6, (-25.0, 0.0, -10.0)),
    8: (7, (-25.0, 0.0, -8.0)),
    9: (2, (-3.0, 9.0, 6.0)),
    10: (2, (-3.0, -9.0, 6.0)),
    11: (6, (4.0, 9.0, -3.0)),
    12: (6, (4.0, -9.0, -3.0)),
    13: (4, (2.0, 8.0, -6.0)),
    14: (13, (-2.0, 0.0, -8.0)),
    15: (4, (2.0, -8.0, -6.0)),
    16: (15, (-2.0, 0.0, -8.0)),
    17: (11, (6.0, 2.0, -8.0)),
    18: (17, (-6.0, 0.0, -8.0)),
    19: (12, (6.0, -2.0, -8.0)),
    20: (19, (-6.0, 0.0, -8.0)),
    21: (14, (3.0, 0.0, -8.0)),
    22: (16, (3.0, 0.0, -8.0)),
    23: (18, (4.0, 0.0, -3.0)),
    24: (20, (4.0, 0.0, -3.0)),
}

# per-joint angle limits (roll, pitch, yaw) in radians; joints not listed are rigid
_LIMITS = {
    4: ((0, 0), (-0.45, 0.3), (-0.35, 0.35)),
    3: ((0, 0), (-0.45, 0.3), (-0.35, 0.35)),
    2: ((-0.2, 0.2), (-0.5, 0.5), (-0.5, 0.5)),
    1: ((0, 0), (-0.4, 0.4), (-0.3, 0.3)),
    6: ((0, 0), (-0.3, 0.3), (-0.4, 0.4)),
    7: ((0, 0), (-0.4, 0.3), (-0.8, 0.8)),
    8: ((0, 0), (-0.4, 0.3), (-0.8, 0.8)),
    14: ((0, 0), (-0.7, 0.7), (-0.3, 0.3)),
    16: ((0, 0), (-0.7, 0.7), (-0.3, 0.3)),
    21: ((0, 0), (-0.6, 0.6), (0, 0)),
    22: ((0, 0), (-0.6, 0.6), (0, 0)),
    17: ((0, 0), (-0.6, 0.6), (-0.3, 0.3)),
    19: ((0, 0), (-0.6, 0.6), (-0.3, 0.3)),
    18: ((0, 0), (-0.6, 0.6), (0, 0)),
    20: ((0, 0), (-0.6, 0.6), (0, 0)),
}

# left/right counterparts, used for mirroring
MIRROR_PAIRS = ((9, 10), (11, 12), (13, 15), (14, 16), (21, 22), (17, 19), (18, 20), (23, 24))

MAIN_JOINTS = tuple(range(1, 13))  # spine 1-6, tail 7-8, ears 9-10, hips 11-12
FORE_LEFT = (13, 14, 21)
FORE_RIGHT = (15, 16, 22)
HIND_LEFT = (17, 18, 23)
HIND_RIGHT = (19, 20, 24)
PAWS = (21, 22, 23, 24)


def _mirror_index() -> np.ndarray:
    idx = np.arange(N_JOINTS)
    for a, b in MIRROR_PAIRS:
        idx[a - 1], idx[b - 1] = b - 1, a - 1
    return idx


MIRROR_INDEX = _mirror_index()


@dataclass(frozen=True)
class SkeletonModel:
    parents: np.ndarray  # (24,) parent id, 0 for the root
    rest: np.ndarray  # (24, 3) rest bone vectors
    limits: np.ndarray  # (24, 3, 2) angle limits

    def __post_init__(self):
        if self.parents.shape != (N_JOINTS,) or self.rest.shape != (N_JOINTS, 3):
            raise ValueError("a skeleton has exactly 24 joints")
        roots = np.flatnonzero(self.parents == 0)
        if len(roots) != 1:
            raise ValueError("skeleton needs exactly one root")
        order = self.order
        if len(order) != N_JOINTS:
            raise ValueError("skeleton parents contain a cycle")
        lengths = np.linalg.norm(self.rest, axis=1)
        if np.any(np.delete(lengths, roots) <= 0):
            raise ValueError("bone lengths must be positive")

    @property
    def root(self) -> int:
        return int(np.flatnonzero(self.parents == 0)[0]) + 1

    @property
    def order(self) -> list[int]:
        """Joint ids with every parent before its children."""
        out, frontier = [], [self.root]
        while frontier:
            j = frontier.pop(0)
            out.append(j)
            frontier += [int(c) + 1 for c in np.flatnonzero(self.parents == j)]
        return out

    def bone_length(self, joint: int, scale: float = 1.0, bone_scale=None) -> float:
        s = 1.0 if bone_scale is None else bone_scale[joint - 1]
        return float(np.linalg.norm(self.rest[joint - 1]) * scale * s)

    def bones(self) -> list[tuple[int, int]]:
        """(parent, child) id pairs, one per non-root joint."""
        return [(int(self.parents[j - 1]), j) for j in range(1, N_JOINTS + 1) if self.parents[j - 1] != 0]

    def dof_mask(self) -> np.ndarray:
        return self.limits[:, :, 0] != self.limits[:, :, 1]


def default_model() -> SkeletonModel:
    parents = np.array([_REST[j][0] for j in range(1, N_JOINTS + 1)], dtype=np.int64)
    rest = np.array([_REST[j][1] for j in range(1, N_JOINTS + 1)], dtype=np.float64)
    limits = np.zeros((N_JOINTS, 3, 2))
    for j, lim in _LIMITS.items():
        limits[j - 1] = lim
    return SkeletonModel(parents, rest, limits)


@dataclass(frozen=True)
class SkeletonPose:
    angles: np.ndarray = field(default_factory=lambda: np.zeros((N_JOINTS, 3)))  # (roll, pitch, yaw) per joint
    global_angles: np.ndarray = field(default_factory=lambda: np.zeros(3))  # (roll, pitch, yaw)
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))  # mm
    scale: float = 1.0
    bone_scale: np.ndarray = field(default_factory=lambda: np.ones(N_JOINTS))

    def __post_init__(self):
        if self.scale <= 0 or np.any(np.asarray(self.bone_scale) <= 0):
            raise ValueError("scales must be positive")

    def validate(self, model: SkeletonModel, tol: float = 1e-12) -> None:
        a = np.asarray(self.angles)
        lo, hi = model.limits[..., 0], model.limits[..., 1]
        bad = (a < lo - tol) | (a > hi + tol)
        if bad.any():
            j, k = np.argwhere(bad)[0]
            raise ValueError(f"joint {j + 1} angle {k} = {a[j, k]:.4f} outside [{lo[j, k]}, {hi[j, k]}]")

    def to_dict(self) -> dict:
        return {
            "angles": np.asarray(self.angles).tolist(),
            "globalAngles": np.asarray(self.global_angles).tolist(),
            "translation": np.asarray(self.translation).tolist(),
            "scale": float(self.scale),
            "boneScale": np.asarray(self.bone_scale).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonPose":
        return cls(np.array(d["angles"], float), np.array(d["globalAngles"], float), np.array(d["translation"], float),
                   float(d["scale"]), np.array(d["boneScale"], float))


def rotation_matrices(angles) -> np.ndarray:
    """Rz(yaw) @ Ry(pitch) @ Rx(roll) for (..., 3) angle rows of (roll, pitch, yaw)."""
    a = np.asarray(angles, dtype=np.float64).reshape(-1, 3)
    return Rotation.from_euler("ZYX", a[:, ::-1]).as_matrix()


def global_frame(pose: SkeletonPose):
    """Rotation and offset mapping body-frame points to the world."""
    rot = rotation_matrices(pose.global_angles)[0]
    pivot = np.array([PIVOT_X, 0.0, 0.0]) * pose.scale
    offset = np.asarray(pose.translation, dtype=np.float64) + np.array([0.0, 0.0, SPINE_HEIGHT * pose.scale]) - rot @ pivot
    return rot, offset


def forward_kinematics(model: SkeletonModel, pose: SkeletonPose, validate: bool = True) -> np.ndarray:
    """World positions (24, 3) in mm, row ``id - 1`` for joint ``id``."""
    if validate:
        pose.validate(model)
    local = rotation_matrices(pose.angles)
    rot, offset = global_frame(pose)
    frames = np.zeros((N_JOINTS, 3, 3))
    pos = np.zeros((N_JOINTS, 3))
    vec = model.rest * (pose.scale * np.asarray(pose.bone_scale))[:, None]
    for j in model.order:
        i = j - 1
        p = model.parents[i]
        if p == 0:
            frames[i] = rot @ local[i]
            pos[i] = offset
        else:
            frames[i] = frames[p - 1] @ local[i]
            pos[i] = pos[p - 1] + frames[i] @ vec[i]
    return pos


def mirror_pose(pose: SkeletonPose) -> SkeletonPose:
    """The pose reflected across the body's sagittal plane (world y -> -y)."""
    ang = np.asarray(pose.angles)[MIRROR_INDEX] * np.array([-1.0, 1.0, -1.0])
    g = np.asarray(pose.global_angles) * np.array([-1.0, 1.0, -1.0])
    t = np.asarray(pose.translation) * np.array([1.0, -1.0, 1.0])
    return replace(pose, angles=ang, global_angles=g, translation=t, bone_scale=np.asarray(pose.bone_scale)[MIRROR_INDEX])


def mirror_positions(pos: np.ndarray) -> np.ndarray:
    return (pos * np.array([1.0, -1.0, 1.0]))[MIRROR_INDEX]


def body_axes(pos: np.ndarray):
    """Orthonormal (forward, left, up) frames at the shoulders and hips.

    Built from main-body joints only so that limb completion can use them.
    """
    p = lambda j: pos[j - 1]  # noqa: E731
    fwd_front = _unit(p(4) - p(5))
    fwd_rear = _unit(p(5) - p(6))
    lateral = (p(11) - p(12)) + (p(9) - p(10))
    return _frame(fwd_front, lateral), _frame(fwd_rear, lateral)


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero-length direction")
    return v / n


def _frame(forward, lateral):
    left = _unit(lateral - np.dot(lateral, forward) * forward)
    up = np.cross(forward, left)
    return np.stack([forward, left, up], axis=1)
