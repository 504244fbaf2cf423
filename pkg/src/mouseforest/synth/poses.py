"""Procedural pose library and randomized pose sampling."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..seeding import rng_for
from .skeleton import N_JOINTS, SkeletonModel, SkeletonPose, default_model

ROLL, PITCH, YAW = 0, 1, 2


def _pose(model: SkeletonModel, settings) -> SkeletonPose:
    a = np.zeros((N_JOINTS, 3))
    for joint, axis, value in settings:
        a[joint - 1, axis] = value
    lo, hi = model.limits[..., 0], model.limits[..., 1]
    return SkeletonPose(angles=np.clip(a, lo, hi))


def stand(model, head_yaw: float, head_pitch: float) -> SkeletonPose:
    return _pose(model, [(2, YAW, head_yaw), (2, PITCH, head_pitch), (1, PITCH, 0.5 * head_pitch), (8, YAW, 0.3 * head_yaw)])


def gait(model, phase: float) -> SkeletonPose:
    s, c = np.sin(phase), np.cos(phase)
    return _pose(model, [
        (14, PITCH, 0.45 * s), (21, PITCH, -0.3 * s), (16, PITCH, -0.45 * s), (22, PITCH, 0.3 * s),
        (17, PITCH, -0.4 * s), (18, PITCH, 0.3 * s), (19, PITCH, 0.4 * s), (20, PITCH, -0.3 * s),
        (4, YAW, 0.08 * c), (6, YAW, -0.08 * c), (7, YAW, 0.25 * c), (8, YAW, 0.35 * c),
    ])


def rear(model, height: float) -> SkeletonPose:
    """Front of the body lifted; ``height`` in [0, 1]."""
    return _pose(model, [
        (4, PITCH, -0.4 * height), (3, PITCH, -0.4 * height), (2, PITCH, 0.3 * height),
        (14, PITCH, 0.6 * height), (16, PITCH, 0.6 * height), (21, PITCH, -0.5 * height), (22, PITCH, -0.5 * height),
        (7, PITCH, 0.2 * height),
    ])


def bend(model, curvature: float) -> SkeletonPose:
    """Spine curled sideways; ``curvature`` in [-1, 1], positive turns left."""
    k = curvature
    return _pose(model, [
        (4, YAW, 0.3 * k), (3, YAW, 0.3 * k), (2, YAW, 0.4 * k), (6, YAW, -0.35 * k),
        (7, YAW, -0.6 * k), (8, YAW, -0.6 * k), (14, YAW, 0.2 * k), (16, YAW, 0.2 * k),
    ])


def pose_library(model: SkeletonModel | None = None) -> list[SkeletonPose]:
    """Base poses from four generator families over fixed parameter grids."""
    model = model or default_model()
    out = [stand(model, y, p) for y in (-0.4, 0.0, 0.4) for p in (-0.3, 0.0, 0.3)]
    out += [gait(model, ph) for ph in np.linspace(0, 2 * np.pi, 8, endpoint=False)]
    out += [rear(model, h) for h in (0.25, 0.5, 0.75, 1.0)]
    out += [bend(model, k) for k in (-1.0, -0.75, -0.5, -0.25, 0.25, 0.5, 0.75, 1.0)]
    return out


@dataclass(frozen=True)
class Perturbation:
    yaw: float = np.pi  # global in-plane rotation, +- range
    pitch: float = 0.15
    roll: float = 0.15
    scale: tuple = (0.9, 1.1)
    bone: float = 0.05  # relative bone-length jitter
    translation: float = 5.0  # mm, on the floor plane
    joint: float = 0.1  # radians added to every free joint angle

    @classmethod
    def none(cls) -> "Perturbation":
        return cls(0.0, 0.0, 0.0, (1.0, 1.0), 0.0, 0.0, 0.0)


def perturb(base: SkeletonPose, model: SkeletonModel, ranges: Perturbation, rng: np.random.Generator,
            retries: int = 10) -> SkeletonPose:
    lo, hi = model.limits[..., 0], model.limits[..., 1]
    free = model.dof_mask()
    angles = base.angles
    for _ in range(retries):
        cand = base.angles + free * rng.uniform(-ranges.joint, ranges.joint, size=base.angles.shape)
        if np.all((cand >= lo) & (cand <= hi)):
            angles = cand
            break
    else:
        angles = np.clip(cand, lo, hi)
    g = np.array([rng.uniform(-ranges.roll, ranges.roll), rng.uniform(-ranges.pitch, ranges.pitch), rng.uniform(-ranges.yaw, ranges.yaw)])
    t = np.array([rng.uniform(-ranges.translation, ranges.translation), rng.uniform(-ranges.translation, ranges.translation), 0.0])
    scale = rng.uniform(*ranges.scale)
    bones = base.bone_scale * rng.uniform(1 - ranges.bone, 1 + ranges.bone, size=N_JOINTS)
    return replace(base, angles=angles, global_angles=base.global_angles + g, translation=base.translation + t,
                   scale=base.scale * scale, bone_scale=bones)


def sample_poses(library, ranges: Perturbation, count: int, seed: int, model: SkeletonModel | None = None,
                 stream: str = "poses") -> list[SkeletonPose]:
    """``count`` poses: a uniformly chosen base pose, then random perturbation."""
    if not library:
        raise ValueError("pose library is empty")
    model = model or default_model()
    rng = rng_for(seed, "synth", stream)
    picks = rng.integers(0, len(library), size=count)
    return [perturb(library[i], model, ranges, rng) for i in picks]
