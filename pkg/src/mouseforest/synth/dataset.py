"""Batches of rendered mice with ground truth."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..seeding import rng_for
from . import imageio
from .poses import Perturbation, pose_library, sample_poses
from .render import Camera, add_noise, render_pair
from .skeleton import SkeletonModel, default_model, forward_kinematics


@dataclass
class SynthSet:
    depth: np.ndarray  # (K, H, W) mm
    labels: np.ndarray  # (K, H, W) uint8
    joints: np.ndarray  # (K, 24, 3) mm
    poses: list
    camera: Camera

    def __len__(self) -> int:
        return len(self.depth)

    def with_noise(self, sigma: float, seed: int, stream: str = "noise") -> "SynthSet":
        """Copy with foreground noise; image k uses its own stream."""
        bg = self.camera.background
        noisy = np.stack([add_noise(d, sigma, rng_for(seed, stream, k), bg) for k, d in enumerate(self.depth)])
        return SynthSet(noisy, self.labels, self.joints, self.poses, self.camera)

    def save(self, directory, prefix: str = "img") -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for k in range(len(self)):
            imageio.save_depth(out / f"{prefix}{k:06d}.depth", self.depth[k], self.camera.depth_scale)
            imageio.save_labels(out / f"{prefix}{k:06d}.labels", self.labels[k])
            imageio.save_sidecar(out / f"{prefix}{k:06d}.json", self.joints[k], self.camera.to_dict(), self.poses[k].to_dict())


def render_set(poses, camera: Camera, model: SkeletonModel | None = None) -> SynthSet:
    model = model or default_model()
    depth = np.empty((len(poses), camera.height_px, camera.width))
    labels = np.empty((len(poses), camera.height_px, camera.width), dtype=np.uint8)
    joints = np.empty((len(poses), 24, 3))
    for k, pose in enumerate(poses):
        joints[k] = forward_kinematics(model, pose)
        depth[k], labels[k] = render_pair(model, joints[k], camera, pose.scale)
    return SynthSet(depth, labels, joints, list(poses), camera)


def make_synth_set(count: int, seed: int, stream: str, camera: Camera | None = None,
                   ranges: Perturbation | None = None, model: SkeletonModel | None = None) -> SynthSet:
    model = model or default_model()
    poses = sample_poses(pose_library(model), ranges or Perturbation(), count, seed, model, stream=stream)
    return render_set(poses, camera or Camera(), model)
