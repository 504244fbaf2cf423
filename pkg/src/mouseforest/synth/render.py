"""Top-view depth and part-label rendering of capsule bodies.

Every bone is a capsule (a segment swept by a ball).  The camera looks
straight down from ``height`` mm above the floor; depth is the distance along
the optical axis, so the floor reads as ``height`` everywhere.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .skeleton import N_JOINTS, SkeletonModel

HEAD, FRONT_RIGHT, FRONT_LEFT, REAR_RIGHT, REAR_LEFT, TAIL = range(6)
BACKGROUND = 255
PART_NAMES = ("head", "frontRight", "frontLeft", "rearRight", "rearLeft", "tail")

# bone (child joint id) -> radius in mm
BONE_RADII = {
    1: 7.0, 2: 10.0, 3: 12.0, 4: 14.0, 6: 15.0,
    7: 3.0, 8: 2.5,
    9: 4.0, 10: 4.0,
    11: 9.0, 12: 9.0,
    13: 5.0, 14: 4.0, 21: 3.0, 15: 5.0, 16: 4.0, 22: 3.0,
    17: 5.0, 18: 4.0, 23: 3.0, 19: 5.0, 20: 4.0, 24: 3.0,
}

# bone (child joint id) -> region; "front"/"rear" bones are split by side
_HEAD_BONES = {1, 9, 10}
_TAIL_BONES = {7, 8}
_FRONT_BODY = {2, 3, 4}
_REAR_BODY = {6}
_LIMB_SIDE = {
    13: FRONT_LEFT, 14: FRONT_LEFT, 21: FRONT_LEFT,
    15: FRONT_RIGHT, 16: FRONT_RIGHT, 22: FRONT_RIGHT,
    11: REAR_LEFT, 17: REAR_LEFT, 18: REAR_LEFT, 23: REAR_LEFT,
    12: REAR_RIGHT, 19: REAR_RIGHT, 20: REAR_RIGHT, 24: REAR_RIGHT,
}


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    width: int = 64
    height_px: int = 64
    focal: float = 180.0  # pixels
    height: float = 600.0  # camera above the floor, mm
    depth_scale: float = 0.1  # mm per stored depth unit

    @property
    def cx(self) -> float:
        return (self.width - 1) / 2.0

    @property
    def cy(self) -> float:
        return (self.height_px - 1) / 2.0

    @property
    def background(self) -> float:
        return self.height

    @classmethod
    def for_size(cls, width: int, height_px: int, **kw) -> "Camera":
        # keep the floor footprint roughly constant across resolutions
        return cls(width, height_px, focal=180.0 * min(width, height_px) / 64.0, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    def project(self, points) -> np.ndarray:
        """World points (n, 3) to pixel coordinates (n, 2) as (column, row)."""
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        z = self.height - p[:, 2]
        if np.any(z <= 0):
            raise RenderError("point at or above the camera")
        return np.stack([self.cx + self.focal * p[:, 0] / z, self.cy - self.focal * p[:, 1] / z], axis=1)

    def back_project(self, col, row, depth) -> np.ndarray:
        col, row, depth = (np.asarray(a, dtype=np.float64) for a in (col, row, depth))
        return np.stack([(col - self.cx) * depth / self.focal, -(row - self.cy) * depth / self.focal, self.height - depth], axis=-1)

    def rays(self, cols, rows):
        """Unit directions and the depth gained per unit distance along each."""
        d = np.stack([(cols - self.cx) / self.focal, -(rows - self.cy) / self.focal, -np.ones_like(cols, dtype=np.float64)], axis=-1)
        n = np.linalg.norm(d, axis=-1)
        return d / n[..., None], 1.0 / n


def _ball_hit(o, rd, center, r):
    oc = o - center
    b = rd @ oc
    c = oc @ oc - r * r
    h = b * b - c
    t = -b - np.sqrt(np.maximum(h, 0.0))
    return np.where((h >= 0) & (c > 0) & (t > 0), t, np.inf)


def _side_hit(o, rd, pa, pb, r):
    ba = pb - pa
    oa = o - pa
    baba = ba @ ba
    bard = rd @ ba
    baoa = oa @ ba
    rdoa = rd @ oa
    a = baba - bard * bard
    b = baba * rdoa - baoa * bard
    c = baba * (oa @ oa) - baoa * baoa - r * r * baba
    h = b * b - a * c
    q = -b + np.sqrt(np.maximum(h, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = c / q  # the nearer root, stable when the ray is almost parallel to the axis
        y = baoa + t * bard
    ok = (h >= 0) & (b < 0) & (c > 0) & (q > 0) & (y > 0) & (y < baba) & (t > 0)
    return np.where(ok, t, np.inf)


def capsule_hit(o, rd, pa, pb, r) -> np.ndarray:
    """Distance along unit rays ``rd`` from ``o`` to the first capsule surface point (inf on a miss).

    The first entry into the union of the side cylinder and the two end balls
    is the earliest of the three separate entries; the flat cylinder ends lie
    inside the balls.
    """
    pa, pb = np.asarray(pa, float), np.asarray(pb, float)
    t = np.minimum(_ball_hit(o, rd, pa, r), _ball_hit(o, rd, pb, r))
    if np.any(pa != pb):
        t = np.minimum(t, _side_hit(o, rd, pa, pb, r))
    return t


@dataclass
class Capsule:
    a: np.ndarray
    b: np.ndarray
    radius: float
    bone: int = 0  # child joint id, 0 for free-standing capsules


def skeleton_capsules(model: SkeletonModel, positions: np.ndarray, scale: float = 1.0) -> list[Capsule]:
    return [Capsule(positions[p - 1], positions[c - 1], BONE_RADII[c] * scale, c) for p, c in model.bones()]


def _bbox(cam: Camera, cap: Capsule):
    ends = np.stack([cap.a, cap.b])
    z = cam.height - ends[:, 2] - cap.radius
    if np.any(z <= 0):
        raise RenderError("capsule reaches the camera")
    uv = cam.project(ends)
    pad = 1.25 * cap.radius * cam.focal / z.min() + 2.0
    c0 = max(int(np.floor(uv[:, 0].min() - pad)), 0)
    c1 = min(int(np.ceil(uv[:, 0].max() + pad)), cam.width - 1)
    r0 = max(int(np.floor(uv[:, 1].min() - pad)), 0)
    r1 = min(int(np.ceil(uv[:, 1].max() + pad)), cam.height_px - 1)
    return r0, r1, c0, c1


def render(capsules, cam: Camera, regions=None):
    """Z-buffer the capsules.

    Returns ``(depth, winner, hits)``: depth (H, W) in mm with the floor as
    background, the index of the capsule seen at each pixel (-1 for floor),
    and the 3D surface point seen there.
    """
    H, W = cam.height_px, cam.width
    depth = np.full((H, W), cam.background)
    winner = np.full((H, W), -1, dtype=np.int64)
    origin = np.array([0.0, 0.0, cam.height])
    for k, cap in enumerate(capsules):
        r0, r1, c0, c1 = _bbox(cam, cap)
        if r0 > r1 or c0 > c1:
            continue
        rows, cols = np.mgrid[r0:r1 + 1, c0:c1 + 1].astype(np.float64)
        rd, per_t = cam.rays(cols, rows)
        t = capsule_hit(origin, rd, cap.a, cap.b, cap.radius)
        d = t * per_t
        win = d < depth[r0:r1 + 1, c0:c1 + 1]
        depth[r0:r1 + 1, c0:c1 + 1][win] = d[win]
        winner[r0:r1 + 1, c0:c1 + 1][win] = k
    hits = cam.back_project(*np.meshgrid(np.arange(W), np.arange(H)), depth)
    return depth, winner, hits


def render_depth(model: SkeletonModel, positions: np.ndarray, cam: Camera, scale: float = 1.0) -> np.ndarray:
    if len(positions) == 0:
        return np.full((cam.height_px, cam.width), cam.background)
    return render(skeleton_capsules(model, positions, scale), cam)[0]


def _lateral_sign(point, cap: Capsule, lateral):
    ab = cap.b - cap.a
    s = np.clip(((point - cap.a) @ ab) / max(ab @ ab, 1e-300), 0.0, 1.0)
    axis_pt = cap.a + s[..., None] * ab
    return ((point - axis_pt) @ lateral) >= 0


def part_labels(positions: np.ndarray, capsules, winner, hits) -> np.ndarray:
    """Six-region label of each pixel from the capsule that won the z-buffer."""
    labels = np.full(winner.shape, BACKGROUND, dtype=np.uint8)
    lat_front = positions[12] - positions[14]  # joint 13 minus joint 15
    lat_rear = positions[10] - positions[11]  # joint 11 minus joint 12
    for k, cap in enumerate(capsules):
        mask = winner == k
        if not mask.any():
            continue
        bone = cap.bone
        if bone in _HEAD_BONES:
            labels[mask] = HEAD
        elif bone in _TAIL_BONES:
            labels[mask] = TAIL
        elif bone in _LIMB_SIDE:
            labels[mask] = _LIMB_SIDE[bone]
        else:
            front = bone in _FRONT_BODY
            left = _lateral_sign(hits[mask], cap, lat_front if front else lat_rear)
            labels[mask] = np.where(left, FRONT_LEFT if front else REAR_LEFT, FRONT_RIGHT if front else REAR_RIGHT)
    return labels


def render_labels(model: SkeletonModel, positions: np.ndarray, cam: Camera, scale: float = 1.0) -> np.ndarray:
    caps = skeleton_capsules(model, positions, scale)
    _, winner, hits = render(caps, cam)
    return part_labels(positions, caps, winner, hits)


def render_pair(model: SkeletonModel, positions: np.ndarray, cam: Camera, scale: float = 1.0):
    """Depth and label images from one z-buffer pass, so their masks agree."""
    if positions.shape != (N_JOINTS, 3):
        raise RenderError("expected 24 joint positions")
    caps = skeleton_capsules(model, positions, scale)
    depth, winner, hits = render(caps, cam)
    return depth, part_labels(positions, caps, winner, hits)


def add_noise(depth: np.ndarray, sigma: float, rng: np.random.Generator, background: float) -> np.ndarray:
    """I.i.d. Gaussian noise (mm) on foreground pixels.

    Noisy values are clipped to stay strictly in front of the floor so the
    foreground mask never changes.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    out = np.array(depth, dtype=np.float64, copy=True)
    if sigma == 0:
        return out
    fg = out < background
    noisy = out[fg] + rng.normal(0.0, sigma, size=int(fg.sum()))
    out[fg] = np.clip(noisy, 1.0, background - 0.5)
    return out
