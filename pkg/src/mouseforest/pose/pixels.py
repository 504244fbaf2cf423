"""Foreground pixel sampling with ground-truth offsets or part labels."""
from __future__ import annotations

import logging

import numpy as np

from ..forest import PixelSet
from ..seeding import rng_for
from ..synth.render import BACKGROUND
from ..synth.skeleton import MAIN_JOINTS

logger = logging.getLogger(__name__)

# per-joint proximity radii (mm) for the 12 main joints
MAIN_RADII = (25.0, 25.0, 25.0, 25.0, 25.0, 25.0, 50.0, 50.0, 15.0, 15.0, 25.0, 25.0)


def foreground_pixels(depth: np.ndarray, background: float):
    rows, cols = np.nonzero(depth < background)
    return cols, rows


def _pick(rng, count, n_per_image):
    if n_per_image >= count:
        return np.arange(count)
    return np.sort(rng.choice(count, size=n_per_image, replace=False))


def sample_pixels(sset, n_per_image: int, seed: int, stream: str = "pixels", target: str = "offsets",
                  joints=MAIN_JOINTS, images=None, skip: int = 0) -> PixelSet:
    """Uniformly sample foreground pixels of every image in ``sset``.

    ``skip`` draws and discards that many pixels per image first, so two
    calls with the same seed and ``skip`` = the other's count give disjoint
    samples.
    """
    if n_per_image < 1:
        raise ValueError("n_per_image must be >= 1")
    if target not in ("offsets", "labels"):
        raise ValueError("target must be 'offsets' or 'labels'")
    cam = sset.camera
    stack = np.asarray(sset.depth if images is None else images, dtype=np.float32)
    idx, cols, rows = [], [], []
    for k in range(len(stack)):
        c, r = foreground_pixels(stack[k], cam.background)
        if len(c) == 0:
            logger.warning("image %d has no foreground; skipped", k)
            continue
        rng = rng_for(seed, "pixels", stream, k)
        order = rng.permutation(len(c))[skip:skip + n_per_image]
        order = np.sort(order)
        idx.append(np.full(len(order), k))
        cols.append(c[order])
        rows.append(r[order])
    if not idx:
        raise ValueError("no foreground pixels in any image")
    image = np.concatenate(idx)
    px = np.concatenate(cols)
    py = np.concatenate(rows)
    depth = stack[image, py, px].astype(np.float64)
    points = cam.back_project(px, py, depth)
    kw = {}
    if target == "offsets":
        sel = np.asarray(joints) - 1
        kw["offsets"] = sset.joints[image][:, sel, :] - points[:, None, :]
    else:
        lab = sset.labels[image, py, px]
        if np.any(lab == BACKGROUND):
            raise ValueError("label image disagrees with depth foreground")
        kw["labels"] = lab.astype(np.int64)
    return PixelSet(stack, image, px, py, depth, points, float(cam.background), **kw)


def image_pixels(depth: np.ndarray, camera, n_query: int | None = None, seed: int = 0) -> PixelSet:
    """Pixels of one depth image: all foreground, or ``n_query`` of them at random."""
    c, r = foreground_pixels(depth, camera.background)
    if len(c) == 0:
        raise ValueError("depth image has no foreground")
    if n_query is not None:
        sel = _pick(rng_for(seed, "query"), len(c), n_query)
        c, r = c[sel], r[sel]
    stack = np.asarray(depth, dtype=np.float32)[None]
    d = stack[0, r, c].astype(np.float64)
    return PixelSet(stack, np.zeros(len(c), np.int64), c, r, d, camera.back_project(c, r, d), float(camera.background))
