"""Joint estimation, part labeling and their error measures."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..forest import Forest, leaf_ids, predict_proba
from ..synth.render import BACKGROUND
from .pixels import image_pixels

HIGH, LOW, MISSING = 0, 1, 2
N_PARTS = 6


@dataclass
class JointEstimate:
    positions: np.ndarray  # (J, 3), NaN where missing
    confidence: np.ndarray  # (J,) HIGH / LOW / MISSING

    @property
    def missing(self) -> np.ndarray:
        return self.confidence == MISSING


def aggregate(forest: Forest, pixels, rows=None) -> JointEstimate:
    """Average pixel position + leaf offset over all (pixel, tree) votes.

    High-confidence votes win; a joint with only low-confidence votes uses
    those and is flagged low; a joint with no votes at all is missing.
    """
    rows = np.arange(len(pixels)) if rows is None else np.asarray(rows)
    ids = leaf_ids(forest, pixels, rows)  # (T, n)
    pts = pixels.points[rows]
    J = forest.n_joints
    cands, lows, supported = [], [], []
    for tree, leaf in zip(forest.trees, ids):
        cands.append(pts[:, None, :] + tree.mu[leaf])
        lows.append(tree.low_conf[leaf])
        supported.append(tree.support[leaf] > 0)
    cands = np.concatenate(cands)  # (T*n, J, 3), tree-major
    lows = np.concatenate(lows)
    supported = np.concatenate(supported)
    pos = np.full((J, 3), np.nan)
    conf = np.full(J, MISSING)
    for j in range(J):
        high = supported[:, j] & ~lows[:, j]
        low = supported[:, j] & lows[:, j]
        if high.any():
            pos[j] = _mean(cands[high, j])
            conf[j] = HIGH
        elif low.any():
            pos[j] = _mean(cands[low, j])
            conf[j] = LOW
    return JointEstimate(pos, conf)


def _mean(v: np.ndarray) -> np.ndarray:
    # sort the votes first so the result does not depend on tree order
    order = np.lexsort(v.T[::-1])
    return v[order].mean(axis=0)


def estimate_joints(forest: Forest, depth: np.ndarray, camera, n_query: int = 200, seed: int = 0) -> JointEstimate:
    if forest.mode != "regression":
        raise ValueError("joint estimation needs a regression forest")
    return aggregate(forest, image_pixels(depth, camera, n_query, seed))


def estimate_batch(forest: Forest, sset, n_query: int = 200, seed: int = 0, images=None) -> list[JointEstimate]:
    stack = sset.depth if images is None else images
    return [estimate_joints(forest, stack[k], sset.camera, n_query, seed + k) for k in range(len(stack))]


def joint_error(estimate: JointEstimate, truth: np.ndarray, scale: float = 1.0):
    """Per-joint Euclidean error (mm, divided by ``scale``) and its mean.

    Missing joints give NaN and are left out of the mean.
    """
    truth = np.asarray(truth, dtype=np.float64)
    if truth.shape != estimate.positions.shape:
        raise ValueError("estimate and truth have different joint sets")
    err = np.linalg.norm(estimate.positions - truth, axis=1) / scale
    ok = ~estimate.missing
    mean = float(err[ok].mean()) if ok.any() else float("nan")
    return err, mean


def part_label_image(forest: Forest, depth: np.ndarray, camera) -> np.ndarray:
    """Per-pixel argmax of the tree-averaged leaf histograms; background stays background."""
    out = np.full(depth.shape, BACKGROUND, dtype=np.uint8)
    px = image_pixels(depth, camera)
    proba = predict_proba(forest, px)
    out[px.py, px.px] = np.argmax(proba, axis=1)
    return out


def confusion_matrix(pred: np.ndarray, truth: np.ndarray, n_classes: int = N_PARTS):
    """Row-normalized (truth x predicted) matrix over foreground pixels.

    Returns ``(matrix, row_counts)``; rows without support are all zero.
    """
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape or np.any((pred == BACKGROUND) != (truth == BACKGROUND)):
        raise ValueError("prediction and truth masks differ")
    fg = truth != BACKGROUND
    counts = np.zeros((n_classes, n_classes))
    np.add.at(counts, (truth[fg].astype(np.int64), pred[fg].astype(np.int64)), 1)
    rows = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mat = np.where(rows[:, None] > 0, counts / rows[:, None], 0.0)
    return mat, rows.astype(np.int64)
