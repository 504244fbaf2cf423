"""Training examples and the two split-feature families.

Trees store every feature as a row of a ``(n_nodes, 2)`` float array so that
routing can be vectorised over examples sitting at different nodes:

* ``Axis2D``: ``[axis, 0]`` with axis 0 = X, 1 = Y; the feature value is the
  point's coordinate on that axis.
* ``DepthOffset``: ``[u_x, u_y]`` in pixel*mm; the feature value is
  ``d(x + u / d(x)) - d(x)`` for the depth image the pixel came from.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

# axis thresholds live on a 3-decimal grid strictly inside (0, 1)
AXIS_GRID = np.arange(1, 1000, dtype=np.int64)


@dataclass(frozen=True)
class Axis2D:
    axis: int  # 0 = X (horizontal), 1 = Y (vertical)

    def __post_init__(self):
        if self.axis not in (0, 1):
            raise ValueError("axis must be 0 (X) or 1 (Y)")

    def as_row(self) -> np.ndarray:
        return np.array([float(self.axis), 0.0])


@dataclass(frozen=True)
class DepthOffset:
    u: tuple[float, float]

    def as_row(self) -> np.ndarray:
        return np.array([float(self.u[0]), float(self.u[1])])


FeatureDescriptor = Union[Axis2D, DepthOffset]


@dataclass(frozen=True)
class SplitTest:
    """Send an example left when ``feature(x) > threshold``."""

    feature: FeatureDescriptor
    threshold: float

    def __post_init__(self):
        if not np.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if isinstance(self.feature, Axis2D):
            if not 0.0 < self.threshold < 1.0:
                raise ValueError("axis thresholds must lie in (0, 1)")
            if abs(self.threshold * 1000 - round(self.threshold * 1000)) > 1e-9:
                raise ValueError("axis thresholds are quantised to 3 decimals")


# ---------------------------------------------------------------------------
# example containers


@dataclass
class PointSet:
    """Labelled 2D points."""

    X: np.ndarray  # (n, 2)
    y: np.ndarray  # (n,) class ids

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[1] != 2 or len(self.y) != len(self.X):
            raise ValueError("PointSet needs X of shape (n, 2) and y of shape (n,)")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def labels(self) -> np.ndarray:
        return self.y

    def subset(self, rows) -> "PointSet":
        return PointSet(self.X[rows], self.y[rows])

    @staticmethod
    def concat(a: "PointSet", b: "PointSet") -> "PointSet":
        return PointSet(np.concatenate([a.X, b.X]), np.concatenate([a.y, b.y]))


@dataclass
class PixelSet:
    """Depth pixels sampled from a stack of depth images.

    ``points`` are the pixels back-projected to 3D (mm).  Exactly one of
    ``labels`` (part classes) and ``offsets`` (pixel -> joint vectors, mm)
    is normally set.
    """

    images: np.ndarray  # (K, H, W) float32 depth in mm
    image: np.ndarray  # (n,) image index
    px: np.ndarray  # (n,) column
    py: np.ndarray  # (n,) row
    depth: np.ndarray  # (n,) depth at (px, py)
    points: np.ndarray  # (n, 3)
    background: float
    labels: np.ndarray | None = None
    offsets: np.ndarray | None = None  # (n, J, 3)

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.int64)
        self.px = np.asarray(self.px, dtype=np.int64)
        self.py = np.asarray(self.py, dtype=np.int64)
        self.depth = np.asarray(self.depth, dtype=np.float64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.image)

    def subset(self, rows) -> "PixelSet":
        return PixelSet(
            images=self.images,
            image=self.image[rows],
            px=self.px[rows],
            py=self.py[rows],
            depth=self.depth[rows],
            points=self.points[rows],
            background=self.background,
            labels=None if self.labels is None else self.labels[rows],
            offsets=None if self.offsets is None else self.offsets[rows],
        )


# ---------------------------------------------------------------------------
# feature families


class AxisFeatures:
    """Axis-aligned thresholds on 2D points; the axis alternates with level."""

    name = "axis2d"

    def to_dict(self) -> dict:
        return {"name": self.name}

    @staticmethod
    def axis_for_level(level: int) -> int:
        return level % 2

    def evaluate(self, data: PointSet, rows: np.ndarray, feats: np.ndarray) -> np.ndarray:
        """Feature values for ``rows``; ``feats`` is one ``(2,)`` row or one row per example."""
        axis = np.asarray(feats)[..., 0].astype(np.int64)
        return data.X[rows, axis]

    def evaluate_many(self, data: PointSet, rows: np.ndarray, feats: np.ndarray) -> np.ndarray:
        return data.X[rows][:, feats[:, 0].astype(np.int64)].T

    def sample_candidates(self, rng, data, rows, level, m, thresholds_per_feature):
        """One feature (the level's axis) with ``m`` grid thresholds."""
        axis = self.axis_for_level(level)
        feats = np.array([[float(axis), 0.0]])
        thresholds = sample_axis_thresholds(rng, m)[None, :]
        return feats, thresholds, self.evaluate_many(data, rows, feats)


def sample_axis_thresholds(rng: np.random.Generator, count: int, replace: bool = True) -> np.ndarray:
    """Thresholds from the grid {0.001, ..., 0.999}.

    Without replacement, a count at least the grid size returns the whole grid.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if replace:
        k = rng.integers(1, 1000, size=count)
    elif count >= len(AXIS_GRID):
        k = AXIS_GRID.copy()
    else:
        k = rng.choice(AXIS_GRID, size=count, replace=False)
    return k / 1000.0


class DepthFeatures:
    """Single-offset depth-difference features ``d(x + u/d(x)) - d(x)``.

    Probes that fall outside the image read the background depth.
    """

    name = "depth_offset"

    def __init__(self, max_offset: float = 12000.0):
        if max_offset <= 0:
            raise ValueError("max_offset must be positive")
        self.max_offset = float(max_offset)

    def to_dict(self) -> dict:
        return {"name": self.name, "max_offset": self.max_offset}

    def evaluate(self, data: PixelSet, rows: np.ndarray, feats: np.ndarray) -> np.ndarray:
        feats = np.asarray(feats, dtype=np.float64)
        d = data.depth[rows]
        _, H, W = data.images.shape
        qx = np.floor(data.px[rows] + feats[..., 0] / d + 0.5).astype(np.int64)
        qy = np.floor(data.py[rows] + feats[..., 1] / d + 0.5).astype(np.int64)
        inside = (qx >= 0) & (qx < W) & (qy >= 0) & (qy < H)
        probe = np.full(qx.shape, data.background, dtype=np.float64)
        img = np.broadcast_to(data.image[rows], qx.shape)
        probe[inside] = data.images[img[inside], qy[inside], qx[inside]]
        return probe - d

    def evaluate_many(self, data: PixelSet, rows: np.ndarray, feats: np.ndarray) -> np.ndarray:
        feats = np.asarray(feats, dtype=np.float64)
        F = len(feats)
        n = len(rows)
        out = np.empty((F, n))
        # chunk so the (F, n) probe arrays stay modest
        step = max(1, 4_000_000 // max(n, 1))
        for s in range(0, F, step):
            f = feats[s : s + step]
            tiled = np.broadcast_to(f[:, None, :], (len(f), n, 2))
            rr = np.broadcast_to(rows[None, :], (len(f), n))
            out[s : s + step] = self.evaluate(data, rr, tiled)
        return out

    def sample_offsets(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(-self.max_offset, self.max_offset, size=(count, 2))

    def sample_candidates(self, rng, data, rows, level, m, thresholds_per_feature):
        """``m`` random offsets, each with thresholds uniform over the node's value range."""
        feats = self.sample_offsets(rng, m)
        values = self.evaluate_many(data, rows, feats)
        lo = values.min(axis=1, keepdims=True)
        hi = values.max(axis=1, keepdims=True)
        u = rng.random((m, thresholds_per_feature))
        thresholds = lo + u * (hi - lo)
        return feats, thresholds, values


def family_from_dict(d: dict):
    if d["name"] == AxisFeatures.name:
        return AxisFeatures()
    if d["name"] == DepthFeatures.name:
        return DepthFeatures(max_offset=d["max_offset"])
    raise ValueError(f"unknown feature family {d['name']!r}")


def descriptor_from_row(family, row) -> FeatureDescriptor:
    if isinstance(family, AxisFeatures):
        return Axis2D(int(row[0]))
    return DepthOffset((float(row[0]), float(row[1])))
