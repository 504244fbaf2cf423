"""Baseline forest training and prediction."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field

import numpy as np

from ..seeding import rng_for
from .criteria import classification_gains, pick_best, regression_gains, within_radius
from .features import AxisFeatures, PixelSet, PointSet
from .tree import ClassLeaf, RegLeaf, Tree, TreeBuilder

CLASSIFICATION = "classification"
REGRESSION = "regression"


@dataclass
class TrainParams:
    num_trees: int = 5
    m: int = 50  # candidate features per node (axis family: candidate thresholds)
    leaf_size: int = 60  # l_n: nodes with fewer examples become leaves
    max_levels: int = 20  # L: root is level 0, nodes at level L-1 are leaves
    thresholds_per_feature: int = 10
    radii: tuple = ()  # per-joint proximity radius (mm), regression only
    eigen_bound: float = 100.0  # mm^2; leaves whose offset spread reaches it are low confidence
    bagging: float | None = None  # per-tree subsample fraction, None = all data
    seed: int = 0

    def __post_init__(self):
        self.radii = tuple(float(r) for r in self.radii)
        if self.num_trees < 1 or self.m < 1 or self.leaf_size < 1 or self.max_levels < 1:
            raise ValueError("num_trees, m, leaf_size and max_levels must all be >= 1")
        if self.thresholds_per_feature < 1:
            raise ValueError("thresholds_per_feature must be >= 1")
        if any(r <= 0 for r in self.radii):
            raise ValueError("proximity radii must be positive")
        if self.bagging is not None and not 0 < self.bagging <= 1:
            raise ValueError("bagging fraction must be in (0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["radii"] = list(self.radii)
        return d


@dataclass(frozen=True)
class Forest:
    trees: tuple
    mode: str
    params: TrainParams
    family: object = field(default_factory=AxisFeatures)
    n_classes: int | None = None
    n_joints: int | None = None

    def __len__(self) -> int:
        return len(self.trees)

    def with_trees(self, trees) -> "Forest":
        return Forest(tuple(trees), self.mode, self.params, self.family, self.n_classes, self.n_joints)


def infer_mode(data) -> str:
    if isinstance(data, PixelSet) and data.labels is None:
        if data.offsets is None:
            raise ValueError("pixel set has neither labels nor offsets")
        return REGRESSION
    return CLASSIFICATION


def make_leaf_classification(labels, n_classes: int) -> ClassLeaf:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("cannot build a leaf from no examples")
    hist = np.bincount(labels, minlength=n_classes).astype(np.float64)
    hist /= hist.sum()
    return ClassLeaf(hist, int(np.argmax(hist)))


def make_leaf_regression(offsets, radii, eigen_bound: float, within: np.ndarray | None = None) -> RegLeaf:
    """Per-joint mean of within-radius offsets with an eigenvalue confidence gate."""
    offsets = np.asarray(offsets, dtype=np.float64)
    if within is None:
        within = within_radius(offsets, radii)
    J = offsets.shape[1]
    mu = np.zeros((J, 3))
    low = np.zeros(J, dtype=bool)
    support = within.sum(axis=0).astype(np.int64)
    for j in range(J):
        o = offsets[within[:, j], j]
        if len(o) == 0:
            continue
        mu[j] = o.mean(axis=0)
        d = o - mu[j]
        lam1 = np.linalg.eigvalsh(d.T @ d / len(o))[-1]
        low[j] = lam1 >= eigen_bound
    return RegLeaf(mu, low, support)


class _Target:
    """What the trees predict, bundled once per dataset."""

    def __init__(self, data, mode: str, params: TrainParams, n_classes: int | None = None):
        self.mode = mode
        self.params = params
        if mode == CLASSIFICATION:
            self.labels = np.asarray(data.labels, dtype=np.int64)
            self.n_classes = int(n_classes or self.labels.max() + 1)
            self.n_joints = None
        else:
            self.offsets = np.ascontiguousarray(data.offsets, dtype=np.float64)
            self.n_joints = self.offsets.shape[1]
            if len(params.radii) != self.n_joints:
                raise ValueError("need one proximity radius per joint")
            self.radii = np.asarray(params.radii)
            self.within = within_radius(self.offsets, self.radii)
            self.n_classes = None

    def builder(self) -> TreeBuilder:
        return TreeBuilder(self.mode, n_classes=self.n_classes, n_joints=self.n_joints)

    def leaf(self, rows):
        if self.mode == CLASSIFICATION:
            return make_leaf_classification(self.labels[rows], self.n_classes)
        return make_leaf_regression(self.offsets[rows], self.radii, self.params.eigen_bound, self.within[rows])

    def is_pure(self, rows) -> bool:
        if self.mode != CLASSIFICATION:
            return False
        lab = self.labels[rows]
        return bool((lab == lab[0]).all())

    def gains(self, values, thresholds, rows):
        if self.mode == CLASSIFICATION:
            return classification_gains(values, thresholds, self.labels[rows], self.n_classes)
        return regression_gains(values, thresholds, self.offsets[rows], self.within[rows])


class Grower:
    """Recursive baseline growth into a ``TreeBuilder``."""

    def __init__(self, data, family, params: TrainParams, target: _Target, rng: np.random.Generator, max_levels: int | None = None):
        self.data = data
        self.family = family
        self.params = params
        self.target = target
        self.rng = rng
        self.max_levels = params.max_levels if max_levels is None else max_levels

    def choose_split(self, rows, level):
        feats, thresholds, values = self.family.sample_candidates(
            self.rng, self.data, rows, level, self.params.m, self.params.thresholds_per_feature
        )
        best = pick_best(self.target.gains(values, thresholds, rows))
        if best is None:
            return None
        f, t = divmod(best, thresholds.shape[1])
        return feats[f], float(thresholds[f, t]), values[f] > thresholds[f, t]

    def grow(self, builder: TreeBuilder, rows: np.ndarray, level: int) -> int:
        n = len(rows)
        if level >= self.max_levels - 1 or n < self.params.leaf_size or self.target.is_pure(rows):
            return builder.add_leaf(self.target.leaf(rows), level, n)
        split = self.choose_split(rows, level)
        if split is None:
            return builder.add_leaf(self.target.leaf(rows), level, n)
        feat, thr, go_left = split
        node = builder.add_split(feat, thr, level, n)
        left = self.grow(builder, rows[go_left], level + 1)
        right = self.grow(builder, rows[~go_left], level + 1)
        builder.set_children(node, left, right)
        return node


def grow_tree(data, params: TrainParams, rng: np.random.Generator, family=None, rows=None, start_level: int = 0,
              mode: str | None = None, n_classes: int | None = None, target: _Target | None = None) -> Tree:
    """Grow one tree on ``rows`` of ``data`` (all rows by default)."""
    family = family or AxisFeatures()
    mode = mode or infer_mode(data)
    if target is None:
        target = _Target(data, mode, params, n_classes)
    rows = np.arange(len(data)) if rows is None else np.asarray(rows, dtype=np.int64)
    if len(rows) == 0:
        raise ValueError("cannot grow a tree on no examples")
    builder = target.builder()
    Grower(data, family, params, target, rng).grow(builder, rows, start_level)
    return builder.build()


def best_split(data, candidates, family=None, rows=None, mode: str | None = None, n_classes: int | None = None,
               radii=None):
    """The candidate ``SplitTest`` with the highest gain on ``rows``.

    Ties go to the earliest candidate.  Returns None when every candidate
    leaves one side empty.
    """
    if not candidates:
        raise ValueError("best_split needs at least one candidate")
    family = family or AxisFeatures()
    mode = mode or infer_mode(data)
    rows = np.arange(len(data)) if rows is None else np.asarray(rows, dtype=np.int64)
    params = TrainParams(radii=() if radii is None else tuple(radii))
    target = _Target(data, mode, params, n_classes)
    feats = np.array([c.feature.as_row() for c in candidates])
    thresholds = np.array([[c.threshold] for c in candidates], dtype=np.float64)
    values = family.evaluate_many(data, rows, feats)
    best = pick_best(target.gains(values, thresholds, rows))
    return None if best is None else candidates[best]


def n_jobs_from_env() -> int:
    try:
        return max(1, int(os.environ.get("MOUSEFOREST_THREADS", "1")))
    except ValueError:
        return 1


def _train_one(data, params, family, mode, n_classes, k, stream):
    rng = rng_for(params.seed, *stream, k)
    rows = np.arange(len(data))
    if params.bagging is not None:
        rows = np.sort(rng.choice(len(data), size=max(1, int(round(params.bagging * len(data)))), replace=False))
    return grow_tree(data, params, rng, family=family, rows=rows, mode=mode, n_classes=n_classes)


def train_forest(data, params: TrainParams, family=None, mode: str | None = None, n_classes: int | None = None,
                 n_jobs: int | None = None, stream: tuple = ("baseline",)) -> Forest:
    """Train ``params.num_trees`` trees, tree k on the stream ``(seed, *stream, k)``."""
    family = family or AxisFeatures()
    mode = mode or infer_mode(data)
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if mode == CLASSIFICATION and n_classes is None:
        n_classes = int(np.max(data.labels)) + 1
    n_jobs = n_jobs or n_jobs_from_env()
    if n_jobs > 1 and params.num_trees > 1:
        from joblib import Parallel, delayed

        trees = Parallel(n_jobs=n_jobs)(
            delayed(_train_one)(data, params, family, mode, n_classes, k, stream) for k in range(params.num_trees)
        )
    else:
        trees = [_train_one(data, params, family, mode, n_classes, k, stream) for k in range(params.num_trees)]
    n_joints = None if mode == CLASSIFICATION else data.offsets.shape[1]
    return Forest(tuple(trees), mode, params, family, n_classes, n_joints)


# ---------------------------------------------------------------------------
# prediction


def route(tree: Tree, family, data, row: int) -> int:
    return int(tree.apply(family, data, np.array([row]))[0])


def leaf_ids(forest: Forest, data, rows=None) -> np.ndarray:
    rows = np.arange(len(data)) if rows is None else np.asarray(rows, dtype=np.int64)
    return np.stack([t.apply(forest.family, data, rows) for t in forest.trees])


def majority_vote(votes: np.ndarray, n_classes: int) -> np.ndarray:
    """Column-wise majority of ``votes`` (n_voters, n); ties go to the lowest class."""
    counts = np.stack([(votes == c).sum(axis=0) for c in range(n_classes)])
    return np.argmax(counts, axis=0)


def predict_class(forest: Forest, data, rows=None) -> np.ndarray:
    ids = leaf_ids(forest, data, rows)
    votes = np.stack([t.label[i] for t, i in zip(forest.trees, ids)])
    return majority_vote(votes, forest.n_classes)


def predict_proba(forest: Forest, data, rows=None) -> np.ndarray:
    """Leaf histograms averaged over trees, shape (n, C)."""
    ids = leaf_ids(forest, data, rows)
    return np.mean([t.hist[i] for t, i in zip(forest.trees, ids)], axis=0)


def accuracy(forest: Forest, data, rows=None) -> float:
    rows = np.arange(len(data)) if rows is None else np.asarray(rows, dtype=np.int64)
    if len(rows) == 0:
        raise ValueError("accuracy of an empty evaluation set is undefined")
    return float(np.mean(predict_class(forest, data, rows) == data.labels[rows]))
