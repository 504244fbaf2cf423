"""Flat-array binary trees.

A ``Tree`` is immutable once built.  Nodes are stored in preorder; a node is
a leaf when ``left[node] == -1``.  Leaf payloads live in per-node arrays:

* classification: ``hist`` (n_nodes, C) class probabilities
* regression: ``mu`` (n_nodes, J, 3) mean offsets, ``low_conf`` (n_nodes, J)
  and ``support`` (n_nodes, J)

Internal nodes carry zeros in the payload arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ClassLeaf:
    histogram: np.ndarray
    label: int


@dataclass(frozen=True)
class RegLeaf:
    mean_offsets: np.ndarray  # (J, 3)
    low_confidence: np.ndarray  # (J,) bool
    support: np.ndarray  # (J,) int


class Tree:
    def __init__(self, feature, threshold, left, right, level, n_samples, hist=None, mu=None, low_conf=None, support=None):
        self.feature = np.asarray(feature, dtype=np.float64).reshape(-1, 2)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.level = np.asarray(level, dtype=np.int64)
        self.n_samples = np.asarray(n_samples, dtype=np.int64)
        self.hist = None if hist is None else np.asarray(hist, dtype=np.float64)
        self.mu = None if mu is None else np.asarray(mu, dtype=np.float64)
        self.low_conf = None if low_conf is None else np.asarray(low_conf, dtype=bool)
        self.support = None if support is None else np.asarray(support, dtype=np.int64)
        self.label = None if self.hist is None else np.argmax(self.hist, axis=1)
        for a in (self.feature, self.threshold, self.left, self.right, self.level, self.hist, self.mu, self.low_conf, self.support):
            if a is not None:
                a.setflags(write=False)

    @property
    def mode(self) -> str:
        return "classification" if self.hist is not None else "regression"

    @property
    def n_nodes(self) -> int:
        return len(self.left)

    def is_leaf(self, node: int) -> bool:
        return self.left[node] < 0

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.left < 0)

    def max_depth(self) -> int:
        """Number of node levels below (and including) the root."""
        return int(self.level.max() - self.level[0]) + 1

    def leaf_model(self, node: int):
        if not self.is_leaf(node):
            raise ValueError(f"node {node} is a split node")
        if self.hist is not None:
            return ClassLeaf(self.hist[node].copy(), int(self.label[node]))
        return RegLeaf(self.mu[node].copy(), self.low_conf[node].copy(), self.support[node].copy())

    def apply(self, family, data, rows: np.ndarray, start: int = 0) -> np.ndarray:
        """Leaf reached by each example of ``rows`` starting at node ``start``."""
        rows = np.asarray(rows, dtype=np.int64)
        node = np.full(len(rows), start, dtype=np.int64)
        active = np.flatnonzero(self.left[node] >= 0)
        while active.size:
            nd = node[active]
            vals = family.evaluate(data, rows[active], self.feature[nd])
            node[active] = np.where(vals > self.threshold[nd], self.left[nd], self.right[nd])
            active = active[self.left[node[active]] >= 0]
        return node

    def subtree(self, node: int) -> "Tree":
        b = TreeBuilder(self.mode, n_classes=None if self.hist is None else self.hist.shape[1], n_joints=None if self.mu is None else self.mu.shape[1])
        b.copy_subtree(self, node)
        return b.build()

    def same_as(self, other: "Tree") -> bool:
        names = ("feature", "threshold", "left", "right", "level", "n_samples", "hist", "mu", "low_conf", "support")
        for name in names:
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and (a.shape != b.shape or not np.array_equal(a, b)):
                return False
        return True


class TreeBuilder:
    """Accumulates nodes in creation order; create nodes depth-first to get preorder."""

    def __init__(self, mode: str, n_classes: int | None = None, n_joints: int | None = None):
        if mode not in ("classification", "regression"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.n_classes = n_classes
        self.n_joints = n_joints
        self.feature: list = []
        self.threshold: list = []
        self.left: list = []
        self.right: list = []
        self.level: list = []
        self.n_samples: list = []
        self.payload: list = []

    def __len__(self) -> int:
        return len(self.left)

    def _empty_payload(self):
        if self.mode == "classification":
            return np.zeros(self.n_classes)
        J = self.n_joints
        return (np.zeros((J, 3)), np.zeros(J, bool), np.zeros(J, np.int64))

    def add_split(self, feature_row, threshold: float, level: int, n_samples: int) -> int:
        self.feature.append(np.asarray(feature_row, dtype=np.float64))
        self.threshold.append(float(threshold))
        self.left.append(-1)
        self.right.append(-1)
        self.level.append(level)
        self.n_samples.append(n_samples)
        self.payload.append(self._empty_payload())
        return len(self.left) - 1

    def set_children(self, node: int, left: int, right: int) -> None:
        self.left[node] = left
        self.right[node] = right

    def add_leaf(self, model, level: int, n_samples: int) -> int:
        self.feature.append(np.zeros(2))
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.level.append(level)
        self.n_samples.append(n_samples)
        if self.mode == "classification":
            self.payload.append(np.asarray(model.histogram, dtype=np.float64))
        else:
            self.payload.append((model.mean_offsets, model.low_confidence, model.support))
        return len(self.left) - 1

    def copy_subtree(self, tree: Tree, node: int, level: int | None = None) -> int:
        """Copy ``tree``'s subtree at ``node``; ``level`` re-bases node levels."""
        shift = 0 if level is None else level - int(tree.level[node])
        return self._copy(tree, node, shift)

    def _copy(self, tree: Tree, node: int, shift: int) -> int:
        lvl = int(tree.level[node]) + shift
        if tree.is_leaf(node):
            return self.add_leaf(tree.leaf_model(node), lvl, int(tree.n_samples[node]))
        nid = self.add_split(tree.feature[node], tree.threshold[node], lvl, int(tree.n_samples[node]))
        left = self._copy(tree, int(tree.left[node]), shift)
        right = self._copy(tree, int(tree.right[node]), shift)
        self.set_children(nid, left, right)
        return nid

    def build(self) -> Tree:
        if not self.left:
            raise ValueError("empty tree")
        common = dict(
            feature=np.array(self.feature).reshape(-1, 2),
            threshold=np.array(self.threshold),
            left=np.array(self.left),
            right=np.array(self.right),
            level=np.array(self.level),
            n_samples=np.array(self.n_samples),
        )
        if self.mode == "classification":
            return Tree(hist=np.array(self.payload), **common)
        return Tree(
            mu=np.array([p[0] for p in self.payload]),
            low_conf=np.array([p[1] for p in self.payload]),
            support=np.array([p[2] for p in self.payload]),
            **common,
        )
