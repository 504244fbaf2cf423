"""Discriminative node-at-a-time retraining of an existing forest.

Each tree is walked depth-first with a random subset of a second dataset.
At a split node the incumbent test and ``m`` freshly sampled tests are each
scored by pushing the node's examples through the *unchanged* subtrees below
it and measuring end-to-end performance there; the best test is installed and
the walk continues with the induced partition.  Data-starved split nodes are
collapsed into a leaf (shrink) and oversubscribed leaves are expanded into a
freshly grown subtree (grow).

Retraining builds a new tree in preorder while it walks the old one, which
is equivalent to editing the old tree in place: when a node is visited its
ancestors are already final and its descendants are still the originals.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .forest.train import CLASSIFICATION, Forest, Grower, TrainParams, _Target, n_jobs_from_env
from .forest.tree import Tree, TreeBuilder
from .seeding import rng_for

logger = logging.getLogger(__name__)

# keeps the regression metric finite for a perfect fit
METRIC_EPS = 1e-9

RESCORED, SHRUNK, GROWN, LEAF_REBUILT = "rescored", "shrunk", "grown", "leaf-rebuilt"


@dataclass
class DiscParams:
    m: int = 50
    leaf_size: int = 60  # l_n, shared with the baseline
    subset_fraction: float = 0.5
    iterations: int = 1
    start_level: int = 0
    keep_incumbent: bool = True
    scoring: str = "metric"  # "metric": end-to-end subtree score; "gain": local split gain
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.subset_fraction <= 1:
            raise ValueError("subset_fraction must be in (0, 1]")
        if self.iterations < 1 or self.start_level < 0 or self.leaf_size < 1 or self.m < 0:
            raise ValueError("invalid retraining parameters")
        if self.scoring not in ("metric", "gain"):
            raise ValueError("scoring must be 'metric' or 'gain'")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DiscResult:
    forest: Forest
    log: list = field(default_factory=list)

    def log_lines(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.log)


# ---------------------------------------------------------------------------
# per-example utilities and the performance metric


def row_errors(tree: Tree, leaves: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Summed joint error of each example given the leaf it reached.

    A joint the leaf has no support for is predicted at the pixel itself.
    """
    mu = tree.mu[leaves]
    sup = tree.support[leaves] > 0
    err = np.linalg.norm(np.where(sup[..., None], mu, 0.0) - offsets, axis=-1)
    return err.sum(axis=1)


def eval_metric_classification(tree: Tree, family, data, rows=None) -> int:
    """Number of examples the tree labels correctly."""
    rows = np.arange(len(data)) if rows is None else np.asarray(rows, dtype=np.int64)
    leaves = tree.apply(family, data, rows)
    return int(np.sum(tree.label[leaves] == data.labels[rows]))


def eval_metric_regression(tree: Tree, family, data, rows=None) -> float:
    """Reciprocal of the total joint error over the examples."""
    rows = np.arange(len(data)) if rows is None else np.asarray(rows, dtype=np.int64)
    leaves = tree.apply(family, data, rows)
    return metric_from_error(float(row_errors(tree, leaves, data.offsets[rows]).sum()))


def metric_from_error(total_error: float) -> float:
    return 1.0 / (total_error + METRIC_EPS)


def _threshold_scores(values, thresholds, u_left, u_right):
    """Total utility for each threshold when ``values > t`` go left."""
    order = np.argsort(values, kind="stable")
    vs = values[order]
    cl = np.concatenate([[0], np.cumsum(u_left[order])])
    cr = np.concatenate([[0], np.cumsum(u_right[order])])
    k = np.searchsorted(vs, thresholds, side="right")
    return (cl[-1] - cl[k]) + cr[k]


# ---------------------------------------------------------------------------


class Retrainer:
    """Retrains one tree against one subset of the retraining data."""

    def __init__(self, old: Tree, data, family, train_params: TrainParams, params: DiscParams, target: _Target,
                 rng: np.random.Generator, tree_index: int = 0, log: list | None = None):
        self.old = old
        self.data = data
        self.family = family
        self.params = params
        self.target = target
        self.rng = rng
        self.tree_index = tree_index
        self.log = [] if log is None else log
        self.max_levels = train_params.max_levels
        self.grow_params = replace(train_params, m=max(params.m, 1), leaf_size=params.leaf_size)
        self.candidate_override: dict = {}

    # utilities -----------------------------------------------------------
    def utility(self, node: int, rows: np.ndarray) -> np.ndarray:
        leaves = self.old.apply(self.family, self.data, rows, start=node)
        if self.target.mode == CLASSIFICATION:
            return (self.old.label[leaves] == self.target.labels[rows]).astype(np.int64)
        return -row_errors(self.old, leaves, self.target.offsets[rows])

    def score_value(self, utility_sum) -> float:
        if self.target.mode == CLASSIFICATION:
            return float(utility_sum)
        return metric_from_error(-float(utility_sum))

    # candidates ------------------------------------------------------------
    def candidates(self, node: int, rows: np.ndarray, level: int):
        """Groups of (feature row, thresholds, values); the incumbent is group 0."""
        old = self.old
        inc_feat = old.feature[node]
        inc_vals = self.family.evaluate(self.data, rows, inc_feat)
        groups = [(inc_feat, np.array([old.threshold[node]]), inc_vals)]
        if node in self.candidate_override:
            for test in self.candidate_override[node]:
                row = test.feature.as_row()
                groups.append((row, np.array([test.threshold]), self.family.evaluate(self.data, rows, row)))
        elif self.params.m > 0:
            feats, thresholds, values = self.family.sample_candidates(
                self.rng, self.data, rows, level, self.params.m, self.grow_params.thresholds_per_feature
            )
            groups += [(feats[f], thresholds[f], values[f]) for f in range(len(feats))]
        return groups

    def choose_test(self, node: int, rows: np.ndarray, level: int):
        groups = self.candidates(node, rows, level)
        if self.params.scoring == "metric":
            u_left = self.utility(int(self.old.left[node]), rows)
            u_right = self.utility(int(self.old.right[node]), rows)
            scores = [_threshold_scores(v, t, u_left, u_right) for _, t, v in groups]
        else:
            scores = [self.target.gains(v[None, :], t[None, :], rows)[0] for _, t, v in groups]
        flat = np.concatenate(scores).astype(np.float64)
        owner = np.concatenate([np.full(len(t), g) for g, (_, t, _) in enumerate(groups)])
        slot = np.concatenate([np.arange(len(t)) for _, t, _ in groups])
        lo = 0 if self.params.keep_incumbent else 1
        if lo >= len(flat):
            lo = 0
        pool = flat[lo:]
        if np.isfinite(pool).any():
            best = lo + int(np.argmax(np.where(np.isfinite(pool), pool, -np.inf)))
        else:
            best = 0
        g, s = owner[best], slot[best]
        feat, thresholds, values = groups[g]
        if self.params.scoring == "metric":
            inc_score, best_score = self.score_value(flat[0]), self.score_value(flat[best])
        else:
            inc_score, best_score = float(flat[0]), float(flat[best])
        if self.params.keep_incumbent and best_score < inc_score:
            raise AssertionError("retraining installed a test scoring below the incumbent")
        return feat, float(thresholds[s]), values > thresholds[s], inc_score, best_score

    # walk ------------------------------------------------------------------
    def record(self, level, n, action, incumbent=None, best=None):
        self.log.append({"tree": self.tree_index, "level": int(level), "n": int(n), "action": action,
                         "incumbent": incumbent, "best": best})

    def visit(self, b: TreeBuilder, node: int, rows: np.ndarray) -> int:
        old = self.old
        level = int(old.level[node])
        n = len(rows)
        if n == 0:
            return b.copy_subtree(old, node)
        is_leaf = old.is_leaf(node)
        if level < self.params.start_level:
            if is_leaf:
                return b.copy_subtree(old, node)
            go_left = self.family.evaluate(self.data, rows, old.feature[node]) > old.threshold[node]
            return self._split(b, old.feature[node], old.threshold[node], level, int(old.n_samples[node]), node, rows, go_left)
        l_n = self.params.leaf_size
        if not is_leaf:
            if n <= l_n:
                self.record(level, n, SHRUNK)
                return b.add_leaf(self.target.leaf(rows), level, n)
            feat, thr, go_left, inc, best = self.choose_test(node, rows, level)
            self.record(level, n, RESCORED, inc, best)
            return self._split(b, feat, thr, level, n, node, rows, go_left)
        if n > l_n:
            start = len(b)
            grower = Grower(self.data, self.family, self.grow_params, self.target, self.rng, max_levels=self.max_levels)
            nid = grower.grow(b, rows, level)
            self.record(level, n, GROWN if len(b) - start > 1 else LEAF_REBUILT)
            return nid
        self.record(level, n, LEAF_REBUILT)
        return b.add_leaf(self.target.leaf(rows), level, n)

    def _split(self, b, feat, thr, level, n, node, rows, go_left):
        nid = b.add_split(feat, thr, level, n)
        left = self.visit(b, int(self.old.left[node]), rows[go_left])
        right = self.visit(b, int(self.old.right[node]), rows[~go_left])
        b.set_children(nid, left, right)
        return nid

    def run(self, rows: np.ndarray, node: int = 0) -> Tree:
        """Retrain the subtree at ``node`` with ``rows``; the rest of the tree is copied."""
        b = self.target.builder()
        self._rebuild(b, 0, node, rows)
        return b.build()

    def _rebuild(self, b, cur, node, rows):
        if cur == node:
            return self.visit(b, cur, rows)
        old = self.old
        if old.is_leaf(cur):
            return b.copy_subtree(old, cur)
        nid = b.add_split(old.feature[cur], old.threshold[cur], int(old.level[cur]), int(old.n_samples[cur]))
        left = self._rebuild(b, int(old.left[cur]), node, rows)
        right = self._rebuild(b, int(old.right[cur]), node, rows)
        b.set_children(nid, left, right)
        return nid


def _target_for(forest: Forest, data) -> _Target:
    return _Target(data, forest.mode, forest.params, forest.n_classes)


def disc_train_node(tree: Tree, node: int, rows, data, forest: Forest, params: DiscParams, rng: np.random.Generator,
                    candidates=None, log: list | None = None) -> Tree:
    """Retrain the subtree rooted at ``node`` using ``rows`` (the examples that reach it).

    ``candidates`` replaces the random tests sampled at ``node`` itself.
    """
    r = Retrainer(tree, data, forest.family, forest.params, params, _target_for(forest, data), rng, log=log)
    if candidates is not None:
        r.candidate_override[node] = list(candidates)
    return r.run(np.asarray(rows, dtype=np.int64), node)


def _retrain_one(tree, k, data, forest, params, iteration):
    rng = rng_for(params.seed, "disc", iteration, k)
    n = len(data)
    size = max(1, int(round(params.subset_fraction * n)))
    rows = np.sort(rng.choice(n, size=size, replace=False))
    log: list = []
    r = Retrainer(tree, data, forest.family, forest.params, params, _target_for(forest, data), rng, tree_index=k, log=log)
    new = r.run(rows)
    for rec in log:
        rec["iteration"] = iteration
    return new, log


def disc_train_forest(forest: Forest, data, params: DiscParams, iteration: int = 1, n_jobs: int | None = None) -> DiscResult:
    """Retrain every tree on its own random subset of ``data``."""
    if len(data) == 0:
        raise ValueError("retraining data is empty")
    n_jobs = n_jobs or n_jobs_from_env()
    jobs = [(t, k) for k, t in enumerate(forest.trees)]
    if n_jobs > 1 and len(jobs) > 1:
        from joblib import Parallel, delayed

        out = Parallel(n_jobs=n_jobs)(delayed(_retrain_one)(t, k, data, forest, params, iteration) for t, k in jobs)
    else:
        out = [_retrain_one(t, k, data, forest, params, iteration) for t, k in jobs]
    log = [rec for _, lg in out for rec in lg]
    logger.debug("retrained %d trees, %d node visits", len(out), len(log))
    return DiscResult(forest.with_trees([t for t, _ in out]), log)


def disc_train_iterations(forest: Forest, make_dataset, params: DiscParams, evaluate=None, n_jobs: int | None = None):
    """Repeat retraining, each round starting from the previous round's forest
    with a freshly generated dataset ``make_dataset(iteration)``.

    Returns ``(forest, trace, log)``; ``trace[i]`` is ``evaluate`` applied
    after iteration i (entry 0 is the starting forest).
    """
    trace = [evaluate(forest) if evaluate else None]
    log: list = []
    for it in range(1, params.iterations + 1):
        res = disc_train_forest(forest, make_dataset(it), params, iteration=it, n_jobs=n_jobs)
        forest = res.forest
        log += res.log
        trace.append(evaluate(forest) if evaluate else None)
    return forest, trace, log


def monotonicity_violations(log) -> int:
    """Rescored nodes whose installed score fell below the incumbent's."""
    return sum(1 for r in log if r["action"] == RESCORED and r["best"] < r["incumbent"])
