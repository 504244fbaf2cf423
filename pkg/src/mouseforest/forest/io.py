"""Forest files: a JSON document with a versioned header and one preorder node
table per tree.  Floats are written with 17 significant digits so a
save/load round trip reproduces every threshold and leaf value exactly."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .features import family_from_dict
from .train import CLASSIFICATION, Forest, TrainParams
from .tree import Tree, TreeBuilder

FORMAT_NAME = "mouseforest-forest"
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)


class ForestFormatError(ValueError):
    pass


def _num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if not np.isfinite(v):
        raise ForestFormatError("non-finite value cannot be serialised")
    s = format(v, ".17g")
    return "-0.0" if s == "-0" else s


def _array(a) -> str:
    return "[" + ",".join(_num(x) for x in np.asarray(a).ravel()) + "]"


def _tree_text(tree: Tree) -> str:
    tree = tree.subtree(0)  # canonical preorder, no orphans
    parts = [
        f'"nNodes":{tree.n_nodes}',
        f'"feature":{_array(tree.feature)}',
        f'"threshold":{_array(tree.threshold)}',
        f'"left":{_array(tree.left)}',
        f'"right":{_array(tree.right)}',
        f'"level":{_array(tree.level)}',
        f'"nSamples":{_array(tree.n_samples)}',
    ]
    if tree.hist is not None:
        parts.append(f'"hist":{_array(tree.hist)}')
    else:
        parts += [
            f'"mu":{_array(tree.mu)}',
            f'"lowConf":{_array(tree.low_conf)}',
            f'"support":{_array(tree.support)}',
        ]
    return "{" + ",".join(parts) + "}"


def dumps_forest(forest: Forest) -> str:
    header = {
        "format": FORMAT_NAME,
        "formatVersion": FORMAT_VERSION,
        "mode": forest.mode,
        "family": forest.family.to_dict(),
        "nClasses": forest.n_classes,
        "nJoints": forest.n_joints,
        "params": forest.params.to_dict(),
    }
    head = json.dumps(header, sort_keys=True)[:-1]
    trees = ",\n".join(_tree_text(t) for t in forest.trees)
    return head + ',"trees":[\n' + trees + "\n]}\n"


def save_forest(forest: Forest, path) -> None:
    Path(path).write_text(dumps_forest(forest), encoding="utf-8")


def _tree_from_dict(d: dict, mode: str, n_classes, n_joints) -> Tree:
    n = d["nNodes"]
    common = dict(
        feature=np.array(d["feature"], dtype=np.float64).reshape(n, 2),
        threshold=np.array(d["threshold"], dtype=np.float64),
        left=np.array(d["left"], dtype=np.int64),
        right=np.array(d["right"], dtype=np.int64),
        level=np.array(d["level"], dtype=np.int64),
        n_samples=np.array(d["nSamples"], dtype=np.int64),
    )
    if mode == CLASSIFICATION:
        tree = Tree(hist=np.array(d["hist"], dtype=np.float64).reshape(n, n_classes), **common)
    else:
        tree = Tree(
            mu=np.array(d["mu"], dtype=np.float64).reshape(n, n_joints, 3),
            low_conf=np.array(d["lowConf"], dtype=bool).reshape(n, n_joints),
            support=np.array(d["support"], dtype=np.int64).reshape(n, n_joints),
            **common,
        )
    _check_structure(tree)
    return tree


def _check_structure(tree: Tree) -> None:
    n = tree.n_nodes
    for arr in (tree.threshold, tree.left, tree.right, tree.level, tree.n_samples):
        if len(arr) != n:
            raise ForestFormatError("node arrays have inconsistent lengths")
    internal = tree.left >= 0
    if np.any((tree.right >= 0) != internal):
        raise ForestFormatError("split nodes need two children")
    parents = np.flatnonzero(internal)
    # preorder: the left child follows its parent, the right child comes later
    if np.any(tree.left[parents] != parents + 1) or np.any(tree.right[parents] <= tree.left[parents]) or np.any(tree.right[parents] >= n):
        raise ForestFormatError("node table is not in preorder")


def loads_forest(text: str) -> Forest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ForestFormatError(f"corrupt forest file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ForestFormatError("not a forest file")
    version = doc.get("formatVersion")
    if version not in SUPPORTED_VERSIONS:
        raise ForestFormatError(f"unsupported forest format version {version!r}")
    try:
        mode = doc["mode"]
        params = TrainParams(**doc["params"])
        family = family_from_dict(doc["family"])
        trees = tuple(_tree_from_dict(t, mode, doc["nClasses"], doc["nJoints"]) for t in doc["trees"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ForestFormatError):
            raise
        raise ForestFormatError(f"corrupt forest file: {exc}") from None
    if not trees:
        raise ForestFormatError("forest has no trees")
    return Forest(trees, mode, params, family, doc["nClasses"], doc["nJoints"])


def load_forest(path) -> Forest:
    return loads_forest(Path(path).read_text(encoding="utf-8"))


def forest_summary(forest: Forest) -> dict:
    return {
        "mode": forest.mode,
        "family": forest.family.to_dict(),
        "trees": len(forest.trees),
        "nodes": [t.n_nodes for t in forest.trees],
        "leaves": [int(len(t.leaves())) for t in forest.trees],
        "depth": [t.max_depth() for t in forest.trees],
        "params": forest.params.to_dict(),
    }


__all__ = ["ForestFormatError", "save_forest", "load_forest", "dumps_forest", "loads_forest", "forest_summary", "TreeBuilder"]
