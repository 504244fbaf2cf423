"""Two-class Gaussian-mixture benchmark in the unit square.

Eighteen isotropic Gaussians, nine per class; axis-threshold trees are
trained on one sample, retrained on a second and scored on a third.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .disc import DiscParams, disc_train_forest, disc_train_iterations
from .forest import Axis2D, AxisFeatures, PointSet, SplitTest, TrainParams, accuracy, sample_axis_thresholds, train_forest
from .seeding import rng_for

N_COMPONENTS = 18
CANONICAL_SEED = 9
DESK_SIZE = 100_000
FULL_SIZE = 1_000_000
GOLDEN_SPEC = Path(__file__).with_name("data") / "gauss_canonical_spec.json"


@dataclass(frozen=True)
class GaussianMixtureSpec:
    means: np.ndarray  # (18, 2)
    sigmas: np.ndarray  # (18,)
    classes: np.ndarray  # (18,)
    seed: int

    def __post_init__(self):
        if len(self.means) != N_COMPONENTS:
            raise ValueError("a mixture has exactly 18 components")
        counts = np.bincount(self.classes, minlength=2)
        if counts[0] != 9 or counts[1] != 9:
            raise ValueError("the mixture needs nine components per class")
        if not (np.all((self.means > 0) & (self.means < 1)) and np.all((self.sigmas > 0) & (self.sigmas < 0.2))):
            raise ValueError("means must lie in (0,1) and sigmas in (0,0.2)")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "means": self.means.tolist(),
            "sigmas": self.sigmas.tolist(),
            "classes": self.classes.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixtureSpec":
        return cls(np.array(d["means"], dtype=float), np.array(d["sigmas"], dtype=float), np.array(d["classes"], dtype=np.int64), int(d["seed"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "GaussianMixtureSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _open_unit(rng, size, hi=1.0):
    # uniform on the open interval (0, hi)
    u = rng.random(size)
    while np.any(u == 0.0):
        u[u == 0.0] = rng.random(int(np.sum(u == 0.0)))
    return u * hi


def gen_mixture_spec(seed: int) -> GaussianMixtureSpec:
    rng = rng_for(seed, "gauss", "mixture")
    means = _open_unit(rng, (N_COMPONENTS, 2))
    sigmas = _open_unit(rng, N_COMPONENTS, 0.2)
    classes = np.tile([0, 1], N_COMPONENTS // 2)
    return GaussianMixtureSpec(means, sigmas, classes, int(seed))


def sample_dataset(spec: GaussianMixtureSpec, n: int, rng: np.random.Generator) -> PointSet:
    """``n`` points: pick a component uniformly, then draw from it."""
    if n < 1:
        raise ValueError("n must be >= 1")
    comp = rng.integers(0, N_COMPONENTS, size=n)
    X = spec.means[comp] + spec.sigmas[comp, None] * rng.standard_normal((n, 2))
    return PointSet(X, spec.classes[comp])


def sample_components(spec: GaussianMixtureSpec, n: int, rng: np.random.Generator):
    """Like ``sample_dataset`` but also returns the component index of each point."""
    comp = rng.integers(0, N_COMPONENTS, size=n)
    X = spec.means[comp] + spec.sigmas[comp, None] * rng.standard_normal((n, 2))
    return PointSet(X, spec.classes[comp]), comp


def axis_threshold_candidates(level: int, count: int, rng: np.random.Generator, replace: bool = True) -> list[SplitTest]:
    """Split tests on the level's axis (even = X, odd = Y) with grid thresholds."""
    if count < 1:
        raise ValueError("count must be >= 1")
    axis = AxisFeatures.axis_for_level(level)
    return [SplitTest(Axis2D(axis), float(t)) for t in sample_axis_thresholds(rng, count, replace=replace)]


@dataclass
class GaussData:
    spec: GaussianMixtureSpec
    train: PointSet
    disc: PointSet
    test: PointSet
    seed: int = 0


def make_datasets(spec: GaussianMixtureSpec, n: int = DESK_SIZE, seed: int | None = None) -> GaussData:
    """Training, retraining and evaluation sets drawn on separate streams."""
    seed = spec.seed if seed is None else seed
    return GaussData(
        spec,
        sample_dataset(spec, n, rng_for(seed, "gauss", "train")),
        sample_dataset(spec, n, rng_for(seed, "gauss", "disc")),
        sample_dataset(spec, n, rng_for(seed, "gauss", "test")),
        seed,
    )


def disc_dataset(spec: GaussianMixtureSpec, n: int, seed: int, iteration: int) -> PointSet:
    """Fresh retraining set for a given iteration (iteration 1 equals ``make_datasets(...).disc``)."""
    if iteration == 1:
        return sample_dataset(spec, n, rng_for(seed, "gauss", "disc"))
    return sample_dataset(spec, n, rng_for(seed, "gauss", "disc", iteration))


def canonical_spec() -> GaussianMixtureSpec:
    return GaussianMixtureSpec.load(GOLDEN_SPEC)


# ---------------------------------------------------------------------------
# experiments

ABLATION_KINDS = ("forestSize", "m", "leafSize", "startLevel", "iterations")

DEFAULT_GRIDS = {
    "forestSize": [1, 3, 5, 7, 9, 11, 13, 15, 17, 19],
    "m": [5, 10, 20, 40, 80, 160, 320, 640],
    "leafSize": [60, 120, 250, 500, 1000, 2500, 5000, 10000],
    "startLevel": [0, 2, 4, 6, 8, 10, 12, 14, 16, 18],
    "iterations": [0, 1, 2, 3, 4, 5],
}


def default_train_params(seed: int) -> TrainParams:
    return TrainParams(num_trees=5, m=50, leaf_size=60, max_levels=20, seed=seed)


def default_disc_params(seed: int) -> DiscParams:
    return DiscParams(m=50, leaf_size=60, seed=seed)


def _check_grid(kind, grid):
    if kind not in ABLATION_KINDS:
        raise ValueError(f"unknown ablation kind {kind!r}; expected one of {ABLATION_KINDS}")
    grid = [int(v) for v in grid]
    if not grid:
        raise ValueError("empty ablation grid")
    lowest = 0 if kind in ("startLevel", "iterations") else 1
    if min(grid) < lowest:
        raise ValueError(f"{kind} grid values must be >= {lowest}")
    return grid


def _ablation_one(kind, grid, data: GaussData, seed, train_params, disc_params):
    tp = train_params or default_train_params(seed)
    dp = disc_params or default_disc_params(seed)
    if kind == "forestSize":
        # tree k depends only on (seed, k), so smaller forests are prefixes of the largest
        base = train_forest(data.train, replace(tp, num_trees=max(grid)))
        disc = disc_train_forest(base, data.disc, dp).forest
        return [(v, accuracy(base.with_trees(base.trees[:v]), data.test), accuracy(disc.with_trees(disc.trees[:v]), data.test)) for v in grid]
    base = train_forest(data.train, tp)
    base_acc = accuracy(base, data.test)
    if kind == "iterations":
        dp = replace(dp, iterations=max(max(grid), 1))
        n = len(data.disc)
        _, trace, _ = disc_train_iterations(
            base, lambda it: disc_dataset(data.spec, n, data.seed, it), dp, evaluate=lambda f: accuracy(f, data.test)
        )
        return [(v, base_acc, trace[v]) for v in grid]
    field_name = {"m": "m", "leafSize": "leaf_size", "startLevel": "start_level"}[kind]
    rows = []
    for v in grid:
        disc = disc_train_forest(base, data.disc, replace(dp, **{field_name: v})).forest
        rows.append((v, base_acc, accuracy(disc, data.test)))
    return rows


def run_ablation(kind: str, grid=None, spec: GaussianMixtureSpec | None = None, seeds=(CANONICAL_SEED,), n: int = DESK_SIZE,
                 train_params: TrainParams | None = None, disc_params: DiscParams | None = None) -> list[dict]:
    """Baseline vs retrained accuracy for each value of one parameter.

    Datasets are fixed across the grid.  With several seeds the accuracies
    are averaged; the seed drives both tree randomness and the datasets.
    """
    grid = _check_grid(kind, DEFAULT_GRIDS.get(kind, []) if grid is None else grid)
    seeds = list(seeds)
    totals = np.zeros((len(grid), 2))
    for seed in seeds:
        sp = spec or gen_mixture_spec(seed)
        data = make_datasets(sp, n, seed)
        tp = None if train_params is None else replace(train_params, seed=seed)
        dp = None if disc_params is None else replace(disc_params, seed=seed)
        for i, (_, b, d) in enumerate(_ablation_one(kind, grid, data, seed, tp, dp)):
            totals[i] += (b, d)
    totals /= len(seeds)
    return [{"value": v, "baselineAcc": float(b), "discAcc": float(d)} for v, (b, d) in zip(grid, totals)]


def run_controls(spec: GaussianMixtureSpec, n: int = DESK_SIZE, seed: int | None = None,
                 train_params: TrainParams | None = None, disc_params: DiscParams | None = None) -> dict:
    """Accuracy of the baseline, a baseline trained on both datasets with a
    doubled leaf size, retraining scored with local gain, and full retraining."""
    seed = spec.seed if seed is None else seed
    data = make_datasets(spec, n, seed)
    tp = train_params or default_train_params(seed)
    dp = disc_params or default_disc_params(seed)
    base = train_forest(data.train, tp)
    union = train_forest(PointSet.concat(data.train, data.disc), replace(tp, leaf_size=2 * tp.leaf_size), stream=("union",))
    gain_variant = disc_train_forest(base, data.disc, replace(dp, scoring="gain")).forest
    full = disc_train_forest(base, data.disc, dp).forest
    return {
        "baselineAcc": accuracy(base, data.test),
        "unionAcc": accuracy(union, data.test),
        "gainVariantAcc": accuracy(gain_variant, data.test),
        "discAcc": accuracy(full, data.test),
    }
