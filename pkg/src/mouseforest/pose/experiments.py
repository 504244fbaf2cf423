"""Synthetic pose-estimation and part-labeling experiments."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..disc import DiscParams, disc_train_forest
from ..forest import DepthFeatures, Forest, TrainParams, train_forest
from ..synth.dataset import SynthSet, make_synth_set
from ..synth.poses import Perturbation, pose_library, sample_poses
from ..synth.render import Camera
from ..synth.skeleton import FORE_LEFT, FORE_RIGHT, HIND_LEFT, HIND_RIGHT, MAIN_JOINTS, PAWS, default_model, forward_kinematics
from .estimate import confusion_matrix, estimate_batch, joint_error, part_label_image
from .ik import ik_fuse
from .pixels import MAIN_RADII, sample_pixels

logger = logging.getLogger(__name__)


@dataclass
class PoseSetup:
    n_train: int = 5000  # images
    n_test: int = 500
    px_train: int = 20  # pixels per image for baseline training
    px_disc: int = 40  # further pixels per image for retraining
    n_query: int = 200
    width: int = 64
    height: int = 64
    seed: int = 0

    @classmethod
    def full(cls, seed: int = 0) -> "PoseSetup":
        return cls(n_train=240_000, n_test=5000, width=160, height=120, seed=seed)

    @property
    def camera(self) -> Camera:
        return Camera.for_size(self.width, self.height)

    def to_dict(self) -> dict:
        return asdict(self)


def pose_train_params(seed: int, num_trees: int = 7, m: int = 100) -> TrainParams:
    return TrainParams(num_trees=num_trees, m=m, leaf_size=60, max_levels=20, thresholds_per_feature=10,
                       radii=MAIN_RADII, eigen_bound=100.0, seed=seed)


def pose_disc_params(seed: int, m: int = 100) -> DiscParams:
    return DiscParams(m=m, leaf_size=60, seed=seed)


def make_pose_sets(setup: PoseSetup) -> tuple[SynthSet, SynthSet]:
    cam = setup.camera
    return (make_synth_set(setup.n_train, setup.seed, "train", cam),
            make_synth_set(setup.n_test, setup.seed, "test", cam))


def training_pixels(train: SynthSet, setup: PoseSetup, target: str = "offsets", images=None):
    """Baseline and retraining pixels: disjoint draws from the same images."""
    d_t = sample_pixels(train, setup.px_train, setup.seed, "train", target, images=images)
    d_d = sample_pixels(train, setup.px_disc, setup.seed, "train", target, images=images, skip=setup.px_train)
    return d_t, d_d


def evaluate_pose(forest: Forest, test: SynthSet, n_query: int = 200, seed: int = 0, images=None) -> dict:
    """Mean per-joint error (mm at unit mouse scale) over the test images."""
    ests = estimate_batch(forest, test, n_query, seed, images=images)
    errs = np.array([joint_error(e, test.joints[k][np.asarray(MAIN_JOINTS) - 1], test.poses[k].scale)[0]
                     for k, e in enumerate(ests)])
    per_joint = np.nanmean(errs, axis=0)
    missing = int(np.isnan(errs).sum())
    return {"perJoint": per_joint, "mean": float(np.nanmean(errs)), "missing": missing}


def run_pose(setup: PoseSetup, train_params: TrainParams | None = None, disc_params: DiscParams | None = None,
             sets=None) -> dict:
    tp = train_params or pose_train_params(setup.seed)
    dp = disc_params or pose_disc_params(setup.seed)
    train, test = sets or make_pose_sets(setup)
    d_t, d_d = training_pixels(train, setup)
    family = DepthFeatures()
    base = train_forest(d_t, tp, family=family)
    res = disc_train_forest(base, d_d, dp)
    return {
        "baseline": evaluate_pose(base, test, setup.n_query, setup.seed),
        "disc": evaluate_pose(res.forest, test, setup.n_query, setup.seed),
        "forests": (base, res.forest),
        "log": res.log,
        "sets": (train, test),
    }


def noise_sweep(forest: Forest, test: SynthSet, sigmas=(0, 1, 2, 3, 4, 5), n_query: int = 200, seed: int = 0) -> list[dict]:
    rows = []
    for s in sigmas:
        noisy = test.with_noise(float(s), seed, stream=f"noise-{float(s):g}") if s > 0 else test
        ev = evaluate_pose(forest, noisy, n_query, seed)
        rows.append({"sigma": float(s), "mean": ev["mean"], "perJoint": ev["perJoint"]})
    return rows


def pose_forest_size_sweep(setup: PoseSetup, sizes=(1, 3, 5, 7, 9), sets=None) -> list[dict]:
    train, test = sets or make_pose_sets(setup)
    d_t, _ = training_pixels(train, setup)
    forest = train_forest(d_t, replace(pose_train_params(setup.seed), num_trees=max(sizes)), family=DepthFeatures())
    return [{"forestSize": s, "meanError": evaluate_pose(forest.with_trees(forest.trees[:s]), test, setup.n_query, setup.seed)["mean"]}
            for s in sizes]


def pose_m_sweep(setup: PoseSetup, ms=(25, 50, 100, 200), sets=None) -> list[dict]:
    train, test = sets or make_pose_sets(setup)
    d_t, _ = training_pixels(train, setup)
    out = []
    for m in ms:
        forest = train_forest(d_t, pose_train_params(setup.seed, m=m), family=DepthFeatures())
        out.append({"m": m, "meanError": evaluate_pose(forest, test, setup.n_query, setup.seed)["mean"]})
    return out


# ---------------------------------------------------------------------------
# limb completion


def ik_limb_errors(n_poses: int = 1000, seed: int = 0, paw_jitter: float = 0.0) -> dict:
    """Re-solve limbs from true main joints and (optionally jittered) true paws.

    Returns per-limb-joint mean position error plus the worst bone-length
    and hind-angle deviations and the worst main-joint displacement.
    """
    model = default_model()
    poses = sample_poses(pose_library(model), Perturbation(), n_poses, seed, model, stream="ik")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    limb = [j for c in (FORE_LEFT, FORE_RIGHT, HIND_LEFT, HIND_RIGHT) for j in c if j not in PAWS]
    errs, worst_len, worst_angle, worst_main, clamped = [], 0.0, 0.0, 0.0, 0
    for pose in poses:
        truth = forward_kinematics(model, pose)
        paws = {p: truth[p - 1] + rng.normal(0.0, paw_jitter, 3) for p in PAWS}
        main = truth[: len(MAIN_JOINTS)].copy()
        res = ik_fuse(main, paws, model, pose.scale, pose.bone_scale)
        q = res.positions
        clamped += sum(res.clamped.values())
        worst_main = max(worst_main, float(np.abs(q[: len(MAIN_JOINTS)] - main).max()))
        for parent, child in model.bones():
            if child in limb or child in PAWS:
                want = model.bone_length(child, pose.scale, pose.bone_scale)
                worst_len = max(worst_len, abs(float(np.linalg.norm(q[child - 1] - q[parent - 1])) - want))
        for knee, ankle, paw in (HIND_LEFT, HIND_RIGHT):
            u, v = q[knee - 1] - q[ankle - 1], q[paw - 1] - q[ankle - 1]
            ang = np.arccos(np.clip(u @ v / np.linalg.norm(u) / np.linalg.norm(v), -1, 1))
            worst_angle = max(worst_angle, abs(float(ang) - np.pi / 2))
        errs.append(np.linalg.norm(q[np.array(limb) - 1] - truth[np.array(limb) - 1], axis=1))
    return {
        "joints": limb,
        "meanError": np.mean(errs, axis=0),
        "worstBoneLength": worst_len,
        "worstHindAngle": worst_angle,
        "worstMainShift": worst_main,
        "clamped": clamped,
    }


# ---------------------------------------------------------------------------
# part labeling


@dataclass
class LabelSetup:
    n_train: int = 1000
    n_test: int = 100
    px_train: int = 100
    px_disc: int = 100
    sigma: float = 16.0
    width: int = 64
    height: int = 64
    seed: int = 0

    @property
    def camera(self) -> Camera:
        return Camera.for_size(self.width, self.height)

    def to_dict(self) -> dict:
        return asdict(self)


def label_train_params(seed: int, m: int = 30) -> TrainParams:
    return TrainParams(num_trees=7, m=m, leaf_size=60, max_levels=13, thresholds_per_feature=10, seed=seed)


def label_disc_params(seed: int, m: int = 100) -> DiscParams:
    return DiscParams(m=m, leaf_size=60, seed=seed)


def make_label_set(setup: LabelSetup, split: str) -> SynthSet:
    """Noisy ``train`` or ``test`` images for the labeling experiment."""
    count = setup.n_train if split == "train" else setup.n_test
    clean = make_synth_set(count, setup.seed, f"label-{split}", setup.camera)
    return clean.with_noise(setup.sigma, setup.seed, f"label-noise-{split}")


def make_label_sets(setup: LabelSetup):
    return make_label_set(setup, "train"), make_label_set(setup, "test")


def evaluate_labels(forest: Forest, test: SynthSet) -> dict:
    pred = np.stack([part_label_image(forest, test.depth[k], test.camera) for k in range(len(test))])
    mat, support = confusion_matrix(pred, test.labels)
    fg = test.labels != 255
    return {"accuracy": float(np.mean(pred[fg] == test.labels[fg])), "confusion": mat, "support": support}


def run_labels(setup: LabelSetup, train_params: TrainParams | None = None, disc_ms=(100,), sets=None) -> dict:
    tp = train_params or label_train_params(setup.seed)
    train, test = sets or make_label_sets(setup)
    d_t = sample_pixels(train, setup.px_train, setup.seed, "label", "labels")
    d_d = sample_pixels(train, setup.px_disc, setup.seed, "label", "labels", skip=setup.px_train)
    base = train_forest(d_t, tp, family=DepthFeatures(), n_classes=6)
    out = {"baseline": evaluate_labels(base, test), "disc": {}, "forests": {"baseline": base}, "logs": {}}
    for m in disc_ms:
        res = disc_train_forest(base, d_d, label_disc_params(setup.seed, m))
        out["disc"][m] = evaluate_labels(res.forest, test)
        out["forests"][m] = res.forest
        out["logs"][m] = res.log
    return out
