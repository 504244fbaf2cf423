"""Acceptance suite: one test per criterion, each printing a pass/fail line.

These runs are long (about 20 minutes on one core); deselect with ``-m "not slow"``.
Every retraining run made here is logged so the monotonicity check covers
all of them.
"""
import time

import numpy as np
import pytest
from conftest import CRITERIA, record
from oracles import brute_best

import mouseforest.disc as disc_mod
import mouseforest.gauss as gauss_mod
from mouseforest import runner
from mouseforest.config import ExperimentConfig, load_config
from mouseforest.forest import Axis2D, PointSet, SplitTest, TrainParams, accuracy, best_split, predict_class, train_forest
from mouseforest.forest.io import load_forest, save_forest
from mouseforest.gauss import DESK_SIZE, canonical_spec, default_train_params, make_datasets, run_ablation, run_controls
from mouseforest.pose import experiments as px

pytestmark = pytest.mark.slow

RETRAIN_LOGS: list[list] = []


@pytest.fixture(scope="module", autouse=True)
def log_every_retraining():
    """Wrap the retraining entry point so every run's log is kept."""
    original = disc_mod.disc_train_forest

    def logged(*args, **kw):
        res = original(*args, **kw)
        RETRAIN_LOGS.append(res.log)
        return res

    with pytest.MonkeyPatch.context() as mp:
        for module in (disc_mod, gauss_mod, runner, px):
            mp.setattr(module, "disc_train_forest", logged)
        yield


# ---------------------------------------------------------------------------
# gaussian benchmark


@pytest.fixture(scope="module")
def controls():
    start = time.perf_counter()
    out = run_controls(canonical_spec(), n=DESK_SIZE)
    out["seconds"] = time.perf_counter() - start
    return out


def test_c01_baseline_accuracy_band():
    start = time.perf_counter()
    data = make_datasets(canonical_spec(), DESK_SIZE)
    acc = accuracy(train_forest(data.train, default_train_params(data.seed)), data.test)
    secs = time.perf_counter() - start
    ok = 0.75 <= acc <= 0.85 and secs < 300
    record(1, ok, f"baseline accuracy {acc:.5f} in [0.75, 0.85], {secs:.0f} s (limit 300 s)")
    assert ok, CRITERIA[1]


def test_c02_retraining_gain(controls):
    b, d = controls["baselineAcc"], controls["discAcc"]
    ok = d - b >= 0.005 and controls["seconds"] < 600
    record(2, ok, f"baseline {b:.5f} -> retrained {d:.5f}, gain {d - b:+.5f} (need >= +0.005)")
    assert ok, CRITERIA[2]


def test_c03_control_ordering(controls):
    u, g, d = controls["unionAcc"], controls["gainVariantAcc"], controls["discAcc"]
    ok = g - u >= 0.001 and d - g >= 0.001
    record(3, ok, f"union {u:.5f}, gain-scored {g:.5f}, full {d:.5f} (need increasing order, each gap >= 0.001)")
    assert ok, CRITERIA[3]


def test_c04_ablation_trends():
    by = {kind: {r["value"]: r for r in run_ablation(kind)} for kind in ("forestSize", "m", "leafSize", "startLevel", "iterations")}
    sizes = by["forestSize"]
    a = all(r["discAcc"] >= r["baselineAcc"] for r in sizes.values())
    m_acc = {v: r["discAcc"] for v, r in by["m"].items()}
    b = m_acc[320] >= max(m_acc.values()) - 0.01
    big_leaf = by["leafSize"][10000]
    c = big_leaf["discAcc"] < big_leaf["baselineAcc"]
    start = by["startLevel"]
    d = start[0]["discAcc"] >= start[8]["discAcc"] - 0.002
    it = {v: r["discAcc"] for v, r in by["iterations"].items()}
    early, late = it[2] - it[1], it[5] - it[2]
    e = early >= 3 * late
    parts = {
        "a": (a, "disc>=baseline at " + f"{sum(r['discAcc'] >= r['baselineAcc'] for r in sizes.values())}/{len(sizes)} sizes"),
        "b": (b, f"m=320 {m_acc[320]:.5f} vs max {max(m_acc.values()):.5f}"),
        "c": (c, f"leaf 10000 {big_leaf['discAcc']:.5f} vs baseline {big_leaf['baselineAcc']:.5f}"),
        "d": (d, f"start 0 {start[0]['discAcc']:.5f} vs start 8 {start[8]['discAcc']:.5f}"),
        "e": (e, f"gain 1->2 {early:+.5f} vs 2->5 {late:+.5f}"),
    }
    detail = "; ".join(f"({k}) {'ok' if v else 'no'}: {msg}" for k, (v, msg) in parts.items())
    ok = all(v for v, _ in parts.values())
    record(4, ok, detail)
    assert ok, CRITERIA[4]


# ---------------------------------------------------------------------------
# split selection


def test_c06_best_split_matches_exhaustive_search():
    rng = np.random.default_rng(6)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 33))
        X = rng.integers(0, 1000, (n, 2)) / 1000  # on the threshold grid so ties and equality occur
        y = rng.integers(0, int(rng.integers(2, 4)), n)
        k = int(rng.integers(1, 11))
        axes, ts = rng.integers(0, 2, k), rng.integers(1, 1000, k) / 1000
        tests = [SplitTest(Axis2D(int(ax)), float(t)) for ax, t in zip(axes, ts)]
        want = brute_best(list(y), [list(X[:, ax]) for ax in axes], list(ts))
        got = best_split(PointSet(X, y), tests)
        mismatches += got != (None if want is None else tests[want])
    record(6, mismatches == 0, f"{mismatches} mismatches over 1000 node sets")
    assert mismatches == 0, CRITERIA[6]


# ---------------------------------------------------------------------------
# synthetic mouse pose and labels


@pytest.fixture(scope="module")
def pose_run():
    start = time.perf_counter()
    out = px.run_pose(px.PoseSetup())
    out["seconds"] = time.perf_counter() - start
    return out


def test_c07_pose_retraining_reduces_error(pose_run):
    b, d = pose_run["baseline"], pose_run["disc"]
    rel = (b["mean"] - d["mean"]) / b["mean"]
    worst = int(np.argmax(b["perJoint"]))
    ok = rel >= 0.03 and d["perJoint"][worst] < b["perJoint"][worst] and pose_run["seconds"] < 3600
    record(7, ok, f"mean {b['mean']:.2f} -> {d['mean']:.2f} mm ({100 * rel:.2f}% lower, need 3%); "
                  f"worst joint {worst + 1} {b['perJoint'][worst]:.2f} -> {d['perJoint'][worst]:.2f} mm; {pose_run['seconds']:.0f} s")
    assert ok, CRITERIA[7]


def test_c08_noise_robustness(pose_run):
    forest = pose_run["forests"][1]
    _, test = pose_run["sets"]
    setup = px.PoseSetup()
    clean = pose_run["disc"]["mean"]
    noisy = px.noise_sweep(forest, test, sigmas=(5,), n_query=setup.n_query, seed=setup.seed)[0]["mean"]
    ok = noisy <= 2 * clean
    record(8, ok, f"sigma 5 error {noisy:.2f} mm vs sigma 0 error {clean:.2f} mm (limit 2x)")
    assert ok, CRITERIA[8]


def test_c09_part_labeling():
    res = px.run_labels(px.LabelSetup())
    base = res["baseline"]["accuracy"]
    disc = res["disc"][100]
    diag = np.diag(disc["confusion"])
    high = int((diag >= 0.80).sum())
    ok = disc["accuracy"] >= base and high >= 4
    record(9, ok, f"accuracy baseline {base:.4f} vs retrained {disc['accuracy']:.4f}; "
                  f"diagonals {np.round(diag, 3).tolist()} ({high} of 6 >= 0.80, need 4)")
    assert ok, CRITERIA[9]


def test_c10_ik_round_trip():
    res = px.ik_limb_errors(1000)
    ok = res["worstBoneLength"] <= 1e-6 and res["worstHindAngle"] <= 1e-6 and res["worstMainShift"] == 0.0
    record(10, ok, f"bone length {res['worstBoneLength']:.2e} mm, hind angle {res['worstHindAngle']:.2e} rad, "
                   f"main joint shift {res['worstMainShift']:.1e} over 1000 poses")
    assert ok, CRITERIA[10]


# ---------------------------------------------------------------------------
# determinism and persistence


SMALL_RUNS = [
    ("gauss", "disc", {"n": 10_000}),
    ("gauss", "controls", {"n": 10_000}),
    ("gauss", "ablation", {"n": 10_000, "kind": "iterations", "grid": [0, 1, 2]}),
    ("pose", "pose", {"n_train": 40, "n_test": 8, "n_query": 50}),
    ("pose", "noise", {"n_train": 40, "n_test": 8, "n_query": 50, "sigmas": [0, 5]}),
    ("label", "label", {"n_train": 30, "n_test": 5, "px_train": 50, "px_disc": 50}),
    ("ik", "ik", {"n_poses": 100}),
]


def test_c11_determinism_and_persistence(tmp_path):
    differing = []
    for task, experiment, options in SMALL_RUNS:
        cfg = ExperimentConfig(task, experiment, seed=9 if task == "gauss" else 0, output_dir=str(tmp_path), options=dict(options))
        runner.run_experiment(cfg)
        out = tmp_path / f"{task}-{experiment}"
        first = {p.name: p.read_bytes() for p in out.glob("*.csv")}
        runner.run_experiment(load_config(out / "config.json"))
        again = {p.name: p.read_bytes() for p in out.glob("*.csv")}
        if not first or again != first:
            differing.append(f"{task}-{experiment}")

    data = make_datasets(canonical_spec(), 20_000)
    forest = train_forest(data.train, TrainParams(num_trees=5, m=50, leaf_size=60, seed=9))
    save_forest(forest, tmp_path / "f.json")
    back = load_forest(tmp_path / "f.json")
    probe = PointSet(np.random.default_rng(11).random((10_000, 2)), np.zeros(10_000, dtype=int))
    same = np.array_equal(predict_class(forest, probe), predict_class(back, probe))
    ok = not differing and same
    record(11, ok, f"{len(SMALL_RUNS) - len(differing)}/{len(SMALL_RUNS)} experiments rerun byte-identically; "
                   f"save/load predictions identical on 10^4 inputs: {same}")
    assert ok, CRITERIA[11]


# ---------------------------------------------------------------------------
# runs last: every retraining above must have kept its incumbents


def test_c05_monotonicity_on_every_retraining_run():
    rescored = sum(1 for log in RETRAIN_LOGS for r in log if r["action"] == disc_mod.RESCORED)
    bad = sum(disc_mod.monotonicity_violations(log) for log in RETRAIN_LOGS)
    ok = bad == 0 and len(RETRAIN_LOGS) > 0
    record(5, ok, f"{bad} violations over {len(RETRAIN_LOGS)} retraining runs ({rescored} rescored nodes)")
    assert ok, CRITERIA[5]
