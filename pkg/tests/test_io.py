import json

import numpy as np
import pytest
from conftest import blobs

from mouseforest.forest import DepthFeatures, ForestFormatError, TrainParams, load_forest, predict_proba, save_forest, train_forest
from mouseforest.forest.io import dumps_forest, forest_summary, loads_forest
from mouseforest.pose.estimate import aggregate
from mouseforest.pose.pixels import MAIN_RADII, sample_pixels
from mouseforest.seeding import child_seed, rng_for


@pytest.fixture(scope="module")
def class_forest():
    return train_forest(blobs(3000), TrainParams(num_trees=3, leaf_size=20, seed=11))


@pytest.fixture(scope="module")
def reg_forest(small_synth):
    px = sample_pixels(small_synth, 40, 0, "io")
    params = TrainParams(num_trees=2, m=10, leaf_size=30, radii=MAIN_RADII, seed=3)
    return train_forest(px, params, family=DepthFeatures()), px


def test_resave_is_byte_identical(tmp_path, class_forest, reg_forest):
    for forest in (class_forest, reg_forest[0]):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_forest(forest, a)
        save_forest(load_forest(a), b)
        assert a.read_bytes() == b.read_bytes()


def test_round_trip_predictions_exact(tmp_path, class_forest):
    save_forest(class_forest, tmp_path / "f.json")
    back = load_forest(tmp_path / "f.json")
    X = np.random.default_rng(5).uniform(-0.2, 1.2, (10_000, 2))
    from mouseforest.forest import PointSet

    data = PointSet(X, np.zeros(len(X)))
    np.testing.assert_array_equal(predict_proba(class_forest, data), predict_proba(back, data))
    for t, u in zip(class_forest.trees, back.trees):
        assert t.same_as(u)


def test_regression_round_trip(tmp_path, reg_forest):
    forest, px = reg_forest
    save_forest(forest, tmp_path / "r.json")
    back = load_forest(tmp_path / "r.json")
    a, b = aggregate(forest, px), aggregate(back, px)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.confidence, b.confidence)


def test_truncated_file_is_corrupt(tmp_path, class_forest):
    text = dumps_forest(class_forest)
    with pytest.raises(ForestFormatError, match="corrupt"):
        loads_forest(text[: len(text) // 2])


def test_version_and_format_checks(class_forest):
    doc = json.loads(dumps_forest(class_forest))
    doc["formatVersion"] = 99
    with pytest.raises(ForestFormatError, match="version"):
        loads_forest(json.dumps(doc))
    with pytest.raises(ForestFormatError):
        loads_forest(json.dumps({"format": "something-else"}))


def test_broken_preorder_is_rejected(class_forest):
    doc = json.loads(dumps_forest(class_forest))
    t = doc["trees"][0]
    t["left"][0], t["right"][0] = t["right"][0], t["left"][0]
    with pytest.raises(ForestFormatError, match="preorder"):
        loads_forest(json.dumps(doc))


def test_summary(class_forest):
    s = forest_summary(class_forest)
    assert s["trees"] == 3 and s["mode"] == "classification"


def test_named_streams_are_reproducible():
    a = rng_for(1, "disc", 2, 0).random(5)
    b = rng_for(1, "disc", 2, 0).random(5)
    c = rng_for(1, "disc", 2, 1).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert child_seed(1, "x") == child_seed(1, "x") != child_seed(2, "x")
    with pytest.raises(ValueError):
        rng_for(1, -3)
