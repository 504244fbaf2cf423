import numpy as np
import pytest
from scipy import stats

from mouseforest.forest import TrainParams, accuracy, train_forest
from mouseforest.disc import DiscParams
from mouseforest.gauss import (
    CANONICAL_SEED,
    N_COMPONENTS,
    GaussianMixtureSpec,
    axis_threshold_candidates,
    canonical_spec,
    disc_dataset,
    gen_mixture_spec,
    make_datasets,
    run_ablation,
    run_controls,
    sample_components,
    sample_dataset,
)
from mouseforest.seeding import rng_for


def test_same_seed_same_spec():
    a, b = gen_mixture_spec(4), gen_mixture_spec(4)
    np.testing.assert_array_equal(a.means, b.means)
    np.testing.assert_array_equal(a.sigmas, b.sigmas)
    assert not np.array_equal(a.means, gen_mixture_spec(5).means)


@pytest.mark.parametrize("seed", [0, 1, 9, 123])
def test_nine_components_per_class(seed):
    spec = gen_mixture_spec(seed)
    assert len(spec.means) == N_COMPONENTS
    assert np.bincount(spec.classes).tolist() == [9, 9]
    assert np.all((spec.means > 0) & (spec.means < 1))
    assert np.all((spec.sigmas > 0) & (spec.sigmas < 0.2))


def test_golden_spec_matches_generator():
    golden = canonical_spec()
    fresh = gen_mixture_spec(CANONICAL_SEED)
    assert golden.seed == CANONICAL_SEED
    np.testing.assert_array_equal(golden.means, fresh.means)
    np.testing.assert_array_equal(golden.sigmas, fresh.sigmas)
    np.testing.assert_array_equal(golden.classes, fresh.classes)


def test_spec_round_trip(tmp_path):
    spec = gen_mixture_spec(2)
    spec.save(tmp_path / "s.json")
    back = GaussianMixtureSpec.load(tmp_path / "s.json")
    np.testing.assert_array_equal(back.means, spec.means)


def test_invalid_spec_rejected():
    spec = gen_mixture_spec(0)
    with pytest.raises(ValueError):
        GaussianMixtureSpec(spec.means, spec.sigmas, np.zeros(18, dtype=int), 0)
    with pytest.raises(ValueError):
        GaussianMixtureSpec(spec.means, spec.sigmas * 10, spec.classes, 0)


def test_component_counts_pass_chi_square():
    k = 2000
    _, comp = sample_components(canonical_spec(), 18 * k, rng_for(0, "chi"))
    counts = np.bincount(comp, minlength=18)
    chi2 = stats.chisquare(counts).statistic
    # chi-square with 17 dof has mean 17 and sd sqrt(34)
    assert abs(chi2 - 17) < 5 * np.sqrt(34)


def test_component_moments():
    spec = canonical_spec()
    data, comp = sample_components(spec, 90_000, rng_for(1, "moments"))
    for c in range(N_COMPONENTS):
        pts = data.X[comp == c]
        se = spec.sigmas[c] / np.sqrt(len(pts))
        assert np.all(np.abs(pts.mean(axis=0) - spec.means[c]) < 6 * se)
        assert np.all(data.y[comp == c] == spec.classes[c])


def test_single_point_and_bad_n():
    one = sample_dataset(canonical_spec(), 1, rng_for(0))
    assert len(one) == 1 and one.y[0] in (0, 1)
    with pytest.raises(ValueError):
        sample_dataset(canonical_spec(), 0, rng_for(0))


def test_class_ratio_is_balanced():
    data = sample_dataset(canonical_spec(), 1_000_000, rng_for(3, "ratio"))
    assert data.y.mean() == pytest.approx(0.5, abs=0.01)


def test_datasets_are_reproducible_and_distinct():
    a = make_datasets(canonical_spec(), 500)
    b = make_datasets(canonical_spec(), 500)
    np.testing.assert_array_equal(a.train.X, b.train.X)
    assert not np.array_equal(a.train.X, a.disc.X)
    assert not np.array_equal(a.disc.X, a.test.X)
    np.testing.assert_array_equal(disc_dataset(canonical_spec(), 500, CANONICAL_SEED, 1).X, a.disc.X)
    assert not np.array_equal(disc_dataset(canonical_spec(), 500, CANONICAL_SEED, 2).X, a.disc.X)


def test_threshold_candidates():
    rng = rng_for(0, "cands")
    even = axis_threshold_candidates(0, 200, rng)
    odd = axis_threshold_candidates(1, 200, rng)
    assert {c.feature.axis for c in even} == {0}
    assert {c.feature.axis for c in odd} == {1}
    for c in even + odd:
        assert round(c.threshold * 1000) == pytest.approx(c.threshold * 1000, abs=1e-9)
    full = axis_threshold_candidates(2, 10_000, rng, replace=False)
    assert sorted(c.threshold for c in full) == [k / 1000 for k in range(1, 1000)]
    with pytest.raises(ValueError):
        axis_threshold_candidates(0, 0, rng)


def test_accuracy_rules():
    data = make_datasets(canonical_spec(), 2000)
    forest = train_forest(data.train, TrainParams(num_trees=3, leaf_size=20))
    acc = accuracy(forest, data.test)
    assert 0.0 <= acc <= 1.0
    perfect = train_forest(data.train, TrainParams(num_trees=1, leaf_size=1, max_levels=30))
    assert accuracy(perfect, data.train) > acc
    with pytest.raises(ValueError):
        accuracy(forest, data.test.subset(np.array([], dtype=int)))


def test_ablation_shapes_and_fixed_data():
    tp = TrainParams(num_trees=3, m=10, leaf_size=30, max_levels=8)
    dp = DiscParams(m=10, leaf_size=30)
    rows = run_ablation("forestSize", [1, 3], n=3000, train_params=tp, disc_params=dp)
    assert [r["value"] for r in rows] == [1, 3]
    rows = run_ablation("m", [5, 10], n=3000, train_params=tp, disc_params=dp)
    # the baseline does not depend on the grid value
    assert rows[0]["baselineAcc"] == rows[1]["baselineAcc"]
    it = run_ablation("iterations", [0, 1], n=3000, train_params=tp, disc_params=dp)
    assert it[0]["discAcc"] == it[0]["baselineAcc"]
    with pytest.raises(ValueError):
        run_ablation("depth", [1])
    with pytest.raises(ValueError):
        run_ablation("m", [0])


def test_controls_report_all_variants():
    tp = TrainParams(num_trees=3, m=10, leaf_size=30, max_levels=8)
    dp = DiscParams(m=10, leaf_size=30)
    out = run_controls(canonical_spec(), n=3000, train_params=tp, disc_params=dp)
    assert set(out) == {"baselineAcc", "unionAcc", "gainVariantAcc", "discAcc"}
    assert all(0.0 <= v <= 1.0 for v in out.values())
