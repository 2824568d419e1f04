"""Synthetic data generation, priors, label corruption, batching, CSV I/O."""

import numpy as np
import pytest

from kellyfe.data import (
    batches,
    class_counts,
    corrupt_labels,
    generate,
    load_dataset,
    save_dataset,
    synthesize_priors,
    with_corrupt_labels,
    with_synthesized_priors,
)


class TestGenerate:
    def test_largest_remainder_counts(self):
        np.testing.assert_array_equal(class_counts(1000, [0.90, 0.09, 0.01]), [900, 90, 10])
        ds = generate(3, 2, 1000, [0.90, 0.09, 0.01], 3.0, seed=0)
        np.testing.assert_array_equal(np.bincount(ds.true_labels), [900, 90, 10])
        np.testing.assert_allclose(ds.class_frequencies, [0.9, 0.09, 0.01], atol=1e-12)

    def test_remainder_distribution(self):
        counts = class_counts(10, [1 / 3, 1 / 3, 1 / 3])
        assert counts.sum() == 10
        assert sorted(counts.tolist()) == [3, 3, 4]

    def test_zero_separation_collapses_clusters(self):
        ds = generate(3, 2, 3000, [1 / 3, 1 / 3, 1 / 3], 0.0, seed=1)
        for c in range(3):
            mean = ds.features[ds.true_labels == c].mean(axis=0)
            np.testing.assert_allclose(mean, [0.0, 0.0], atol=0.15)

    def test_same_seed_is_identical(self):
        a = generate(2, 3, 100, [0.5, 0.5], 2.0, seed=7)
        b = generate(2, 3, 100, [0.5, 0.5], 2.0, seed=7)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.true_labels, b.true_labels)

    def test_invalid_frequencies(self):
        with pytest.raises(ValueError):
            generate(2, 2, 10, [0.5, 0.6], 1.0, seed=0)
        with pytest.raises(ValueError):
            generate(3, 2, 10, [0.5, 0.5], 1.0, seed=0)

    def test_separated_clusters_are_distinguishable(self):
        ds = generate(2, 2, 400, [0.5, 0.5], 6.0, seed=2)
        m0 = ds.features[ds.true_labels == 0].mean(axis=0)
        m1 = ds.features[ds.true_labels == 1].mean(axis=0)
        assert np.linalg.norm(m0 - m1) > 10.0


class TestSynthesizePriors:
    def test_full_noise_is_uniform(self):
        priors = synthesize_priors([0, 1, 2], 3, 1.0)
        np.testing.assert_allclose(priors, np.full((3, 3), 1 / 3), atol=1e-12)

    def test_small_noise_mixture(self):
        priors = synthesize_priors([0], 2, 0.1)
        np.testing.assert_allclose(priors, [[0.95, 0.05]], atol=1e-9)

    def test_zero_noise_clamps_to_open_simplex(self):
        priors = synthesize_priors([1], 2, 0.0)
        assert np.all(priors > 0.0) and np.all(priors < 1.0)
        np.testing.assert_allclose(priors[0, 1], 1.0, atol=1e-7)
        np.testing.assert_allclose(priors.sum(axis=1), 1.0, atol=1e-12)

    def test_rows_are_valid_probability_vectors(self):
        rng = np.random.default_rng(3)
        labels = rng.integers(0, 4, 200)
        for eps in (0.0, 0.3, 1.0):
            priors = synthesize_priors(labels, 4, eps)
            assert np.all(priors > 0.0) and np.all(priors < 1.0)
            np.testing.assert_allclose(priors.sum(axis=1), 1.0, atol=1e-9)


class TestCorruptLabels:
    def test_zero_fraction_is_identity(self):
        labels = np.array([0, 1, 2, 0])
        np.testing.assert_array_equal(corrupt_labels(labels, 0.0, 3, seed=0), labels)

    def test_exact_flip_count(self):
        labels = np.zeros(100, dtype=int)
        flipped = corrupt_labels(labels, 0.2, 4, seed=1)
        assert int((flipped != labels).sum()) == 20

    def test_binary_flips_are_complements(self):
        labels = np.random.default_rng(2).integers(0, 2, 50)
        flipped = corrupt_labels(labels, 0.5, 2, seed=3)
        changed = flipped != labels
        assert int(changed.sum()) == 25
        np.testing.assert_array_equal(flipped[changed], 1 - labels[changed])

    def test_flipped_labels_stay_in_range(self):
        labels = np.random.default_rng(4).integers(0, 5, 300)
        flipped = corrupt_labels(labels, 0.3, 5, seed=5)
        assert flipped.min() >= 0 and flipped.max() < 5


class TestBatches:
    def test_sizes_with_short_tail(self):
        ds = generate(2, 2, 10, [0.5, 0.5], 1.0, seed=0)
        idx = batches(ds, 4, epoch_seed=0)
        assert [len(b) for b in idx] == [4, 4, 2]

    def test_partition_property(self):
        ds = generate(2, 2, 37, [0.5, 0.5], 1.0, seed=0)
        idx = batches(ds, 5, epoch_seed=1)
        combined = np.sort(np.concatenate(idx))
        np.testing.assert_array_equal(combined, np.arange(37))

    def test_different_epoch_seeds_shuffle_differently(self):
        ds = generate(2, 2, 64, [0.5, 0.5], 1.0, seed=0)
        a = np.concatenate(batches(ds, 16, epoch_seed=0))
        b = np.concatenate(batches(ds, 16, epoch_seed=1))
        assert not np.array_equal(a, b)

    def test_oversized_batch(self):
        ds = generate(2, 2, 8, [0.5, 0.5], 1.0, seed=0)
        idx = batches(ds, 100, epoch_seed=2)
        assert len(idx) == 1 and len(idx[0]) == 8


class TestCsvRoundTrip:
    def test_exact_round_trip(self, tmp_path):
        ds = generate(3, 4, 50, [0.6, 0.3, 0.1], 2.0, seed=9)
        ds = with_synthesized_priors(ds, 0.2)
        ds = with_corrupt_labels(ds, 0.1, seed=10)
        path = tmp_path / "data.csv"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        np.testing.assert_array_equal(loaded.features, ds.features)
        np.testing.assert_array_equal(loaded.true_labels, ds.true_labels)
        np.testing.assert_array_equal(loaded.reference_labels, ds.reference_labels)
        np.testing.assert_array_equal(loaded.priors, ds.priors)

    def test_header_layout(self, tmp_path):
        ds = generate(2, 3, 5, [0.5, 0.5], 1.0, seed=0)
        path = tmp_path / "data.csv"
        save_dataset(ds, path)
        header = path.read_text().splitlines()[0]
        assert header == "f0,f1,f2,label,true_label,prior_0,prior_1"

    def test_rejects_malformed_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            load_dataset(path)
