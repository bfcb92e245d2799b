import numpy as np
import pytest
from scipy import stats

from jocor import (LabeledDataset, NoiseSpec, asymmetric_transition,
                   corrupt_labels, symmetric_transition)
from jocor.exceptions import ConfigurationError


def uniform_dataset(n, classes, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, classes, n)
    return LabeledDataset(features=rng.random((n, 3)),
                          observed_labels=labels.copy(),
                          true_labels=labels.copy(), class_count=classes)


class TestSymmetric:
    def test_six_classes_rate_point_four(self):
        q = symmetric_transition(6, 0.4).matrix
        assert np.allclose(np.diag(q), 0.6, atol=1e-15)
        off = q[~np.eye(6, dtype=bool)]
        assert np.allclose(off, 0.08, atol=1e-15)

    def test_rate_zero_is_identity(self):
        assert np.array_equal(symmetric_transition(5, 0.0).matrix, np.eye(5))

    def test_ten_classes_rate_half(self):
        q = symmetric_transition(10, 0.5).matrix
        assert np.allclose(np.diag(q), 0.5, atol=1e-15)
        assert np.allclose(q[0, 1:], 0.5 / 9, atol=1e-15)

    def test_rows_stochastic(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            m = int(rng.integers(2, 30))
            rate = float(rng.uniform(0.0, 0.99))
            q = symmetric_transition(m, rate).matrix
            assert np.abs(q.sum(axis=1) - 1.0).max() <= 1e-12

    @pytest.mark.parametrize("m,rate", [(1, 0.2), (0, 0.2), (5, 1.0), (5, -0.1)])
    def test_invalid(self, m, rate):
        with pytest.raises(ConfigurationError):
            symmetric_transition(m, rate)


class TestAsymmetric:
    def test_four_classes_exact_rows(self):
        q = asymmetric_transition(4, 0.4).matrix
        want = np.array([[0.6, 0.4, 0.0, 0.0],
                         [0.0, 1.0, 0.0, 0.0],
                         [0.0, 0.0, 0.6, 0.4],
                         [0.0, 0.0, 0.0, 1.0]])
        assert np.allclose(q, want, atol=1e-15)

    def test_rate_zero_identity(self):
        assert np.array_equal(asymmetric_transition(6, 0.0).matrix, np.eye(6))

    def test_half_the_classes_noisy(self):
        for m in (2, 3, 4, 5, 10, 11):
            q = asymmetric_transition(m, 0.3).matrix
            noisy_rows = int((np.diag(q) < 1.0).sum())
            assert noisy_rows == (m + 1) // 2
            assert np.abs(q.sum(axis=1) - 1.0).max() <= 1e-12

    def test_overall_rate_is_half_with_even_classes(self):
        spec = NoiseSpec("asymmetric", 0.4, 0)
        assert spec.effective_rate(10) == pytest.approx(0.2, abs=1e-15)

    @pytest.mark.parametrize("m,rate", [(1, 0.2), (4, 0.6), (4, -0.1)])
    def test_invalid(self, m, rate):
        with pytest.raises(ConfigurationError):
            asymmetric_transition(m, rate)


class TestCorrupt:
    def test_identity_preserves_labels(self):
        data = uniform_dataset(500, 6)
        out = corrupt_labels(data, symmetric_transition(6, 0.0), seed=1)
        assert np.array_equal(out.observed_labels, out.true_labels)

    def test_flip_fraction_within_binomial_band(self):
        data = uniform_dataset(10_000, 10, seed=2)
        out = corrupt_labels(data, symmetric_transition(10, 0.5), seed=3)
        flipped = np.mean(out.observed_labels != out.true_labels)
        assert abs(flipped - 0.5) < 4 * 0.005

    def test_deterministic_per_seed(self):
        data = uniform_dataset(2_000, 8, seed=4)
        q = symmetric_transition(8, 0.3)
        a = corrupt_labels(data, q, seed=7)
        b = corrupt_labels(data, q, seed=7)
        c = corrupt_labels(data, q, seed=8)
        assert np.array_equal(a.observed_labels, b.observed_labels)
        assert not np.array_equal(a.observed_labels, c.observed_labels)

    def test_class_count_mismatch(self):
        data = uniform_dataset(10, 4)
        with pytest.raises(ConfigurationError):
            corrupt_labels(data, symmetric_transition(5, 0.2), seed=0)

    def test_never_mutates_inputs(self):
        data = uniform_dataset(300, 5, seed=5)
        features = data.features.copy()
        observed = data.observed_labels.copy()
        true = data.true_labels.copy()
        out = corrupt_labels(data, symmetric_transition(5, 0.8), seed=6)
        assert np.array_equal(data.features, features)
        assert np.array_equal(data.observed_labels, observed)
        assert np.array_equal(data.true_labels, true)
        assert np.array_equal(out.true_labels, true)

    def test_per_row_frequencies_chi_squared(self):
        # empirical flip frequencies converge to the transition rows
        n, m = 120_000, 5
        data = uniform_dataset(n, m, seed=8)
        q = asymmetric_transition(m, 0.4)
        out = corrupt_labels(data, q, seed=9)
        for true_class in range(m):
            mask = data.true_labels == true_class
            counts = np.bincount(out.observed_labels[mask], minlength=m)
            expected = q.matrix[true_class] * mask.sum()
            keep = expected > 0
            assert counts[~keep].sum() == 0  # impossible targets never drawn
            if keep.sum() < 2:  # clean class: nothing stochastic to test
                assert counts[true_class] == mask.sum()
                continue
            _, p_value = stats.chisquare(counts[keep], expected[keep])
            assert p_value > 0.001

    def test_asymmetric_only_even_classes_flip(self):
        data = uniform_dataset(50_000, 10, seed=10)
        out = corrupt_labels(data, asymmetric_transition(10, 0.4), seed=11)
        flipped_classes = np.unique(data.true_labels[
            out.observed_labels != out.true_labels])
        assert set(flipped_classes.tolist()) <= {0, 2, 4, 6, 8}
