import gzip
import struct

import numpy as np
import pytest

from jocor import (AdamConfig, Mlp, SyntheticSpec, load_mnist, make_synthetic,
                   read_idx_images, read_idx_labels, split_dataset,
                   write_idx_images, write_idx_labels)
from jocor.exceptions import ConfigurationError, FormatError
from jocor.losses import cross_entropy, cross_entropy_gradient


def write_pair(tmp_path, images, labels, suffix=""):
    ipath = tmp_path / f"images{suffix}"
    lpath = tmp_path / f"labels{suffix}"
    write_idx_images(ipath, images)
    write_idx_labels(lpath, labels)
    return ipath, lpath


class TestIdx:
    def test_round_trip_exact_bytes(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, (7, 4, 5)).astype(np.uint8)
        labels = rng.integers(0, 10, 7).astype(np.uint8)
        ipath, lpath = write_pair(tmp_path, images, labels)
        assert np.array_equal(read_idx_images(ipath), images)
        assert np.array_equal(read_idx_labels(lpath), labels)

    def test_round_trip_gzip(self, tmp_path):
        images = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
        labels = np.array([1, 2], dtype=np.uint8)
        ipath, lpath = write_pair(tmp_path, images, labels, suffix=".gz")
        assert ipath.read_bytes()[:2] == b"\x1f\x8b"
        assert np.array_equal(read_idx_images(ipath), images)
        assert np.array_equal(read_idx_labels(lpath), labels)

    def test_all_zero_single_image(self, tmp_path):
        ipath, lpath = write_pair(tmp_path,
                                  np.zeros((1, 28, 28), dtype=np.uint8),
                                  np.array([3], dtype=np.uint8))
        data = load_mnist(ipath, lpath)
        assert data.features.shape == (1, 784)
        assert np.all(data.features == 0.0)
        assert data.observed_labels.tolist() == [3]
        assert data.class_count == 10

    def test_normalization_maps_255_to_one(self, tmp_path):
        images = np.array([[[0, 128, 255]]], dtype=np.uint8)
        ipath, lpath = write_pair(tmp_path, images,
                                  np.array([0], dtype=np.uint8))
        data = load_mnist(ipath, lpath)
        assert data.features[0, 0] == 0.0
        assert data.features[0, 2] == 1.0
        assert data.features[0, 1] == pytest.approx(128 / 255)

    def test_image_magic_rejected_for_labels(self, tmp_path):
        ipath, lpath = write_pair(tmp_path,
                                  np.zeros((1, 2, 2), dtype=np.uint8),
                                  np.array([0], dtype=np.uint8))
        with pytest.raises(FormatError, match="magic"):
            load_mnist(ipath, ipath)  # image file passed as labels

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "bad"
        payload = struct.pack(">iiii", 0x803, 2, 2, 2) + b"\x00" * 7  # 8 needed
        path.write_bytes(payload)
        with pytest.raises(FormatError, match="offset"):
            read_idx_images(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "bad"
        path.write_bytes(b"\x00\x00")
        with pytest.raises(FormatError, match="offset 0"):
            read_idx_labels(path)

    def test_count_mismatch(self, tmp_path):
        ipath, _ = write_pair(tmp_path, np.zeros((2, 2, 2), dtype=np.uint8),
                              np.array([0, 0], dtype=np.uint8))
        lpath = tmp_path / "short-labels"
        write_idx_labels(lpath, np.array([0], dtype=np.uint8))
        with pytest.raises(FormatError, match="labels"):
            load_mnist(ipath, lpath)


def test_real_mnist_shapes(mnist_data_dir):
    files = {}
    for stem in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"):
        path = mnist_data_dir / f"{stem}.gz"
        files[stem] = path if path.exists() else mnist_data_dir / stem
    data = load_mnist(files["train-images-idx3-ubyte"],
                      files["train-labels-idx1-ubyte"])
    assert len(data) == 60_000
    assert data.features.shape == (60_000, 784)
    assert data.class_count == 10
    assert data.features.min() >= 0.0 and data.features.max() == 1.0


class TestSynthetic:
    def test_small_spread_is_learnable(self):
        data = make_synthetic(SyntheticSpec(3, 50, 10, 0.1, seed=1))
        net = Mlp([10, 16, 3], seed=0)
        cfg = AdamConfig(learning_rate=0.01)
        for _ in range(200):
            trace = net.forward(data.features)
            grads = net.backward(
                trace,
                cross_entropy_gradient(trace.probabilities,
                                       data.observed_labels) / len(data))
            net.adam_step(grads, cfg)
        predictions = np.argmax(net.predict_proba(data.features), axis=1)
        assert np.mean(predictions == data.true_labels) >= 0.99

    def test_single_example_per_class(self):
        data = make_synthetic(SyntheticSpec(4, 1, 6, 0.2, seed=2))
        assert len(data) == 4
        assert data.observed_labels.tolist() == [0, 1, 2, 3]

    def test_deterministic(self):
        spec = SyntheticSpec(5, 20, 8, 0.3, seed=9)
        a, b = make_synthetic(spec), make_synthetic(spec)
        assert a.features.tobytes() == b.features.tobytes()
        assert np.array_equal(a.observed_labels, b.observed_labels)

    def test_features_stay_in_unit_box(self):
        data = make_synthetic(SyntheticSpec(3, 100, 4, 2.0, seed=3))
        assert data.features.min() >= 0.0
        assert data.features.max() <= 1.0

    @pytest.mark.parametrize("kwargs", [
        dict(class_count=1, per_class=5, dim=2, cluster_spread=0.1, seed=0),
        dict(class_count=3, per_class=0, dim=2, cluster_spread=0.1, seed=0),
        dict(class_count=3, per_class=5, dim=0, cluster_spread=0.1, seed=0),
        dict(class_count=3, per_class=5, dim=2, cluster_spread=-1.0, seed=0),
    ])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(ConfigurationError):
            SyntheticSpec(**kwargs)


class TestSplit:
    def test_sizes(self):
        data = make_synthetic(SyntheticSpec(5, 200, 4, 0.3, seed=0))
        train, val, test = split_dataset(data, (0.8, 0.1, 0.1), seed=1)
        assert (len(train), len(val), len(test)) == (800, 100, 100)

    def test_empty_validation_allowed(self):
        data = make_synthetic(SyntheticSpec(2, 50, 4, 0.3, seed=0))
        train, val, test = split_dataset(data, (0.9, 0.0, 0.1), seed=1)
        assert len(val) == 0
        assert len(train) + len(test) == 100

    def test_partition_is_disjoint_and_exhaustive(self):
        rng = np.random.default_rng(4)
        data = make_synthetic(SyntheticSpec(3, 67, 5, 0.3, seed=5))
        # tag each row uniquely through the split via its feature bytes
        for fractions in [(0.5, 0.25, 0.25), (0.7, 0.1, 0.2), (1.0, 0.0, 0.0)]:
            parts = split_dataset(data, fractions, seed=int(rng.integers(100)))
            rows = np.vstack([p.features for p in parts if len(p)])
            assert rows.shape[0] == len(data)
            original = {d.tobytes() for d in data.features}
            recovered = [r.tobytes() for r in rows]
            assert len(set(recovered)) == len(recovered)
            assert set(recovered) == original

    def test_deterministic(self):
        data = make_synthetic(SyntheticSpec(3, 60, 5, 0.3, seed=5))
        a = split_dataset(data, (0.6, 0.2, 0.2), seed=11)
        b = split_dataset(data, (0.6, 0.2, 0.2), seed=11)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.observed_labels, pb.observed_labels)

    def test_bad_fractions(self):
        data = make_synthetic(SyntheticSpec(3, 10, 5, 0.3, seed=5))
        with pytest.raises(ConfigurationError):
            split_dataset(data, (0.5, 0.2, 0.2), seed=0)
        with pytest.raises(ConfigurationError):
            split_dataset(data, (0.5, -0.1, 0.6), seed=0)
