"""Dataset loaders, splitting, normalization, synthetic digit generator."""

import struct

import numpy as np
import pytest

from tropicnet.data import (
    Dataset,
    ParseError,
    builtin_iris_path,
    load_idx,
    load_iris_csv,
    normalize,
    save_csv,
    split,
    synthetic_digits,
    write_idx,
)


class TestIdx:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(2, 2, 2), dtype=np.uint8)
        labels = np.array([3, 7], dtype=np.uint8)
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        write_idx(images, labels, ip, lp)
        ds = load_idx(ip, lp)
        np.testing.assert_array_equal(ds.X, images.reshape(2, 4).astype(float))
        np.testing.assert_array_equal(ds.y, labels)

    def test_bad_image_magic(self, tmp_path):
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        ip.write_bytes(struct.pack(">IIII", 0xDEADBEEF, 1, 2, 2) + bytes(4))
        lp.write_bytes(struct.pack(">II", 0x801, 1) + bytes(1))
        with pytest.raises(ParseError, match="magic"):
            load_idx(ip, lp)

    def test_truncated_payload_reports_offset(self, tmp_path):
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        ip.write_bytes(struct.pack(">IIII", 0x803, 2, 2, 2) + bytes(5))
        lp.write_bytes(struct.pack(">II", 0x801, 2) + bytes(2))
        with pytest.raises(ParseError, match="offset 16"):
            load_idx(ip, lp)

    def test_count_mismatch(self, tmp_path):
        ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
        ip.write_bytes(struct.pack(">IIII", 0x803, 1, 2, 2) + bytes(4))
        lp.write_bytes(struct.pack(">II", 0x801, 3) + bytes(3))
        with pytest.raises(ParseError, match="does not match"):
            load_idx(ip, lp)

    def test_real_files_when_provided(self):
        import os

        root = os.environ.get("TROPICNET_MNIST_DIR")
        if not root:
            pytest.skip("TROPICNET_MNIST_DIR not set")
        ds = load_idx(
            os.path.join(root, "train-images-idx3-ubyte"),
            os.path.join(root, "train-labels-idx1-ubyte"),
        )
        assert ds.n_samples == 60000
        assert ds.n_features == 784


class TestIrisCsv:
    def test_bundled_file(self):
        ds = load_iris_csv(builtin_iris_path())
        assert (ds.n_samples, ds.n_features, ds.n_classes) == (150, 4, 3)
        assert ds.names == ["setosa", "versicolor", "virginica"]

    def test_alphabetical_label_mapping(self, tmp_path):
        p = tmp_path / "flowers.csv"
        p.write_text("1,2,3,4,zebra\n5,6,7,8,aardvark\n")
        ds = load_iris_csv(p)
        assert ds.names == ["aardvark", "zebra"]
        np.testing.assert_array_equal(ds.y, [1, 0])

    def test_malformed_row_reports_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,2,3,4,a\n1,2,3,oops,b\n")
        with pytest.raises(ParseError, match="line 2"):
            load_iris_csv(p)

    def test_round_trip(self, tmp_path):
        ds = load_iris_csv(builtin_iris_path())
        p = tmp_path / "copy.csv"
        save_csv(ds, p)
        again = load_iris_csv(p)
        np.testing.assert_array_equal(again.X, ds.X)
        np.testing.assert_array_equal(again.y, ds.y)
        assert again.names == ds.names


class TestSplit:
    def test_iris_70_30(self):
        ds = load_iris_csv(builtin_iris_path())
        train, test = split(ds, 0.7, seed=0)
        assert train.n_samples == 105
        assert test.n_samples == 45

    def test_union_is_original_multiset(self):
        rng = np.random.default_rng(1)
        ds = Dataset(X=rng.normal(size=(20, 2)), y=rng.integers(0, 2, size=20), n_classes=2)
        train, test = split(ds, 0.6, seed=3)
        merged = np.vstack([train.X, test.X])
        assert sorted(map(tuple, merged)) == sorted(map(tuple, ds.X))

    def test_seed_determinism(self):
        ds = load_iris_csv(builtin_iris_path())
        a, _ = split(ds, 0.7, seed=5)
        b, _ = split(ds, 0.7, seed=5)
        np.testing.assert_array_equal(a.X, b.X)

    def test_bad_fraction(self):
        ds = load_iris_csv(builtin_iris_path())
        with pytest.raises(ValueError):
            split(ds, 1.0, seed=0)


class TestNormalize:
    def test_unit_byte(self):
        ds = Dataset(X=np.array([[0.0, 255.0]]), y=np.array([0]), n_classes=1)
        out = normalize(ds, "unit_byte")
        np.testing.assert_array_equal(out.X, [[0.0, 1.0]])

    def test_none_identity(self):
        ds = Dataset(X=np.array([[0.5]]), y=np.array([0]), n_classes=1)
        assert normalize(ds, "none") is ds

    def test_double_application_fails_loudly(self):
        ds = Dataset(X=np.array([[0.0, 255.0]]), y=np.array([0]), n_classes=1)
        once = normalize(ds, "unit_byte")
        with pytest.raises(ValueError, match="byte-scaled"):
            normalize(once, "unit_byte")

    def test_unknown_scheme(self):
        ds = Dataset(X=np.array([[1.0]]), y=np.array([0]), n_classes=1)
        with pytest.raises(ValueError):
            normalize(ds, "zscore")


class TestSyntheticDigits:
    def test_shapes_and_range(self):
        ds = synthetic_digits(64, seed=0)
        assert ds.X.shape == (64, 784)
        assert ds.n_classes == 10
        assert float(ds.X.min()) >= 0.0
        assert float(ds.X.max()) <= 1.0

    def test_balanced_labels(self):
        ds = synthetic_digits(100, seed=1)
        counts = np.bincount(ds.y, minlength=10)
        np.testing.assert_array_equal(counts, np.full(10, 10))

    def test_deterministic(self):
        a = synthetic_digits(16, seed=7)
        b = synthetic_digits(16, seed=7)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)

    def test_classes_visually_distinct(self):
        """Same-class mean images correlate more than cross-class ones."""
        ds = synthetic_digits(400, seed=2)
        means = np.stack([ds.X[ds.y == d].mean(axis=0) for d in range(10)])
        means -= means.mean(axis=1, keepdims=True)
        norms = np.linalg.norm(means, axis=1)
        sims = (means @ means.T) / np.outer(norms, norms)
        off_diag = sims[~np.eye(10, dtype=bool)]
        assert np.max(off_diag) < 0.995

    def test_idx_round_trip_path(self, tmp_path):
        """The generator output survives byte quantization through IDX files."""
        ds = synthetic_digits(10, seed=3)
        images = (ds.X * 255).round().astype(np.uint8).reshape(10, 28, 28)
        write_idx(images, ds.y.astype(np.uint8), tmp_path / "i", tmp_path / "l")
        loaded = normalize(load_idx(tmp_path / "i", tmp_path / "l"), "unit_byte")
        assert np.max(np.abs(loaded.X - ds.X)) <= (0.5 / 255) + 1e-12
