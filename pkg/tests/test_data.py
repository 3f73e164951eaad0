import struct

import numpy as np
import pytest

from cfconv.data import (
    Batch,
    DatasetFormatError,
    band_energies,
    load_dataset,
    make_batches,
    make_synthetic_dataset,
    read_dataset,
    write_dataset,
)


def small_dataset(n=10, h=6, w=5, c=3, seed=0):
    rng = np.random.default_rng(seed)
    images = rng.integers(0, 256, size=(n, h, w, c), dtype=np.uint8)
    labels = (rng.random(n) < 0.5).astype(np.uint8)
    return images, labels


class TestFormat:
    def test_round_trip_pixel_identical(self, tmp_path):
        images, labels = small_dataset()
        path = tmp_path / "set.cfds"
        write_dataset(path, images, labels)
        back_images, back_labels = read_dataset(path)
        assert np.array_equal(images, back_images)
        assert np.array_equal(labels, back_labels)

    def test_empty_file_with_valid_header(self, tmp_path):
        path = tmp_path / "empty.cfds"
        write_dataset(path, np.zeros((0, 4, 4, 1), dtype=np.uint8), np.zeros(0, dtype=np.uint8))
        batches = load_dataset(path, batch_size=4)
        assert batches == []

    def test_batch_sizes(self, tmp_path):
        images, labels = small_dataset(n=10)
        path = tmp_path / "set.cfds"
        write_dataset(path, images, labels)
        batches = load_dataset(path, batch_size=4)
        assert [len(b) for b in batches] == [4, 4, 2]

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.cfds"
        path.write_bytes(b"CF")
        with pytest.raises(DatasetFormatError, match="malformed header"):
            read_dataset(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.cfds"
        path.write_bytes(struct.pack("<4sIIHHB", b"NOPE", 1, 0, 4, 4, 1))
        with pytest.raises(DatasetFormatError, match="magic"):
            read_dataset(path)

    def test_truncated_record_names_index(self, tmp_path):
        images, labels = small_dataset(n=3, h=4, w=4, c=1)
        path = tmp_path / "trunc.cfds"
        write_dataset(path, images, labels)
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])  # cut into the final record
        with pytest.raises(DatasetFormatError, match="truncated record 2"):
            read_dataset(path)

    def test_label_outside_binary_names_record(self, tmp_path):
        images, labels = small_dataset(n=3, h=2, w=2, c=1)
        path = tmp_path / "label.cfds"
        write_dataset(path, images, labels)
        blob = bytearray(path.read_bytes())
        record = 1 + 2 * 2 * 1
        blob[17 + record] = 7  # label byte of record 1
        path.write_bytes(bytes(blob))
        with pytest.raises(DatasetFormatError, match="record 1 has label 7"):
            read_dataset(path)


class TestBatches:
    def test_pixels_scaled_to_unit_interval(self, tmp_path):
        images, labels = small_dataset()
        batches = make_batches(images, labels, 4)
        assert all(b.images.min() >= 0.0 and b.images.max() <= 1.0 for b in batches)

    def test_batch_invariants_enforced(self):
        with pytest.raises(ValueError, match="pixels"):
            Batch(np.full((1, 2, 2, 1), 1.5), np.array([1.0]))
        with pytest.raises(ValueError, match="labels"):
            Batch(np.zeros((1, 2, 2, 1)), np.array([0.5]))

    def test_shuffle_deterministic(self):
        images, labels = small_dataset(n=16)
        a = make_batches(images, labels, 4, seed=9, shuffle=True)
        b = make_batches(images, labels, 4, seed=9, shuffle=True)
        for ba, bb in zip(a, b):
            assert np.array_equal(ba.images, bb.images)
            assert np.array_equal(ba.labels, bb.labels)

    def test_augment_deterministic_and_valid(self):
        images, labels = small_dataset(n=8, h=12, w=12)
        a = make_batches(images, labels, 4, seed=3, shuffle=True, augment=True)
        b = make_batches(images, labels, 4, seed=3, shuffle=True, augment=True)
        for ba, bb in zip(a, b):
            assert np.array_equal(ba.images, bb.images)
            assert ba.images.min() >= 0.0 and ba.images.max() <= 1.0


class TestSynthetic:
    def test_even_split(self, tmp_path):
        _, labels = make_synthetic_dataset(4, 16, 0)
        assert sorted(labels.tolist()) == [0, 0, 1, 1]

    def test_high_band_energy_separation(self):
        images, labels = make_synthetic_dataset(32, 32, 7)
        high = {0: [], 1: []}
        for img, label in zip(images, labels):
            _, _, h = band_energies(img[:, :, 0] / 255.0)
            high[int(label)].append(h)
        assert np.mean(high[1]) >= 3.0 * np.mean(high[0])

    def test_same_seed_identical_files(self, tmp_path):
        p1 = tmp_path / "a.cfds"
        p2 = tmp_path / "b.cfds"
        make_synthetic_dataset(8, 16, 42, p1)
        make_synthetic_dataset(8, 16, 42, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_odd_count_rejected(self):
        with pytest.raises(ValueError):
            make_synthetic_dataset(5, 16, 0)
