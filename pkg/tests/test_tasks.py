"""Tests for task generators, the IDX loader, and baseline losses."""

import gzip
import math
import struct

import numpy as np
import pytest

from nonnormal.tasks import (TaskDataError, baseline_loss, batch_from_pixels,
                             gen_addition, gen_copy, load_psmnist,
                             psmnist_batches, training_arrays)


class TestGenCopy:
    def test_layout_invariants(self):
        t_len, batch = 50, 32
        tb = gen_copy(t_len, batch, seed=1)
        symbols = tb.inputs.argmax(axis=2)
        assert np.all(tb.inputs.sum(axis=2) == 1.0)  # one-hot
        assert symbols[:10].min() >= 1 and symbols[:10].max() <= 8
        assert np.all(symbols[10:t_len - 11] == 0)
        assert np.all(symbols[t_len - 11] == 9)
        assert np.all(symbols[t_len - 10:] == 0)
        # exactly one cue in each sequence
        assert np.all((symbols == 9).sum(axis=0) == 1)
        # target segment reconstructs the opening symbols
        assert np.array_equal(tb.targets[t_len - 10:], symbols[:10])
        assert np.all(tb.targets[:t_len - 10] == 0)
        assert tb.mask.all()

    def test_boundary_length(self):
        tb = gen_copy(22, 4, seed=0)
        symbols = tb.inputs.argmax(axis=2)
        # zeros segment between the payload and the cue has length exactly 1
        assert np.all(symbols[10] == 0)
        assert np.all(symbols[11] == 9)

    def test_paper_scale_length(self):
        tb = gen_copy(500, 2, seed=3)
        assert tb.inputs.shape == (500, 2, 10)

    def test_deterministic(self):
        a = gen_copy(40, 8, seed=9)
        b = gen_copy(40, 8, seed=9)
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(a.targets, b.targets)

    def test_too_short(self):
        with pytest.raises(ValueError):
            gen_copy(21, 1, seed=0)


class TestGenAddition:
    def test_marker_halves(self):
        t_len = 30
        tb = gen_addition(t_len, 2000, seed=2)
        markers = tb.inputs[:, :, 1]
        assert np.all(markers.sum(axis=0) == 2.0)
        first_half = markers[:t_len // 2].sum(axis=0)
        second_half = markers[t_len // 2:].sum(axis=0)
        assert np.all(first_half == 1.0)
        assert np.all(second_half == 1.0)

    def test_target_is_marked_sum(self):
        tb = gen_addition(25, 100, seed=3)
        for bi in range(100):
            marked = tb.inputs[:, bi, 0][tb.inputs[:, bi, 1] == 1.0]
            assert abs(tb.targets[bi] - marked.sum()) < 1e-12

    def test_moment_oracle(self):
        # sum of two independent U(0,1): mean 1, variance 1/6
        tb = gen_addition(20, 100_000, seed=4)
        assert abs(tb.targets.mean() - 1.0) < 0.01
        assert abs(tb.targets.var() - 1.0 / 6.0) < 0.005

    def test_minimal_length(self):
        tb = gen_addition(2, 10, seed=5)
        assert np.all(tb.inputs[0, :, 1] == 1.0)
        assert np.all(tb.inputs[1, :, 1] == 1.0)

    def test_mask_final_step_only(self):
        tb = gen_addition(15, 3, seed=6)
        assert tb.mask[-1] and tb.mask[:-1].sum() == 0


def write_idx_files(path, n_train=64, n_test=16, seed=0):
    rng = np.random.default_rng(seed)
    splits = {
        "train-images-idx3-ubyte": ("img", n_train),
        "train-labels-idx1-ubyte": ("lab", n_train),
        "t10k-images-idx3-ubyte": ("img", n_test),
        "t10k-labels-idx1-ubyte": ("lab", n_test),
    }
    data = {}
    for name, (kind, count) in splits.items():
        if kind == "img":
            pixels = rng.integers(0, 256, size=(count, 28, 28), dtype=np.uint8)
            payload = struct.pack(">IIII", 2051, count, 28, 28) + pixels.tobytes()
            data[name] = pixels
        else:
            labels = rng.integers(0, 10, size=count, dtype=np.uint8)
            payload = struct.pack(">II", 2049, count) + labels.tobytes()
            data[name] = labels
        (path / name).write_bytes(payload)
    return data


class TestPsmnistLoader:
    def test_round_trip_and_permutation(self, tmp_path):
        raw = write_idx_files(tmp_path)
        data = load_psmnist(tmp_path, permutation_seed=7, val_size=16)
        perm = data.permutation
        assert sorted(perm) == list(range(784))  # bijection
        flat = raw["train-images-idx3-ubyte"].reshape(64, 784)
        assert np.array_equal(data.train.images, flat[:48][:, perm])
        assert np.array_equal(data.val.images, flat[48:][:, perm])
        assert np.array_equal(data.val.labels,
                              raw["train-labels-idx1-ubyte"][48:])

    def test_identity_permutation(self, tmp_path):
        raw = write_idx_files(tmp_path)
        data = load_psmnist(tmp_path, permutation_seed=None, val_size=16)
        flat = raw["t10k-images-idx3-ubyte"].reshape(16, 784)
        assert np.array_equal(data.test.images, flat)

    def test_same_seed_same_permutation(self, tmp_path):
        write_idx_files(tmp_path)
        a = load_psmnist(tmp_path, permutation_seed=42, val_size=16)
        b = load_psmnist(tmp_path, permutation_seed=42, val_size=16)
        assert np.array_equal(a.permutation, b.permutation)

    def test_batches_scaled_to_unit_interval(self, tmp_path):
        write_idx_files(tmp_path)
        data = load_psmnist(tmp_path, permutation_seed=1, val_size=16)
        tb = next(psmnist_batches(data.train, batch_size=8))
        assert tb.inputs.shape == (784, 8, 1)
        assert tb.inputs.min() >= 0.0 and tb.inputs.max() <= 1.0
        assert tb.mask[-1] and tb.mask.sum() == 1

    def test_gzip_supported(self, tmp_path):
        write_idx_files(tmp_path)
        for name in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                     "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"):
            raw = (tmp_path / name).read_bytes()
            (tmp_path / name).unlink()
            with gzip.open(tmp_path / (name + ".gz"), "wb") as fh:
                fh.write(raw)
        data = load_psmnist(tmp_path, permutation_seed=1, val_size=16)
        assert len(data.train) == 48

    def test_missing_file(self, tmp_path):
        with pytest.raises(TaskDataError, match="missing"):
            load_psmnist(tmp_path, permutation_seed=1)

    def test_bad_magic(self, tmp_path):
        write_idx_files(tmp_path)
        bad = struct.pack(">IIII", 1234, 1, 28, 28) + bytes(784)
        (tmp_path / "train-images-idx3-ubyte").write_bytes(bad)
        with pytest.raises(TaskDataError, match="magic"):
            load_psmnist(tmp_path, permutation_seed=1, val_size=16)

    def test_truncated(self, tmp_path):
        write_idx_files(tmp_path)
        name = tmp_path / "train-images-idx3-ubyte"
        name.write_bytes(name.read_bytes()[:-100])
        with pytest.raises(TaskDataError, match="truncated"):
            load_psmnist(tmp_path, permutation_seed=1, val_size=16)


class TestBaselineLoss:
    def test_psmnist_log10(self):
        assert abs(baseline_loss("psmnist") - math.log(10)) < 1e-12
        assert abs(baseline_loss("psmnist") - 2.302585) < 1e-6

    def test_addition_monte_carlo(self):
        # predicting the constant 1 on the addition task
        assert abs(baseline_loss("addition") - 1.0 / 6.0) < 1e-12
        tb = gen_addition(10, 200_000, seed=11)
        mc = np.mean((tb.targets - 1.0) ** 2)
        assert abs(mc - baseline_loss("addition")) / baseline_loss("addition") < 0.01

    def test_copy_formula_and_monte_carlo(self):
        t_len = 500
        expected = 10 * math.log(8) / t_len
        assert abs(baseline_loss("copy", t_len) - expected) < 1e-12
        assert abs(baseline_loss("copy", t_len) - 0.041589) < 1e-6
        # memoryless strategy: certain zero everywhere, uniform over {1..8}
        # on the final 10 steps; its cross-entropy on generated batches
        tb = gen_copy(100, 2000, seed=12)
        per_step = np.zeros(100)
        per_step[-10:] = math.log(8)  # -log(1/8) whenever the target is 1..8
        mc = per_step.sum() / 100
        assert abs(mc - baseline_loss("copy", 100)) / mc < 0.01
        # cross-check against the actual targets: nonzero targets only at the end
        assert np.all(tb.targets[:-10] == 0)
        assert np.all(tb.targets[-10:] >= 1)


class TestTrainingArrays:
    def test_copy_passthrough(self):
        tb = gen_copy(30, 4, seed=1)
        x, y, mask, kind = training_arrays(tb, "copy", 9)
        assert x is tb.inputs and y is tb.targets and kind == "cross_entropy"

    def test_addition_expansion(self):
        tb = gen_addition(12, 5, seed=2)
        x, y, mask, kind = training_arrays(tb, "addition", 1)
        assert kind == "mse" and y.shape == (12, 5, 1)
        assert np.array_equal(y[-1, :, 0], tb.targets)
        assert np.all(y[:-1] == 0)

    def test_psmnist_expansion(self, tmp_path):
        write_idx_files(tmp_path)
        data = load_psmnist(tmp_path, permutation_seed=1, val_size=16)
        tb = batch_from_pixels(data.train, np.arange(4))
        x, y, mask, kind = training_arrays(tb, "psmnist", 10)
        assert kind == "cross_entropy" and y.shape == (784, 4)
        assert np.array_equal(y[-1], tb.targets)
