"""Benchmark task generators and data ingestion.

Three long-memory benchmarks:

copy      one-hot symbol sequences (d=10).  Ten symbols from {1..8} open the
          sequence, a lone cue symbol 9 appears 11 steps from the end, and
          the model must reproduce the opening ten symbols over the final ten
          steps.  9-way cross-entropy over output symbols 0..8, all steps.
addition  two channels (d=2): uniform values and a two-spike indicator, one
          spike per half.  Target is the sum of the two marked values; mse on
          the final step.
psmnist   28x28 digit images fed one pixel per step (784 steps, d=1) under a
          fixed random pixel permutation; 10-way cross-entropy at the end.

Generators are deterministic in their seed and never touch the network.
"""

from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rng_mod

__all__ = [
    "TaskBatch",
    "TaskDataError",
    "gen_copy",
    "gen_addition",
    "copy_stream",
    "addition_stream",
    "load_psmnist",
    "psmnist_batches",
    "baseline_loss",
    "training_arrays",
    "task_dims",
]

COPY_SYMBOLS = 10          # input alphabet 0..9 (9 is the cue)
COPY_TARGET_LEN = 10
COPY_CLASSES = 9           # output alphabet 0..8
PSMNIST_STEPS = 28 * 28

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}
_MAGIC_IMAGES = 2051
_MAGIC_LABELS = 2049


class TaskDataError(RuntimeError):
    """Missing or malformed task data on disk."""


@dataclass
class TaskBatch:
    """One minibatch: inputs (T,B,d), a per-task target array, and the (T,)
    mask of loss-bearing steps."""

    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray
    meta: dict = field(default_factory=dict)


def task_dims(task: str, t_len: int | None = None):
    """(t_len, input_dim, n_classes_or_outputs) for a task."""
    if task == "copy":
        return t_len, COPY_SYMBOLS, COPY_CLASSES
    if task == "addition":
        return t_len, 2, 1
    if task == "psmnist":
        return PSMNIST_STEPS, 1, 10
    raise ValueError(f"unknown task {task!r}")


def gen_copy(t_len: int, batch: int, seed) -> TaskBatch:
    """Copy-task minibatch with one-hot-encoded inputs.

    Layout per sequence: 10 target symbols from {1..8}, then t_len-21 zeros,
    the cue symbol 9, and 10 trailing zeros.  Targets are zeros up to step
    t_len-11 and the opening symbols over the final 10 steps.  Needs
    t_len >= 22.
    """
    if t_len < 22:
        raise ValueError(f"copy task needs t_len >= 22, got {t_len}")
    rng = rng_mod.as_rng(seed, rng_mod.TASK)
    symbols = np.zeros((t_len, batch), dtype=np.int64)
    symbols[:COPY_TARGET_LEN] = rng.integers(1, 9, size=(COPY_TARGET_LEN, batch))
    symbols[t_len - 11] = 9
    inputs = np.zeros((t_len, batch, COPY_SYMBOLS))
    steps = np.arange(t_len)[:, None]
    cols = np.arange(batch)[None, :]
    inputs[steps, cols, symbols] = 1.0
    targets = np.zeros((t_len, batch), dtype=np.int64)
    targets[t_len - COPY_TARGET_LEN:] = symbols[:COPY_TARGET_LEN]
    mask = np.ones(t_len, dtype=bool)
    return TaskBatch(inputs=inputs, targets=targets, mask=mask,
                     meta={"task": "copy", "t_len": t_len})


def gen_addition(t_len: int, batch: int, seed) -> TaskBatch:
    """Addition-task minibatch.

    Channel 0 carries U[0,1] values; channel 1 is zero except for one marker
    uniform in each half of the sequence.  The target is the sum of the two
    marked values.  Needs t_len >= 2.
    """
    if t_len < 2:
        raise ValueError(f"addition task needs t_len >= 2, got {t_len}")
    rng = rng_mod.as_rng(seed, rng_mod.TASK)
    values = rng.random((t_len, batch))
    half = t_len // 2
    first = rng.integers(0, half, size=batch)
    second = rng.integers(half, t_len, size=batch)
    inputs = np.zeros((t_len, batch, 2))
    inputs[:, :, 0] = values
    cols = np.arange(batch)
    inputs[first, cols, 1] = 1.0
    inputs[second, cols, 1] = 1.0
    targets = values[first, cols] + values[second, cols]
    mask = np.zeros(t_len, dtype=bool)
    mask[-1] = True
    return TaskBatch(inputs=inputs, targets=targets, mask=mask,
                     meta={"task": "addition", "t_len": t_len})


def copy_stream(t_len: int, batch: int, seed: int, stream: int = rng_mod.TRAIN):
    """Endless deterministic stream of copy batches."""
    rng = rng_mod.child_rng(seed, stream)
    while True:
        yield gen_copy(t_len, batch, rng)


def addition_stream(t_len: int, batch: int, seed: int,
                    stream: int = rng_mod.TRAIN):
    """Endless deterministic stream of addition batches."""
    rng = rng_mod.child_rng(seed, stream)
    while True:
        yield gen_addition(t_len, batch, rng)


def _read_idx(path: Path, expect_magic: int) -> np.ndarray:
    if not path.exists():
        gz = path.with_name(path.name + ".gz")
        if gz.exists():
            path = gz
        else:
            raise TaskDataError(f"missing data file: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        header = fh.read(8)
        if len(header) < 8:
            raise TaskDataError(f"{path}: truncated header")
        magic, count = struct.unpack(">II", header)
        if magic != expect_magic:
            raise TaskDataError(
                f"{path}: bad magic {magic}, expected {expect_magic}")
        if expect_magic == _MAGIC_IMAGES:
            dims = fh.read(8)
            if len(dims) < 8:
                raise TaskDataError(f"{path}: truncated header")
            rows, cols = struct.unpack(">II", dims)
            if (rows, cols) != (28, 28):
                raise TaskDataError(
                    f"{path}: expected 28x28 images, got {rows}x{cols}")
            n_bytes = count * rows * cols
            raw = fh.read(n_bytes)
            if len(raw) != n_bytes:
                raise TaskDataError(
                    f"{path}: truncated, expected {n_bytes} pixels")
            return np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)
        raw = fh.read(count)
        if len(raw) != count:
            raise TaskDataError(f"{path}: truncated, expected {count} labels")
        return np.frombuffer(raw, dtype=np.uint8)


@dataclass
class PixelSplit:
    """One split of the pixel-sequence task; images are permuted uint8."""

    images: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return self.images.shape[0]


@dataclass
class PixelTaskData:
    train: PixelSplit
    val: PixelSplit
    test: PixelSplit
    permutation: np.ndarray
    meta: dict


def load_psmnist(path, permutation_seed: int | None,
                 val_size: int = 5000) -> PixelTaskData:
    """Load the four MNIST IDX files under `path` as pixel sequences.

    One pixel permutation is drawn from `permutation_seed` and shared across
    all splits (None means the identity, i.e. plain sequential order).  The
    validation split is the final `val_size` training images; the remainder
    trains.  Never performs network I/O.
    """
    base = Path(path)
    train_x = _read_idx(base / MNIST_FILES["train_images"], _MAGIC_IMAGES)
    train_y = _read_idx(base / MNIST_FILES["train_labels"], _MAGIC_LABELS)
    test_x = _read_idx(base / MNIST_FILES["test_images"], _MAGIC_IMAGES)
    test_y = _read_idx(base / MNIST_FILES["test_labels"], _MAGIC_LABELS)
    if len(train_x) != len(train_y) or len(test_x) != len(test_y):
        raise TaskDataError("image/label counts disagree")
    if len(train_x) <= val_size:
        raise TaskDataError(
            f"need more than val_size={val_size} training images, "
            f"got {len(train_x)}")
    if permutation_seed is None:
        perm = np.arange(PSMNIST_STEPS)
    else:
        perm = rng_mod.child_rng(permutation_seed,
                                 rng_mod.PERMUTATION).permutation(PSMNIST_STEPS)
    train_x = np.ascontiguousarray(train_x[:, perm])
    test_x = np.ascontiguousarray(test_x[:, perm])
    cut = len(train_x) - val_size
    return PixelTaskData(
        train=PixelSplit(train_x[:cut], train_y[:cut]),
        val=PixelSplit(train_x[cut:], train_y[cut:]),
        test=PixelSplit(test_x, test_y),
        permutation=perm,
        meta={"task": "psmnist", "val_size": val_size,
              "permutation_seed": permutation_seed},
    )


def batch_from_pixels(split: PixelSplit, idx) -> TaskBatch:
    """Assemble a TaskBatch from image indices; pixels scale to [0, 1]."""
    images = split.images[idx]
    inputs = (images.T.astype(np.float64) / 255.0)[:, :, None]
    targets = split.labels[idx].astype(np.int64)
    mask = np.zeros(PSMNIST_STEPS, dtype=bool)
    mask[-1] = True
    return TaskBatch(inputs=inputs, targets=targets, mask=mask,
                     meta={"task": "psmnist"})


def psmnist_batches(split: PixelSplit, batch_size: int, rng=None):
    """Minibatch index order for one pass; shuffled when rng is given."""
    n = len(split)
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n - batch_size + 1, batch_size):
        yield batch_from_pixels(split, order[start:start + batch_size])


def baseline_loss(task: str, t_len: int | None = None) -> float:
    """Loss of the memoryless random-baseline strategy for a task.

    copy      predict symbol 0 everywhere and uniform over {1..8} on the
              final 10 steps: 10*ln(8)/T mean cross-entropy.
    addition  predict the constant 1 (the target mean): mse 1/6.
    psmnist   uniform over 10 classes: ln(10).
    """
    if task == "copy":
        if not t_len:
            raise ValueError("copy baseline needs t_len")
        return COPY_TARGET_LEN * math.log(8.0) / t_len
    if task == "addition":
        return 1.0 / 6.0
    if task == "psmnist":
        return math.log(10.0)
    raise ValueError(f"unknown task {task!r}")


def training_arrays(batch: TaskBatch, task: str, n_out: int):
    """(inputs, loss targets, mask, loss_kind) ready for bptt.

    copy and psmnist use integer class targets (T,B); addition expands its
    per-sequence sums to an (T,B,1) mse target on the final step.
    """
    t_len, n_batch = batch.inputs.shape[0], batch.inputs.shape[1]
    if task == "copy":
        return batch.inputs, batch.targets, batch.mask, "cross_entropy"
    if task == "addition":
        y = np.zeros((t_len, n_batch, n_out))
        y[-1, :, 0] = batch.targets
        return batch.inputs, y, batch.mask, "mse"
    if task == "psmnist":
        y = np.zeros((t_len, n_batch), dtype=np.int64)
        y[-1] = batch.targets
        return batch.inputs, y, batch.mask, "cross_entropy"
    raise ValueError(f"unknown task {task!r}")
