"""Deterministic random number generation with a documented splitting rule.

Every random draw in this package comes from a numpy ``Generator`` backed by
PCG64.  Consumers never share a generator: each one derives its own child
stream via ``child_rng(seed, *path)``, where ``path`` is a tuple of the stream
ids below.  The rule is ``SeedSequence(seed, spawn_key=path)``, which is
stable across platforms and numpy feature releases, so a recorded seed
reproduces every draw bit for bit.  Gaussian variates use numpy's ziggurat
sampler (``Generator.standard_normal``).
"""

from __future__ import annotations

import numpy as np

# Stream ids.  Adding a new consumer means adding a new id here; existing
# streams are never perturbed.
RECURRENT = 0      # recurrent-matrix draws (random orthogonal)
INPUT = 1          # input-matrix draws
READOUT = 2        # readout-matrix draws
TRAIN = 3          # training batch generation
VAL = 4            # validation batch generation
SIGNAL = 5         # decoding-experiment input signals
NOISE = 6          # decoding-experiment injected noise
JITTER = 7         # peak-time tie-breaking jitter
PERMUTATION = 8    # pixel permutation for sequential image tasks
TASK = 9           # one-off task batches


def child_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for the child stream `path` under `seed`."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(seed_or_rng, *path: int) -> np.random.Generator:
    """Pass a Generator through unchanged, or split a child stream off a seed."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return child_rng(seed_or_rng, *path)
