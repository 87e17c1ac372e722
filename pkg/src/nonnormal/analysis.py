"""Measurement procedures applied to (trained or untrained) networks.

* Linear decoding: how well the signal injected at the first time step can be
  read back out of the state 100 steps later with a linear regressor, under
  injected noise and/or a nonlinearity.
* Henrici departure from normality d(W) = sqrt(||W||_F^2 - sum |lambda_i|^2),
  zero exactly for normal matrices.
* Peak-order weight profiles: order units by the time of their peak response
  to a pulse, then average the recurrent weights by rank difference.  A bump
  at a positive offset exposes a hidden feedforward chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as rng_mod
from .linalg import eigenvalues, least_squares, random_orthogonal
from .rnn import ACTIVATIONS, activation

__all__ = [
    "DecodingConfig",
    "WeightProfile",
    "decoding_r2",
    "henrici_index",
    "peak_activity_ranking",
    "peak_order_profile",
    "aggregate_profiles",
]

JITTER_SCALE = 1e-6


@dataclass
class DecodingConfig:
    """Setup for one decoding simulation.

    The chain network feeds the signal at its source unit (v = e1); the
    orthogonal network spreads it with Gaussian weights of std 1/sqrt(n).
    Both recurrent matrices carry the same overall scale.
    """

    network_kind: str = "orthogonal"   # orthogonal | chain
    n: int = 100
    t_len: int = 100
    trials: int = 250
    noise_sigma: float = 0.0
    nonlinearity: str = "linear"
    scale: float = 1.01
    seed: int = 0

    def validate(self):
        if self.network_kind not in ("orthogonal", "chain"):
            raise ValueError(f"unknown network kind {self.network_kind!r}")
        if self.trials <= self.n:
            raise ValueError("need trials > n for the regression to be solvable")
        if self.nonlinearity not in ACTIVATIONS:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def decoding_r2(cfg: DecodingConfig) -> float:
    """R^2 of linearly regressing the first input s_1 on the state h_T.

    Simulates cfg.trials independent runs of
    h_t = f(W h_{t-1} + v s_t + z_t) with s_t ~ N(0,1) and
    z_it ~ N(0, sigma), then fits s_1 from the final state across trials.
    """
    cfg.validate()
    if cfg.network_kind == "chain":
        w = np.diag(np.full(cfg.n - 1, cfg.scale), k=-1)
        v = np.zeros(cfg.n)
        v[0] = 1.0
    else:
        q = random_orthogonal(cfg.n, rng_mod.child_rng(cfg.seed,
                                                       rng_mod.RECURRENT))
        w = cfg.scale * q
        v = rng_mod.child_rng(cfg.seed, rng_mod.INPUT).standard_normal(
            cfg.n) / np.sqrt(cfg.n)
    sig_rng = rng_mod.child_rng(cfg.seed, rng_mod.SIGNAL)
    signals = sig_rng.standard_normal((cfg.t_len, cfg.trials))
    noise_rng = rng_mod.child_rng(cfg.seed, rng_mod.NOISE)
    h = np.zeros((cfg.trials, cfg.n))
    w_t = w.T.copy()
    for t in range(cfg.t_len):
        pre = h @ w_t + signals[t][:, None] * v
        if cfg.noise_sigma > 0:
            pre += cfg.noise_sigma * noise_rng.standard_normal(
                (cfg.trials, cfg.n))
        h, _ = activation(cfg.nonlinearity, pre)
    _, r2 = least_squares(h, signals[0])
    return r2


def henrici_index(w) -> float:
    """Departure from normality: sqrt(||W||_F^2 - sum_i |lambda_i|^2).

    The radicand is mathematically non-negative; rounding can push it
    slightly below zero, so it is clamped before the square root.
    """
    w = np.asarray(w, dtype=np.float64)
    lam = eigenvalues(w)
    radicand = float(np.sum(w * w)) - float(np.sum(np.abs(lam) ** 2))
    return float(np.sqrt(max(radicand, 0.0)))


@dataclass
class WeightProfile:
    """Mean recurrent weight by rank difference i - j under peak ordering.

    counts[o] = N - |offset| entries contribute to each offset; `degenerate`
    flags the case where every unit peaked at t=0 and the ordering came
    entirely from jitter.
    """

    offsets: np.ndarray
    mean_weight: np.ndarray
    sem: np.ndarray
    counts: np.ndarray
    ranking: np.ndarray
    degenerate: bool = False
    meta: dict = field(default_factory=dict)


def _pulse_response(w, nonlinearity, pulse, steps):
    n = w.shape[0]
    traj = np.empty((steps + 1, n))
    h, _ = activation(nonlinearity, np.asarray(pulse, dtype=np.float64))
    traj[0] = h
    for t in range(1, steps + 1):
        h, _ = activation(nonlinearity, w @ h)
        traj[t] = h
    return traj


def peak_activity_ranking(w, nonlinearity: str, pulse, steps: int = 100,
                          jitter_seed: int = 0):
    """Units ordered by the time of their peak response to a pulse.

    The network evolves freely as h_t = f(W h_{t-1}) from h_0 = f(pulse) for
    `steps` steps.  Peak times get jitter ~ U(-1e-6, 1e-6) added to break
    ties, deterministically in jitter_seed.  Returns (ranking, peak_times);
    ranking[r] is the unit index holding rank r.
    """
    w = np.asarray(w, dtype=np.float64)
    pulse = np.asarray(pulse, dtype=np.float64).ravel()
    if pulse.shape[0] != w.shape[0]:
        raise ValueError("pulse dimension does not match W")
    traj = _pulse_response(w, nonlinearity, pulse, steps)
    peak_times = np.argmax(traj, axis=0).astype(np.float64)
    jitter = rng_mod.child_rng(jitter_seed, rng_mod.JITTER).uniform(
        -JITTER_SCALE, JITTER_SCALE, size=w.shape[0])
    ranking = np.argsort(peak_times + jitter, kind="stable")
    return ranking, peak_times


def peak_order_profile(w, nonlinearity: str, pulse, steps: int = 100,
                       jitter_seed: int = 0) -> WeightProfile:
    """Weight profile of W under peak-activity ordering.

    W is reindexed by the ranking and averaged along each diagonal: entry o
    of the profile is the mean of the reindexed W_ij over all pairs with rank
    difference i - j = o.
    """
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    ranking, peak_times = peak_activity_ranking(w, nonlinearity, pulse,
                                                steps, jitter_seed)
    wp = w[np.ix_(ranking, ranking)]
    offsets = np.arange(-(n - 1), n)
    mean_weight = np.empty(offsets.shape[0])
    sem = np.empty(offsets.shape[0])
    counts = np.empty(offsets.shape[0], dtype=np.int64)
    for idx, o in enumerate(offsets):
        # row - col = o corresponds to numpy diagonal offset -o
        diag = np.diagonal(wp, offset=-int(o))
        mean_weight[idx] = diag.mean()
        counts[idx] = diag.size
        sem[idx] = diag.std(ddof=1) / np.sqrt(diag.size) if diag.size > 1 else 0.0
    return WeightProfile(
        offsets=offsets,
        mean_weight=mean_weight,
        sem=sem,
        counts=counts,
        ranking=ranking,
        degenerate=bool(np.all(peak_times == 0)),
        meta={"steps": steps, "jitter_seed": jitter_seed,
              "nonlinearity": nonlinearity},
    )


def aggregate_profiles(profiles):
    """Mean and standard error of several profiles, offset by offset.

    All profiles must share the same dimension.  Returns (offsets, mean, sem)
    with sem computed across networks.
    """
    if not profiles:
        raise ValueError("no profiles to aggregate")
    offsets = profiles[0].offsets
    stack = np.stack([p.mean_weight for p in profiles])
    for p in profiles:
        if p.offsets.shape != offsets.shape or not np.array_equal(p.offsets,
                                                                  offsets):
            raise ValueError("profiles have mismatched offsets")
    mean = stack.mean(axis=0)
    if stack.shape[0] > 1:
        sem = stack.std(axis=0, ddof=1) / np.sqrt(stack.shape[0])
    else:
        sem = np.zeros_like(mean)
    return offsets, mean, sem
