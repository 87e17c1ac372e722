"""Recurrent and input weight initializers.

Four recurrent families: two normal (scaled identity, scaled random
orthogonal) and two non-normal (feedforward chain, chain with feedback).
Input matrices pair with them: dense Gaussian columns for the normal kinds,
and a "source" block that feeds each input channel into its own leading unit
for the chain kinds.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import rng as rng_mod
from .linalg import random_orthogonal
from .rnn import RnnParams

__all__ = [
    "RECURRENT_KINDS",
    "InitSpec",
    "recurrent_init",
    "input_init",
    "init_params",
]

RECURRENT_KINDS = ("identity", "orthogonal", "chain", "feedback_chain")
INPUT_KINDS = ("gaussian", "source")

# The feedback chain used for training fixes its feedforward weight; only the
# feedback strength is searched over.
FEEDBACK_FORWARD_WEIGHT = 0.99
INPUT_SCALE = 0.9


@dataclass(frozen=True)
class InitSpec:
    """Which recurrent family to draw, with its scalar hyper-parameter.

    Only the field relevant to `kind` is read: `lam` for identity/orthogonal,
    `alpha` for the chain, `beta` for the feedback chain.
    """

    kind: str
    lam: float | None = None
    alpha: float | None = None
    beta: float | None = None
    seed: int = 0

    def param_name(self) -> str:
        return {"identity": "lam", "orthogonal": "lam",
                "chain": "alpha", "feedback_chain": "beta"}[self.kind]

    def param_value(self) -> float:
        value = getattr(self, self.param_name())
        if value is None:
            raise ValueError(f"init kind {self.kind!r} needs {self.param_name()!r}")
        return float(value)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_scale(name, value):
    if value is None or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be finite and positive, got {value}")
    return float(value)


def recurrent_init(spec: InitSpec, n: int) -> np.ndarray:
    """Recurrent connectivity matrix for `spec`, of size n x n."""
    if spec.kind not in RECURRENT_KINDS:
        raise ValueError(f"unknown recurrent init kind {spec.kind!r}")
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if spec.kind == "identity":
        lam = _check_scale("lam", spec.lam)
        return lam * np.eye(n)
    if spec.kind == "orthogonal":
        lam = _check_scale("lam", spec.lam)
        q = random_orthogonal(n, rng_mod.child_rng(spec.seed, rng_mod.RECURRENT))
        return lam * q
    if n < 2:
        raise ValueError("chain initializers need dimension >= 2")
    if spec.kind == "chain":
        alpha = _check_scale("alpha", spec.alpha)
        return np.diag(np.full(n - 1, alpha), k=-1)
    beta = _check_scale("beta", spec.beta)
    w = np.diag(np.full(n - 1, FEEDBACK_FORWARD_WEIGHT), k=-1)
    w += np.diag(np.full(n - 1, beta), k=1)
    return w


def input_init(kind: str, n: int, d: int, seed) -> np.ndarray:
    """Input matrix of shape n x d.

    gaussian: i.i.d. entries with standard deviation 0.9/sqrt(n).
    source:   0.9 on the leading d x d diagonal block, zero elsewhere;
              requires n >= d.
    """
    if kind not in INPUT_KINDS:
        raise ValueError(f"unknown input init kind {kind!r}")
    if n < 1 or d < 1:
        raise ValueError(f"invalid input matrix shape ({n}, {d})")
    if kind == "gaussian":
        rng = rng_mod.as_rng(seed, rng_mod.INPUT)
        return (INPUT_SCALE / np.sqrt(n)) * rng.standard_normal((n, d))
    if n < d:
        raise ValueError(f"source input init needs n >= d, got n={n}, d={d}")
    v = np.zeros((n, d))
    v[np.arange(d), np.arange(d)] = INPUT_SCALE
    return v


def input_kind_for(recurrent_kind: str) -> str:
    """Input family paired with each recurrent family."""
    return "source" if recurrent_kind in ("chain", "feedback_chain") else "gaussian"


def init_params(spec: InitSpec, d: int, n: int, n_out: int) -> RnnParams:
    """Full trainable parameter set for one run.

    All randomness comes from child streams of `spec.seed`.  Readout weights
    are Gaussian with standard deviation 1/sqrt(n); both biases start at zero.
    """
    w = recurrent_init(spec, n)
    v = input_init(input_kind_for(spec.kind), n, d,
                   rng_mod.child_rng(spec.seed, rng_mod.INPUT))
    w_out = rng_mod.child_rng(spec.seed, rng_mod.READOUT).standard_normal(
        (n_out, n)) / np.sqrt(n)
    return RnnParams(
        w=w,
        v=v,
        b=np.zeros(n),
        w_out=w_out,
        b_out=np.zeros(n_out),
    )
