"""Experiment configuration: a flat TOML file of keys and lists.

Every key is top-level (no tables).  Unknown keys are rejected so typos fail
loudly.  The same dictionary round-trips into run records, which is what
makes any recorded run replayable.

Schema (defaults in parentheses):

    task               "copy" | "addition" | "psmnist"
    t_len              sequence length for copy/addition (psmnist is 784)
    n_hidden           recurrent units
    nonlinearity       "elu" | "relu" | "tanh" | "linear"
    models             list from {identity, orthogonal, chain, feedback_chain}
    lambda_values      scales tried for identity/orthogonal models
    alpha_values       feedforward weights tried for the chain model
    beta_values        feedback weights tried for the feedback_chain model
    learning_rates     rmsprop learning rates
    seeds              integer run seeds
    batch_size         (16)
    train_steps        optimizer steps per run, copy/addition
    eval_every         steps between validation evaluations (copy/addition)
    val_batches        validation batches held fixed per run (8)
    epochs             passes over the training set, psmnist
    stop_at_criterion  stop a run once validation beats half baseline (false)
    save_checkpoints   write final weights per run under out_dir (false)
    out_dir            where records and exports land ("runs")
    workers            concurrent run workers (1)
    data_path          directory with the MNIST IDX files (psmnist only)
    permutation_seed   pixel permutation seed, psmnist (12345)
    val_size           psmnist validation images carved from train (5000)
    long_running       informational marker for paper-scale presets (false)
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .initializers import RECURRENT_KINDS
from .rnn import ACTIVATIONS

__all__ = ["ExperimentConfig", "load_config", "expand_grid"]

VALUE_KEY = {"identity": "lambda_values", "orthogonal": "lambda_values",
             "chain": "alpha_values", "feedback_chain": "beta_values"}


@dataclass
class ExperimentConfig:
    task: str = "copy"
    t_len: int = 100
    n_hidden: int = 100
    nonlinearity: str = "elu"
    models: list = field(default_factory=lambda: ["chain", "orthogonal"])
    lambda_values: list = field(default_factory=list)
    alpha_values: list = field(default_factory=list)
    beta_values: list = field(default_factory=list)
    learning_rates: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [1, 2, 3])
    batch_size: int = 16
    train_steps: int = 2000
    eval_every: int = 100
    val_batches: int = 8
    epochs: int = 1
    stop_at_criterion: bool = False
    save_checkpoints: bool = False
    out_dir: str = "runs"
    workers: int = 1
    data_path: str = ""
    permutation_seed: int = 12345
    val_size: int = 5000
    long_running: bool = False

    def validate(self):
        if self.task not in ("copy", "addition", "psmnist"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.nonlinearity not in ACTIVATIONS:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        for kind in self.models:
            if kind not in RECURRENT_KINDS:
                raise ValueError(f"unknown model kind {kind!r}")
            if not getattr(self, VALUE_KEY[kind]):
                raise ValueError(
                    f"model {kind!r} requires non-empty {VALUE_KEY[kind]}")
        if len(set(self.models)) != len(self.models):
            raise ValueError("duplicate entries in models")
        if self.task == "copy" and self.t_len < 22:
            raise ValueError("copy task needs t_len >= 22")
        if self.batch_size < 1 or self.train_steps < 0 or self.epochs < 0:
            raise ValueError("batch_size/train_steps/epochs out of range")
        if self.eval_every < 1 or self.val_batches < 1:
            raise ValueError("eval_every and val_batches must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        return self

    def resolved(self) -> dict:
        return asdict(self)

    def print_resolved(self, file=None):
        file = file if file is not None else sys.stdout
        json.dump(self.resolved(), file, indent=2, sort_keys=True)
        file.write("\n")


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a TOML config file, apply overrides, validate."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys in {path}: {sorted(unknown)}")
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    cfg = ExperimentConfig(**raw)
    return cfg.validate()


def expand_grid(cfg: ExperimentConfig) -> list[dict]:
    """Cross-product of (model value) x learning rate x seed, per model.

    Returns one resolved run dict per grid point; exhaustive and
    duplicate-free by construction (duplicates in the value lists are
    rejected).
    """
    cfg.validate()
    runs = []
    for kind in cfg.models:
        values = getattr(cfg, VALUE_KEY[kind])
        if len(set(values)) != len(values):
            raise ValueError(f"duplicate values for model {kind!r}")
        for value in values:
            for lr in cfg.learning_rates:
                for seed in cfg.seeds:
                    runs.append({
                        "task": cfg.task,
                        "t_len": cfg.t_len,
                        "n_hidden": cfg.n_hidden,
                        "nonlinearity": cfg.nonlinearity,
                        "kind": kind,
                        "value": float(value),
                        "learning_rate": float(lr),
                        "seed": int(seed),
                        "batch_size": cfg.batch_size,
                        "train_steps": cfg.train_steps,
                        "eval_every": cfg.eval_every,
                        "val_batches": cfg.val_batches,
                        "epochs": cfg.epochs,
                        "stop_at_criterion": cfg.stop_at_criterion,
                        "data_path": cfg.data_path,
                        "permutation_seed": cfg.permutation_seed,
                        "val_size": cfg.val_size,
                    })
    if len(cfg.learning_rates) != len(set(cfg.learning_rates)):
        raise ValueError("duplicate learning rates")
    if len(cfg.seeds) != len(set(cfg.seeds)):
        raise ValueError("duplicate seeds")
    return runs


def run_id(run: dict) -> str:
    return (f"{run['task']}-{run['kind']}-{run['value']:g}"
            f"-lr{run['learning_rate']:g}-s{run['seed']}")
