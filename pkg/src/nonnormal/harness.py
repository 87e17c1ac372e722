"""Experiment runner: executes hyper-parameter grids and records results.

Each grid point trains one RNN from its recorded seed and appends a
RunRecord (full resolved config + validation trajectory + flags) as one JSON
line to records.jsonl, so a killed grid loses at most the in-flight run.
A record replays bit-identically: the config captures every input to the
run, including the kernel backend that produced it.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, asdict
from pathlib import Path

import multiprocessing as mp

import numpy as np

from . import backend, rng as rng_mod
from .config import ExperimentConfig, expand_grid, run_id
from .initializers import InitSpec, init_params
from .rnn import (TrainingDivergence, bptt, init_rmsprop, rmsprop_step,
                  save_checkpoint, sequence_loss)
from .tasks import (baseline_loss, batch_from_pixels, gen_addition, gen_copy,
                    load_psmnist, psmnist_batches, task_dims, training_arrays)

__all__ = [
    "RunRecord",
    "run_single",
    "run_grid",
    "replay",
    "load_records",
    "success_summary",
    "beta_sweep_table",
]

SUCCESS_FRACTION = 0.5  # success = validation loss below this times baseline


@dataclass
class RunRecord:
    """Outcome of one training run plus everything needed to redo it."""

    config: dict
    run_id: str
    backend: str
    baseline: float
    val_steps: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    final_test_loss: float | None = None
    success: bool = False
    diverged: bool = False
    wall_time_s: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)


_PIXEL_CACHE: dict = {}


def _pixel_data(run: dict):
    key = (run["data_path"], run["permutation_seed"], run["val_size"])
    if key not in _PIXEL_CACHE:
        _PIXEL_CACHE[key] = load_psmnist(run["data_path"],
                                         run["permutation_seed"],
                                         val_size=run["val_size"])
    return _PIXEL_CACHE[key]


def _make_params(run: dict):
    kind = run["kind"]
    value = run["value"]
    spec = InitSpec(
        kind=kind,
        lam=value if kind in ("identity", "orthogonal") else None,
        alpha=value if kind == "chain" else None,
        beta=value if kind == "feedback_chain" else None,
        seed=run["seed"],
    )
    t_len, d, c = task_dims(run["task"], run["t_len"])
    return init_params(spec, d, run["n_hidden"], c), t_len, d, c


def _gen_batch(task, t_len, batch_size, rng):
    if task == "copy":
        return gen_copy(t_len, batch_size, rng)
    return gen_addition(t_len, batch_size, rng)


def run_single(run: dict) -> RunRecord:
    """Train one configuration to completion, deterministically in its seed."""
    started = time.perf_counter()
    requested = run.get("backend")
    with backend.backend(requested or backend.active_name()):
        record = _train(run)
    record.wall_time_s = time.perf_counter() - started
    return record


def _train(run: dict) -> RunRecord:
    task = run["task"]
    params, t_len, d, c = _make_params(run)
    state = init_rmsprop(params, run["learning_rate"])
    base = baseline_loss(task, t_len)
    record = RunRecord(config=dict(run), run_id=run_id(run),
                       backend=backend.active_name(), baseline=base)
    record.config["backend"] = record.backend
    nonlin = run["nonlinearity"]
    criterion = SUCCESS_FRACTION * base

    def evaluate(val_set):
        total = 0.0
        for vb in val_set:
            x, y, mask, kind = training_arrays(vb, task, c)
            total += sequence_loss(params, nonlin, x, y, mask, kind)
        return total / len(val_set)

    def note_eval(step, val_set):
        loss = evaluate(val_set)
        record.val_steps.append(int(step))
        record.val_losses.append(float(loss))
        if loss < criterion:
            record.success = True
        return loss

    try:
        if task in ("copy", "addition"):
            train_rng = rng_mod.child_rng(run["seed"], rng_mod.TRAIN)
            val_rng = rng_mod.child_rng(run["seed"], rng_mod.VAL)
            val_set = [_gen_batch(task, t_len, run["batch_size"], val_rng)
                       for _ in range(run["val_batches"])]
            note_eval(0, val_set)
            for step in range(1, run["train_steps"] + 1):
                tb = _gen_batch(task, t_len, run["batch_size"], train_rng)
                x, y, mask, kind = training_arrays(tb, task, c)
                loss, grads = bptt(params, nonlin, x, y, mask, kind)
                if not np.isfinite(loss):
                    raise TrainingDivergence(step, "non-finite loss")
                rmsprop_step(state, params, grads)
                if not params.all_finite():
                    raise TrainingDivergence(step, "non-finite parameters")
                if step % run["eval_every"] == 0 or step == run["train_steps"]:
                    note_eval(step, val_set)
                    if record.success and run["stop_at_criterion"]:
                        break
        else:
            data = _pixel_data(run)
            val_set = list(psmnist_batches(data.val, run["batch_size"]))
            note_eval(0, val_set)
            step = 0
            for epoch in range(run["epochs"]):
                order_rng = rng_mod.child_rng(run["seed"], rng_mod.TRAIN, epoch)
                for tb in psmnist_batches(data.train, run["batch_size"],
                                          rng=order_rng):
                    x, y, mask, kind = training_arrays(tb, task, c)
                    loss, grads = bptt(params, nonlin, x, y, mask, kind)
                    if not np.isfinite(loss):
                        raise TrainingDivergence(step, "non-finite loss")
                    rmsprop_step(state, params, grads)
                    if not params.all_finite():
                        raise TrainingDivergence(step, "non-finite parameters")
                    step += 1
                note_eval(step, val_set)
                if record.success and run["stop_at_criterion"]:
                    break
            test_set = list(psmnist_batches(data.test, run["batch_size"]))
            record.final_test_loss = float(evaluate(test_set))
    except TrainingDivergence:
        record.diverged = True
    if run.get("checkpoint_dir"):
        ckpt_dir = Path(run["checkpoint_dir"])
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(ckpt_dir / f"{record.run_id}.npz", params,
                        meta=record.config)
    record.final_params = params  # in-memory only; not serialized
    return record


def _worker_run(run: dict) -> dict:
    record = run_single(run)
    return asdict(record)


def run_grid(cfg: ExperimentConfig, records_path=None,
             progress=None) -> list[RunRecord]:
    """Execute every grid point; append records incrementally as JSON lines.

    Runs are independent; with cfg.workers > 1 they execute in spawned
    processes (single-threaded BLAS) while the parent serializes all writes.
    """
    runs = expand_grid(cfg)
    ckpt_dir = (str(Path(cfg.out_dir) / "checkpoints")
                if cfg.save_checkpoints else "")
    for r in runs:
        r["backend"] = backend.active_name()
        r["checkpoint_dir"] = ckpt_dir
    out = Path(records_path) if records_path else (
        Path(cfg.out_dir) / "records.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    records = []

    def emit(rec_dict):
        rec = RunRecord.from_dict(
            {k: v for k, v in rec_dict.items() if k != "final_params"})
        records.append(rec)
        with open(out, "a") as fh:
            fh.write(rec.to_json() + "\n")
            fh.flush()
        if progress:
            progress(rec)

    if cfg.workers > 1 and len(runs) > 1:
        saved = {k: os.environ.get(k) for k in
                 ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS")}
        os.environ.update({k: "1" for k in saved})
        try:
            ctx = mp.get_context("spawn")
            with ProcessPoolExecutor(max_workers=cfg.workers,
                                     mp_context=ctx) as pool:
                futures = [pool.submit(_worker_run, r) for r in runs]
                for fut in as_completed(futures):
                    emit(fut.result())
        finally:
            for k, v in saved.items():
                if v is None:
                    os.environ.pop(k, None)
                else:
                    os.environ[k] = v
    else:
        for r in runs:
            emit(asdict(run_single(r)))
    return records


def replay(record: RunRecord | dict) -> RunRecord:
    """Re-execute a record's resolved config on its recorded backend."""
    cfg = record["config"] if isinstance(record, dict) else record.config
    return run_single(dict(cfg))


def load_records(path) -> list[RunRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(RunRecord.from_dict(json.loads(line)))
    return records


def success_summary(records) -> dict:
    """Successful-run counts grouped by init kind: {kind: (successes, total)}."""
    summary: dict = {}
    for rec in records:
        kind = rec.config["kind"]
        succ, total = summary.get(kind, (0, 0))
        summary[kind] = (succ + (1 if rec.success else 0), total + 1)
    return summary


def beta_sweep_table(records) -> list[dict]:
    """Final validation loss as a function of the feedback strength.

    Restricted to feedback-chain runs whose final validation loss beats the
    random baseline; rows carry mean, standard error, and count per beta.
    Returns an empty list when nothing qualifies.
    """
    by_beta: dict = {}
    for rec in records:
        if rec.config["kind"] != "feedback_chain" or not rec.val_losses:
            continue
        final = rec.val_losses[-1]
        if rec.diverged or not final < rec.baseline:
            continue
        by_beta.setdefault(rec.config["value"], []).append(final)
    table = []
    for beta in sorted(by_beta):
        losses = np.asarray(by_beta[beta])
        sem = (losses.std(ddof=1) / np.sqrt(losses.size)
               if losses.size > 1 else 0.0)
        table.append({"beta": float(beta), "mean_loss": float(losses.mean()),
                      "sem": float(sem), "n": int(losses.size)})
    return table
