"""CSV exports for every figure-style artifact, plus optional plots.

One schema per kind, written with the stdlib csv module:

    memory_curves   k, then one j column per network label
    amplification   k, then one signal-norm column per network label
    decoding        kind, sigma, nonlinearity, seed, r2
    losses          run_id, kind, value, learning_rate, seed, step, val_loss
    success_bars    kind, successes, total
    profiles        offset, mean_weight, sem
    beta            beta, mean_loss, sem, n

Plots are optional (matplotlib) and read only the CSV, never live objects.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .harness import beta_sweep_table, success_summary

__all__ = ["FIGURE_KINDS", "figure_export", "plot_csv"]

FIGURE_KINDS = ("memory_curves", "amplification", "decoding", "losses",
                "success_bars", "profiles", "beta")


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def figure_export(kind: str, data, out_csv) -> Path:
    """Write the CSV for one figure kind.

    Expected `data` per kind:
      memory_curves / amplification: dict label -> MemoryCurve
      decoding:     iterable of dicts with kind/sigma/nonlinearity/seed/r2
      losses:       iterable of RunRecords
      success_bars: iterable of RunRecords
      profiles:     (offsets, mean, sem) triple or WeightProfile
      beta:         iterable of RunRecords
    """
    if kind not in FIGURE_KINDS:
        raise ValueError(f"unknown figure kind {kind!r}")
    if kind in ("memory_curves", "amplification"):
        labels = list(data)
        attr = "j" if kind == "memory_curves" else "amplification"
        columns = [np.asarray(getattr(data[label], attr)) for label in labels]
        k_max = max(len(col) for col in columns)
        rows = []
        for k in range(k_max):
            rows.append([k] + [f"{col[k]:.12g}" if k < len(col) else ""
                               for col in columns])
        return _write_rows(out_csv, ["k"] + labels, rows)
    if kind == "decoding":
        rows = [[d["kind"], d["sigma"], d["nonlinearity"], d["seed"],
                 f"{d['r2']:.10g}"] for d in data]
        return _write_rows(out_csv, ["kind", "sigma", "nonlinearity", "seed",
                                     "r2"], rows)
    if kind == "losses":
        rows = []
        for rec in data:
            cfg = rec.config
            for step, loss in zip(rec.val_steps, rec.val_losses):
                rows.append([rec.run_id, cfg["kind"], cfg["value"],
                             cfg["learning_rate"], cfg["seed"], step,
                             f"{loss:.10g}"])
        return _write_rows(out_csv, ["run_id", "kind", "value",
                                     "learning_rate", "seed", "step",
                                     "val_loss"], rows)
    if kind == "success_bars":
        summary = success_summary(data)
        rows = [[kind_, succ, total]
                for kind_, (succ, total) in sorted(summary.items())]
        return _write_rows(out_csv, ["kind", "successes", "total"], rows)
    if kind == "profiles":
        if hasattr(data, "offsets"):
            offsets, mean, sem = data.offsets, data.mean_weight, data.sem
        else:
            offsets, mean, sem = data
        rows = [[int(o), f"{m:.10g}", f"{s:.10g}"]
                for o, m, s in zip(offsets, mean, sem)]
        return _write_rows(out_csv, ["offset", "mean_weight", "sem"], rows)
    table = beta_sweep_table(data)
    rows = [[r["beta"], f"{r['mean_loss']:.10g}", f"{r['sem']:.10g}", r["n"]]
            for r in table]
    return _write_rows(out_csv, ["beta", "mean_loss", "sem", "n"], rows)


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return header, rows


def plot_csv(kind: str, csv_path, out_png) -> Path:
    """Render a quick static plot of an exported CSV (needs matplotlib)."""
    if kind not in FIGURE_KINDS:
        raise ValueError(f"unknown figure kind {kind!r}")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    header, rows = _read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    if kind in ("memory_curves", "amplification"):
        ks = [int(r[0]) for r in rows]
        for col, label in enumerate(header[1:], start=1):
            ys = [(float(r[col]) if r[col] else np.nan) for r in rows]
            ax.plot(ks, ys, label=label)
        ax.set_xlabel("k")
        ax.set_ylabel("j(k)" if kind == "memory_curves" else "||W^k v||")
        ax.set_yscale("log")
        ax.legend()
    elif kind == "decoding":
        labels = [f"{r[0]} s={r[1]} f={r[2]}" for r in rows]
        ax.bar(range(len(rows)), [float(r[4]) for r in rows])
        ax.set_xticks(range(len(rows)), labels, rotation=90, fontsize=6)
        ax.set_ylabel("r2")
    elif kind == "losses":
        by_run: dict = {}
        for r in rows:
            by_run.setdefault(r[0], []).append((int(r[5]), float(r[6])))
        for run, pts in by_run.items():
            pts.sort()
            ax.plot([p[0] for p in pts], [p[1] for p in pts], alpha=0.6)
        ax.set_xlabel("step")
        ax.set_ylabel("validation loss")
        ax.set_yscale("log")
    elif kind == "success_bars":
        ax.bar([r[0] for r in rows], [int(r[1]) for r in rows])
        ax.set_ylabel("successful runs")
    elif kind == "profiles":
        offs = [int(r[0]) for r in rows]
        mean = np.array([float(r[1]) for r in rows])
        sem = np.array([float(r[2]) for r in rows])
        ax.plot(offs, mean)
        ax.fill_between(offs, mean - sem, mean + sem, alpha=0.3)
        ax.set_xlabel("rank difference i - j")
        ax.set_ylabel("mean weight")
    else:
        betas = [float(r[0]) for r in rows]
        mean = np.array([float(r[1]) for r in rows])
        sem = np.array([float(r[2]) for r in rows])
        ax.errorbar(betas, mean, yerr=sem, marker="o")
        ax.set_xlabel("beta")
        ax.set_ylabel("final validation loss")
    fig.tight_layout()
    out_png = Path(out_png)
    out_png.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png
