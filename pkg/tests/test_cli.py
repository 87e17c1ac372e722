"""End-to-end tests of the CLI subcommands (in process via main)."""

import csv
import json

import pytest

from nonnormal.cli import main


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


TINY_TRAIN = """
task = "copy"
t_len = 22
n_hidden = 12
nonlinearity = "tanh"
models = ["chain"]
alpha_values = [1.0]
learning_rates = [1e-3]
seeds = [1]
train_steps = 4
eval_every = 2
val_batches = 1
batch_size = 2
save_checkpoints = true
"""


def test_memory_command(tmp_path, capsys):
    rc = main(["memory", "--out", str(tmp_path), "--n", "20", "--k-max", "30"])
    assert rc == 0
    header, rows = read_csv(tmp_path / "memory_curves.csv")
    assert header == ["k", "identity", "orthogonal", "chain", "feedback_chain"]
    assert len(rows) == 31
    assert (tmp_path / "amplification.csv").exists()
    assert (tmp_path / "memory_chain.csv").exists()
    out = capsys.readouterr().out
    assert "j_tot" in out


def test_decode_command(tmp_path):
    rc = main(["decode", "--out", str(tmp_path), "--n", "20", "--t-len", "10",
               "--trials", "40", "--sigmas", "0", "--nonlinearities",
               "linear", "--seeds", "1"])
    assert rc == 0
    header, rows = read_csv(tmp_path / "decoding.csv")
    assert len(rows) == 2  # two kinds
    assert all(float(r[4]) > 0.99 for r in rows)


def test_train_print_resolved(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(TINY_TRAIN)
    rc = main(["train", "--config", str(cfg), "--print-resolved"])
    assert rc == 0
    resolved = json.loads(capsys.readouterr().out)
    assert resolved["task"] == "copy"
    assert resolved["train_steps"] == 4


def test_train_sweep_analyze_export_pipeline(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(TINY_TRAIN)
    out_dir = tmp_path / "runs"
    assert main(["train", "--config", str(cfg), "--out", str(out_dir)]) == 0
    records = out_dir / "records.jsonl"
    assert records.exists()

    # analyze: success summary + checkpoint diagnostics
    ckpts = list((out_dir / "checkpoints").glob("*.npz"))
    assert len(ckpts) == 1
    rc = main(["analyze", "--records", str(records), "--checkpoint",
               str(ckpts[0]), "--out", str(tmp_path / "analysis")])
    assert rc == 0
    assert (tmp_path / "analysis" / "success_bars.csv").exists()
    assert (tmp_path / "analysis" / "profile.csv").exists()
    assert "henrici_index=" in capsys.readouterr().out

    # sweep on records without feedback-chain runs -> empty table, still ok
    rc = main(["sweep", "--records", str(records), "--out",
               str(tmp_path / "beta.csv")])
    assert rc == 0
    assert "empty table" in capsys.readouterr().out

    # export losses
    rc = main(["export", "--kind", "losses", "--records", str(records),
               "--out", str(tmp_path / "losses.csv")])
    assert rc == 0
    header, rows = read_csv(tmp_path / "losses.csv")
    assert len(rows) == 3  # evals at steps 0, 2, 4


def test_export_requires_source(capsys):
    assert main(["export", "--kind", "losses"]) == 1
    assert "error:" in capsys.readouterr().err


def test_missing_config_is_error(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "nope.toml")]) == 1
    assert "error:" in capsys.readouterr().err


def test_analyze_needs_input(capsys):
    assert main(["analyze"]) == 1
    assert "error:" in capsys.readouterr().err
