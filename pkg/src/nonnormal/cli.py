"""Command-line harness.

Subcommands: memory (Fisher memory / amplification curves), decode (linear
decoding grid), train (hyper-parameter grid from a config file), sweep
(feedback-strength table from records), analyze (success summary or
checkpoint diagnostics), export (figure CSVs / plots).  Any fatal error
exits nonzero with a one-line message on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import backend, rng as rng_mod
from .analysis import DecodingConfig, decoding_r2, henrici_index, \
    peak_order_profile
from .config import load_config
from .export import FIGURE_KINDS, figure_export, plot_csv
from .harness import load_records, run_grid, success_summary
from .initializers import InitSpec, recurrent_init
from .memory import fisher_memory_curve
from .rnn import load_checkpoint


def _cmd_memory(args) -> int:
    n = args.n
    e1 = np.zeros(n)
    e1[0] = 1.0
    nets = {
        "identity": recurrent_init(
            InitSpec(kind="identity", lam=args.identity_scale), n),
        "orthogonal": recurrent_init(
            InitSpec(kind="orthogonal", lam=args.orthogonal_scale,
                     seed=args.seed), n),
        "chain": recurrent_init(
            InitSpec(kind="chain", alpha=args.chain_alpha), n),
        "feedback_chain": (
            np.diag(np.full(n - 1, args.feedback_alpha), k=-1)
            + np.diag(np.full(n - 1, args.feedback_beta), k=1)),
    }
    curves = {label: fisher_memory_curve(w, e1, args.k_max)
              for label, w in nets.items()}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for label, curve in curves.items():
        rows_path = out / f"memory_{label}.csv"
        with open(rows_path, "w") as fh:
            fh.write("k,j,amplification\n")
            for k in range(len(curve.j)):
                fh.write(f"{k},{curve.j[k]:.12g},{curve.amplification[k]:.12g}\n")
        print(f"{label}: j_tot={curve.j_tot:.6f} -> {rows_path}")
    combined = figure_export("memory_curves", curves, out / "memory_curves.csv")
    amp = figure_export("amplification", curves, out / "amplification.csv")
    print(f"wrote {combined} and {amp}")
    if args.plot:
        print("plot:", plot_csv("memory_curves", combined,
                                out / "memory_curves.png"))
        print("plot:", plot_csv("amplification", amp,
                                out / "amplification.png"))
    return 0


def _cmd_decode(args) -> int:
    results = []
    for kind in args.kinds:
        for nonlinearity in args.nonlinearities:
            for sigma in args.sigmas:
                for seed in args.seeds:
                    cfg = DecodingConfig(
                        network_kind=kind, n=args.n, t_len=args.t_len,
                        trials=args.trials, noise_sigma=sigma,
                        nonlinearity=nonlinearity, scale=args.scale,
                        seed=seed)
                    r2 = decoding_r2(cfg)
                    results.append({"kind": kind, "sigma": sigma,
                                    "nonlinearity": nonlinearity,
                                    "seed": seed, "r2": r2})
                    print(f"{kind:10s} sigma={sigma:<6g} f={nonlinearity:6s} "
                          f"seed={seed} r2={r2:.6f}")
    out = Path(args.out) / "decoding.csv"
    figure_export("decoding", results, out)
    print(f"wrote {out}")
    if args.plot:
        print("plot:", plot_csv("decoding", out, Path(args.out) / "decoding.png"))
    return 0


def _cmd_train(args) -> int:
    overrides = {"out_dir": args.out, "workers": args.workers,
                 "data_path": args.data}
    cfg = load_config(args.config, overrides)
    if args.backend:
        backend.use_backend(args.backend)
    if args.print_resolved:
        cfg.print_resolved()
        return 0
    if cfg.long_running:
        print("note: this is a long-running paper-scale preset", file=sys.stderr)
    done = []

    def progress(rec):
        done.append(rec)
        status = ("diverged" if rec.diverged else
                  "success" if rec.success else "no-criterion")
        best = min(rec.val_losses) if rec.val_losses else float("nan")
        print(f"[{len(done)}] {rec.run_id}: best_val={best:.6g} "
              f"baseline={rec.baseline:.6g} {status}")

    records = run_grid(cfg, progress=progress)
    summary = success_summary(records)
    for kind, (succ, total) in sorted(summary.items()):
        print(f"{kind}: {succ}/{total} runs reached half-baseline")
    print(f"records: {Path(cfg.out_dir) / 'records.jsonl'}")
    return 0


def _cmd_sweep(args) -> int:
    records = load_records(args.records)
    out = figure_export("beta", records, args.out)
    from .harness import beta_sweep_table
    table = beta_sweep_table(records)
    if not table:
        print("no feedback-chain runs beat the random baseline; "
              "wrote an empty table")
    for row in table:
        print(f"beta={row['beta']:g} mean_loss={row['mean_loss']:.6g} "
              f"sem={row['sem']:.3g} n={row['n']}")
    print(f"wrote {out}")
    return 0


def _cmd_analyze(args) -> int:
    if not args.records and not args.checkpoint:
        raise ValueError("analyze needs --records and/or --checkpoint")
    out = Path(args.out)
    if args.records:
        records = load_records(args.records)
        path = figure_export("success_bars", records, out / "success_bars.csv")
        for kind, (succ, total) in sorted(success_summary(records).items()):
            print(f"{kind}: {succ}/{total} successful")
        print(f"wrote {path}")
    if args.checkpoint:
        params, meta = load_checkpoint(args.checkpoint)
        print(f"henrici_index={henrici_index(params.w):.6f}")
        if args.pulse == "input":
            pulse = params.v @ np.ones(params.n_in)
            norm = np.linalg.norm(pulse)
            if norm > 0:
                pulse = pulse / norm
        else:
            pulse = np.zeros(params.n_hidden)
            pulse[0] = 1.0
        nonlinearity = args.nonlinearity or meta.get("nonlinearity", "linear")
        profile = peak_order_profile(params.w, nonlinearity, pulse,
                                     steps=args.steps,
                                     jitter_seed=args.jitter_seed)
        if profile.degenerate:
            print("note: every unit peaked at t=0; ordering is jitter only")
        path = figure_export("profiles", profile, out / "profile.csv")
        print(f"wrote {path}")
        if args.plot:
            print("plot:", plot_csv("profiles", path, out / "profile.png"))
    return 0


def _cmd_export(args) -> int:
    if args.records:
        if args.kind not in ("losses", "success_bars", "beta"):
            raise ValueError(
                f"--records only supports losses/success_bars/beta, "
                f"not {args.kind!r}; memory/decode/analyze write the others")
        records = load_records(args.records)
        out = figure_export(args.kind, records, args.out)
        print(f"wrote {out}")
        csv_path = out
    elif args.csv:
        csv_path = args.csv
    else:
        raise ValueError("export needs --records or --csv")
    if args.plot:
        print("plot:", plot_csv(args.kind, csv_path, args.plot))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nonnormal",
        description="Fisher memory curves, non-normal initializers, and "
                    "long-memory RNN benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("memory", help="memory and amplification curves")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--k-max", type=int, default=150)
    p.add_argument("--identity-scale", type=float, default=0.99)
    p.add_argument("--orthogonal-scale", type=float, default=0.99)
    p.add_argument("--chain-alpha", type=float, default=1.02)
    p.add_argument("--feedback-alpha", type=float, default=1.02)
    p.add_argument("--feedback-beta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_memory)

    p = sub.add_parser("decode", help="linear decoding experiments")
    p.add_argument("--out", required=True)
    p.add_argument("--kinds", nargs="+", default=["chain", "orthogonal"])
    p.add_argument("--sigmas", nargs="+", type=float, default=[0.0, 0.1])
    p.add_argument("--nonlinearities", nargs="+", default=["linear", "elu"])
    p.add_argument("--seeds", nargs="+", type=int, default=[1, 2, 3, 4, 5])
    p.add_argument("--trials", type=int, default=250)
    p.add_argument("--t-len", type=int, default=100)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--scale", type=float, default=1.01)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("train", help="run a hyper-parameter grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override out_dir")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--data", default=None, help="override data_path")
    p.add_argument("--backend", choices=backend.BACKENDS, default=None)
    p.add_argument("--print-resolved", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sweep", help="feedback-strength sweep table")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("analyze", help="success summary / checkpoint diagnostics")
    p.add_argument("--records", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default="analysis")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--jitter-seed", type=int, default=0)
    p.add_argument("--pulse", choices=["input", "e1"], default="input")
    p.add_argument("--nonlinearity", default=None)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("export", help="figure CSVs and plots")
    p.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    p.add_argument("--records", default=None)
    p.add_argument("--csv", default=None, help="replot an existing CSV")
    p.add_argument("--out", default="export.csv")
    p.add_argument("--plot", default=None, help="write a PNG here")
    p.set_defaults(func=_cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # CLI boundary: fail with a message, not a trace
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
