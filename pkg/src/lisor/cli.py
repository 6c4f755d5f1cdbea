"""Command-line interface.

Subcommands: gen-data, train, extract, ensemble, report, export-dot,
grad-check. Experiment commands share one config, assembled from an optional
``--config`` JSON document with individual flags overriding it. Exits 0 only
when every requested artifact was produced.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .data import Sequence, gen_task_000, gen_task_0110, save_dataset
from .errors import LisorError
from .experiment import (
    ALL_KINDS,
    ExperimentConfig,
    run_ensemble,
    run_extract,
    run_report,
    run_train,
)
from .export import DotOptions, load_fsa, save_dot
from .model import CellKind, init_model
from .train import grad_check


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags below override it")
    p.add_argument("--task", choices=["0110", "000"], help="task name (default: 0110)")
    p.add_argument("--kinds", help="comma-separated cell kinds (default: mgu,srn,gru,lstm)")
    p.add_argument("--d-emb", type=int, help="embedding width (default: 2)")
    p.add_argument("--d", type=int, help="hidden width (default: 10)")
    p.add_argument("--layers", type=int, help="hidden layer count (default: 3)")
    p.add_argument(
        "--method",
        choices=["kmeans++", "kmeans-x"],
        help="clustering space: kmeans++ = raw hidden states, kmeans-x adds the "
        "position feature (default: kmeans++)",
    )
    p.add_argument("--k-min", type=int, help="smallest cluster count swept (default: 2)")
    p.add_argument(
        "--k-max", type=int, help="largest cluster count swept (default: 64 for 0110, 200 for 000)"
    )
    p.add_argument("--trials", type=int, help="independent trials per kind (default: 5)")
    p.add_argument(
        "--target",
        type=float,
        help="accuracy the sweep must reach (default: 1.0 for 0110, 0.7 for 000)",
    )
    p.add_argument("--seed", type=int, help="base rng seed (default: 0)")
    p.add_argument("--out-dir", help="experiment output directory (default: runs/exp)")
    p.add_argument("--n-train", type=int, help="training sequences (default: 1000 / 3000)")
    p.add_argument("--n-valid", type=int, help="validation sequences, task 000 only (default: 500)")
    p.add_argument("--n-test", type=int, help="test sequences (default: 100 / 500)")
    p.add_argument("--len-min", type=int, help="shortest 000 sequence (default: 4)")
    p.add_argument("--len-max", type=int, help="longest 000 sequence (default: 12)")
    p.add_argument("--lr", type=float, help="Adam learning rate (default: 2e-3)")
    p.add_argument("--epochs", type=int, help="max training epochs (default: 200)")
    p.add_argument("--batch-size", type=int, help="mini-batch size (default: 32)")
    p.add_argument("--init-scale", type=float, help="uniform init half-width (default: 0.1)")
    p.add_argument(
        "--early-stop-acc", type=float, help="stop when train accuracy reaches this (default: 1.0)"
    )
    p.add_argument(
        "--early-stop-loss",
        type=float,
        help="additionally require train loss at or below this before stopping (default: off)",
    )
    p.add_argument(
        "--clip-norm",
        type=float,
        help="global gradient-norm clip; 0 disables (default: 5.0)",
    )


_FLAG_TO_FIELD = {
    "task": "task",
    "d_emb": "d_emb",
    "d": "d",
    "layers": "n_layers",
    "method": "method",
    "k_min": "k_min",
    "k_max": "k_max",
    "trials": "n_trials",
    "target": "target_accuracy",
    "seed": "seed",
    "out_dir": "output_dir",
    "n_train": "n_train",
    "n_valid": "n_valid",
    "n_test": "n_test",
    "len_min": "len_min",
    "len_max": "len_max",
    "lr": "learning_rate",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "init_scale": "init_scale",
    "early_stop_acc": "early_stop_acc",
    "early_stop_loss": "early_stop_loss",
}


def _config_from_args(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    cfg = ExperimentConfig.from_json(doc)
    for flag, fieldname in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, fieldname, value)
    if getattr(args, "kinds", None):
        cfg.kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    if getattr(args, "clip_norm", None) is not None:
        cfg.clip_norm = None if args.clip_norm == 0 else args.clip_norm
    return cfg.resolved()


def _cmd_gen_data(args) -> int:
    if args.task == "0110":
        ds = gen_task_0110(args.n_train or 1000, args.n_test or 100, args.seed or 0)
    else:
        ds = gen_task_000(
            args.n_train or 3000,
            args.n_valid or 500,
            args.n_test or 500,
            (args.len_min or 4, args.len_max or 12),
            args.seed or 0,
        )
    save_dataset(ds, args.out)
    print(
        f"wrote {args.out}: task {ds.task_name}, "
        f"{len(ds.train)}/{len(ds.validation)}/{len(ds.test)} train/valid/test"
    )
    return 0


def _cmd_train(args) -> int:
    summary = run_train(_config_from_args(args))
    return 1 if summary["failures"] else 0


def _cmd_extract(args) -> int:
    cfg = _config_from_args(args)
    kinds = [args.kind] if args.kind else list(cfg.kinds)
    trials = [args.trial] if args.trial else list(range(1, cfg.n_trials + 1))
    failures = 0
    for kind in kinds:
        for trial in trials:
            try:
                run_extract(cfg, kind, trial)
            except LisorError as exc:
                print(f"[extract] {kind} trial {trial}: FAILED ({exc})", file=sys.stderr)
                failures += 1
    return 1 if failures else 0


def _cmd_ensemble(args) -> int:
    cfg = _config_from_args(args)
    run_ensemble(cfg, kind=args.kind)
    return 0


def _cmd_report(args) -> int:
    report = run_report(args.out_dir)
    return 1 if report["missing"] else 0


def _cmd_export_dot(args) -> int:
    fsa = load_fsa(args.fsa)
    highlight = None
    if args.highlight is not None:
        highlight = tuple(fsa.alphabet.index(ch) for ch in args.highlight)
    opts = DotOptions(
        merge_edges=args.merge_edges,
        max_label_symbols=args.max_label_symbols,
        highlight_path=highlight,
    )
    for path in save_dot(fsa, opts, args.out):
        print(f"wrote {path}")
    return 0


def _cmd_grad_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    model = init_model(
        CellKind(args.kind), 2, (2, args.d, args.layers), rng, args.init_scale,
        embedding_trainable=True,
    )
    tokens = tuple(int(t) for t in rng.integers(0, 2, size=args.length))
    seq = Sequence(tokens, int(rng.integers(0, 2)))
    err = grad_check(model, seq, args.eps)
    print(f"{args.kind}: max relative error vs central differences = {err:.3e}")
    return 0 if err < args.tolerance else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lisor",
        description="Train gated RNNs on regular-language tasks and distill FSAs "
        "from their hidden-state clusters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a task dataset as JSON Lines")
    p.add_argument("--task", choices=["0110", "000"], required=True)
    p.add_argument("--out", required=True, help="output .jsonl path")
    p.add_argument("--n-train", type=int, help="training sequences (default: 1000 / 3000)")
    p.add_argument("--n-valid", type=int, help="validation sequences, 000 only (default: 500)")
    p.add_argument("--n-test", type=int, help="test sequences (default: 100 / 500)")
    p.add_argument("--len-min", type=int, help="shortest 000 sequence (default: 4)")
    p.add_argument("--len-max", type=int, help="longest 000 sequence (default: 12)")
    p.add_argument("--seed", type=int, help="rng seed (default: 0)")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train checkpoints for every (kind, trial)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("extract", help="sweep cluster counts and emit FSAs")
    _add_config_flags(p)
    p.add_argument("--kind", choices=ALL_KINDS, help="restrict to one cell kind")
    p.add_argument("--trial", type=int, help="restrict to one trial (1-based)")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("ensemble", help="majority-vote the per-trial FSAs across the sweep")
    _add_config_flags(p)
    p.add_argument("--kind", default="mgu", choices=ALL_KINDS, help="cell kind (default: mgu)")
    p.set_defaults(func=_cmd_ensemble)

    p = sub.add_parser("report", help="aggregate per-trial sweeps into the min_k grid")
    p.add_argument("--out-dir", required=True, help="experiment directory with config.json")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("export-dot", help="render an FSA JSON file as Graphviz DOT")
    p.add_argument("--fsa", required=True, help="fsa.json path")
    p.add_argument("--out", required=True, help="output .dot path")
    p.add_argument("--merge-edges", action="store_true", help="merge parallel edges (default: off)")
    p.add_argument(
        "--max-label-symbols",
        type=int,
        default=8,
        help="symbols listed on a merged edge before it becomes a word class (default: 8)",
    )
    p.add_argument("--highlight", help="symbol string whose route is drawn in red, e.g. 0110")
    p.set_defaults(func=_cmd_export_dot)

    p = sub.add_parser("grad-check", help="verify BPTT gradients against central differences")
    p.add_argument("--kind", default="mgu", choices=ALL_KINDS, help="cell kind (default: mgu)")
    p.add_argument("--d", type=int, default=4, help="hidden width (default: 4)")
    p.add_argument("--layers", type=int, default=2, help="layer count (default: 2)")
    p.add_argument("--length", type=int, default=5, help="sequence length (default: 5)")
    p.add_argument("--seed", type=int, default=0, help="rng seed (default: 0)")
    p.add_argument("--eps", type=float, default=1e-5, help="perturbation size (default: 1e-5)")
    p.add_argument("--init-scale", type=float, default=0.1, help="weight init scale (default: 0.1)")
    p.add_argument(
        "--tolerance", type=float, default=1e-4, help="max acceptable relative error (default: 1e-4)"
    )
    p.set_defaults(func=_cmd_grad_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LisorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
