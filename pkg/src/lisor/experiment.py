"""End-to-end experiment drivers behind the CLI subcommands.

A single JSON-serializable config describes one experiment: task, cell
kinds, training knobs, clustering method, and the cluster-count sweep. Every
(kind, trial) job is deterministic given the base seed; per-trial seeds are
``base + trial``. Cluster sweeps draw a child rng per (trial, k), so the
ensemble step rebuilds exactly the automata the per-trial sweeps produced.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cluster import METHOD_KMEANSPP, METHOD_KMEANSX, collect_traces, distinct_points
from .data import Dataset, gen_task_000, gen_task_0110, positive_fraction, save_dataset
from .errors import ConfigurationError, TrainingError
from .export import DotOptions, save_dot, save_fsa
from .fsa import FsaEnsemble, accuracy, build_fsa, sweep_k
from .model import CellKind, load_model, save_model
from .train import HyperParams, accuracy_of_model, train_model, write_history_csv

ALL_KINDS = ("mgu", "srn", "gru", "lstm")

TASK_DEFAULTS = {
    "0110": {"n_train": 1000, "n_valid": 16, "n_test": 100, "k_max": 64, "target_accuracy": 1.0},
    "000": {"n_train": 3000, "n_valid": 500, "n_test": 500, "k_max": 200, "target_accuracy": 0.7},
}


@dataclass
class ExperimentConfig:
    task: str = "0110"
    kinds: tuple[str, ...] = ALL_KINDS
    d_emb: int = 2
    d: int = 10
    n_layers: int = 3
    method: str = METHOD_KMEANSPP
    k_min: int = 2
    k_max: int | None = None
    n_trials: int = 5
    target_accuracy: float | None = None
    seed: int = 0
    output_dir: str = "runs/exp"
    n_train: int | None = None
    n_valid: int | None = None
    n_test: int | None = None
    len_min: int = 4
    len_max: int = 12
    learning_rate: float = 2e-3
    epochs: int = 200
    batch_size: int = 32
    init_scale: float = 0.1
    early_stop_acc: float = 1.0
    early_stop_loss: float | None = None
    clip_norm: float | None = 5.0

    def resolved(self) -> "ExperimentConfig":
        """Copy with per-task defaults filled in and basic checks applied."""
        if self.task not in TASK_DEFAULTS:
            raise ConfigurationError(f"unknown task {self.task!r}")
        merged = dataclasses.replace(self)
        for key, value in TASK_DEFAULTS[self.task].items():
            if getattr(merged, key) is None:
                setattr(merged, key, value)
        merged.kinds = tuple(merged.kinds)
        unknown = set(merged.kinds) - set(ALL_KINDS)
        if unknown:
            raise ConfigurationError(f"unknown cell kinds {sorted(unknown)}")
        if merged.k_min < 2:
            raise ConfigurationError("k_min must be >= 2")
        if merged.k_max < merged.k_min:
            raise ConfigurationError("k_max must be >= k_min")
        if merged.n_trials < 1:
            raise ConfigurationError("n_trials must be >= 1")
        if merged.method not in (METHOD_KMEANSPP, METHOD_KMEANSX):
            raise ConfigurationError(f"unknown method {merged.method!r}")
        return merged

    def to_json(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["kinds"] = list(self.kinds)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config fields {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.kinds = tuple(cfg.kinds)
        return cfg

    # --- derived conveniences ----------------------------------------
    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.d_emb, self.d, self.n_layers)

    @property
    def sentinel_k(self) -> int:
        """Reported in place of min_k when the sweep never meets the target."""
        return self.k_max + 1

    def trial_seed(self, trial: int) -> int:
        return self.seed + trial

    def hyperparams(self, trial: int) -> HyperParams:
        return HyperParams(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.trial_seed(trial),
            init_scale=self.init_scale,
            early_stop_acc=self.early_stop_acc,
            early_stop_loss=self.early_stop_loss,
            clip_norm=self.clip_norm,
        )

    def out_path(self) -> Path:
        return Path(self.output_dir)

    def trial_dir(self, kind: str, trial: int) -> Path:
        return self.out_path() / kind / f"trial{trial}"


def make_dataset(cfg: ExperimentConfig) -> Dataset:
    cfg = cfg.resolved()
    if cfg.task == "0110":
        return gen_task_0110(cfg.n_train, cfg.n_test, cfg.seed)
    return gen_task_000(cfg.n_train, cfg.n_valid, cfg.n_test, (cfg.len_min, cfg.len_max), cfg.seed)


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_train(cfg: ExperimentConfig, log=print) -> dict:
    """Train every (kind, trial) pair; one checkpoint + history CSV each.

    Diverged trials are reported and skipped, the run continues. Returns a
    summary dict (also written to ``train_summary.json``).
    """
    cfg = cfg.resolved()
    out = cfg.out_path()
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.to_json())
    dataset = make_dataset(cfg)
    save_dataset(dataset, out / "dataset.jsonl")
    summary = {
        "task": cfg.task,
        "class_ratio": {
            split: positive_fraction(dataset.split(split))
            for split in ("train", "validation", "test")
        },
        "trials": {},
        "failures": [],
    }
    log(
        f"[train] task {cfg.task}: positives train={summary['class_ratio']['train']:.3f} "
        f"validation={summary['class_ratio']['validation']:.3f} "
        f"test={summary['class_ratio']['test']:.3f}"
    )
    for kind in cfg.kinds:
        for trial in range(1, cfg.n_trials + 1):
            tdir = cfg.trial_dir(kind, trial)
            tdir.mkdir(parents=True, exist_ok=True)
            hp = cfg.hyperparams(trial)
            try:
                model, history = train_model(CellKind(kind), dataset, cfg.dims, hp)
            except TrainingError as exc:
                log(f"[train] {kind} trial {trial}: FAILED ({exc})")
                summary["failures"].append({"kind": kind, "trial": trial, "error": str(exc)})
                continue
            save_model(model, tdir / "checkpoint.json")
            write_history_csv(history, tdir / "training.csv")
            test_acc = accuracy_of_model(model, dataset.test) if dataset.test else None
            row = {
                "epochs_run": len(history),
                "final_train_acc": history[-1].train_acc,
                "best_valid_acc": max(h.valid_acc for h in history),
                "test_acc": test_acc,
            }
            summary["trials"][f"{kind}/trial{trial}"] = row
            log(
                f"[train] {kind} trial {trial}: {row['epochs_run']} epochs, "
                f"train {row['final_train_acc']:.3f}, valid {row['best_valid_acc']:.3f}"
                + (f", test {test_acc:.3f}" if test_acc is not None else "")
            )
    _write_json(out / "train_summary.json", summary)
    return summary


def _eval_split(cfg: ExperimentConfig, dataset: Dataset) -> tuple[str, list]:
    """FSAs learn on validation traces; accuracy is scored on the test split,
    except task 0110 whose 16-string validation set is the exhaustive one."""
    if cfg.task == "0110":
        return "validation", dataset.validation
    return "test", dataset.test


def run_extract(cfg: ExperimentConfig, kind: str, trial: int, log=print) -> dict:
    """Sweep cluster counts for one checkpoint; write curve, summary, FSA, DOT."""
    cfg = cfg.resolved()
    tdir = cfg.trial_dir(kind, trial)
    ckpt = tdir / "checkpoint.json"
    if not ckpt.exists():
        raise ConfigurationError(f"missing checkpoint {ckpt}; run train first")
    model = load_model(ckpt)
    dataset = make_dataset(cfg)
    pool = collect_traces(model, dataset.validation)
    split_name, eval_seqs = _eval_split(cfg, dataset)
    ks = list(range(cfg.k_min, cfg.k_max + 1))
    min_k, curve = sweep_k(
        model,
        pool,
        dataset.alphabet,
        ks,
        eval_seqs,
        cfg.target_accuracy,
        cfg.method,
        seed=cfg.trial_seed(trial),
    )
    with open(tdir / "sweep.csv", "w") as fh:
        fh.write("k,accuracy\n")
        for k, acc in curve:
            fh.write(f"{k},{acc:.10g}\n")
    reached = min_k is not None
    best_k = min_k if reached else max(curve, key=lambda ka: (ka[1], -ka[0]))[0]
    best_k = min(best_k, distinct_points(pool, cfg.method))
    rng = np.random.default_rng([cfg.trial_seed(trial), best_k])
    fsa = build_fsa(model, pool, dataset.alphabet, best_k, cfg.method, rng)
    save_fsa(fsa, tdir / "fsa.json")
    save_dot(fsa, DotOptions(), tdir / "fsa.dot")
    summary = {
        "kind": kind,
        "trial": trial,
        "method": cfg.method,
        "target_accuracy": cfg.target_accuracy,
        "eval_split": split_name,
        "reached": reached,
        "min_k": min_k if reached else cfg.sentinel_k,
        "fsa_k": best_k,
        "eval_accuracy_at_k": dict(curve)[best_k],
        "test_accuracy_at_k": accuracy(fsa, dataset.test) if dataset.test else None,
        "pool_points": len(pool),
    }
    if cfg.task == "0110":
        route = tuple(dataset.alphabet.index(s) for s in "0110")
        save_dot(fsa, DotOptions(highlight_path=route), tdir / "fsa_0110_route.dot")
    _write_json(tdir / "summary.json", summary)
    log(
        f"[extract] {kind} trial {trial}: min_k="
        + (str(min_k) if reached else f"not reached (sentinel {cfg.sentinel_k})")
        + f", {split_name} accuracy at k={best_k}: {summary['eval_accuracy_at_k']:.3f}"
    )
    return summary


def run_ensemble(cfg: ExperimentConfig, kind: str = "mgu", log=print) -> dict:
    """Majority-vote the per-trial FSAs at every swept k on the test split."""
    cfg = cfg.resolved()
    if cfg.n_trials % 2 == 0:
        raise ConfigurationError("ensembling needs an odd n_trials")
    dataset = make_dataset(cfg)
    models, pools, k_sats = [], [], []
    for trial in range(1, cfg.n_trials + 1):
        ckpt = cfg.trial_dir(kind, trial) / "checkpoint.json"
        if not ckpt.exists():
            raise ConfigurationError(f"missing checkpoint {ckpt}; run train first")
        model = load_model(ckpt)
        models.append(model)
        pools.append(collect_traces(model, dataset.validation))
        k_sats.append(distinct_points(pools[-1], cfg.method))
    if not dataset.test:
        raise ConfigurationError("ensemble evaluation needs a test split")
    rows = []
    cache: dict[tuple[int, int], object] = {}
    for k in range(cfg.k_min, cfg.k_max + 1):
        fsas = []
        for t in range(1, cfg.n_trials + 1):
            kt = min(k, k_sats[t - 1])
            if (t, kt) not in cache:
                cache[(t, kt)] = build_fsa(
                    models[t - 1],
                    pools[t - 1],
                    dataset.alphabet,
                    kt,
                    cfg.method,
                    np.random.default_rng([cfg.trial_seed(t), kt]),
                )
            fsas.append(cache[(t, kt)])
        individual = [accuracy(f, dataset.test) for f in fsas]
        vote = accuracy(FsaEnsemble(fsas), dataset.test)
        rows.append((k, float(np.mean(individual)), vote))
    out = cfg.out_path() / f"ensemble_{kind}.csv"
    with open(out, "w") as fh:
        fh.write("k,mean_accuracy,ensemble_accuracy\n")
        for k, mean_acc, vote in rows:
            fh.write(f"{k},{mean_acc:.10g},{vote:.10g}\n")
    gains = [vote - mean_acc for _, mean_acc, vote in rows]
    summary = {
        "kind": kind,
        "rows": len(rows),
        "mean_gain": float(np.mean(gains)),
        "max_gain": float(np.max(gains)),
        "min_gain": float(np.min(gains)),
        "csv": str(out),
    }
    _write_json(cfg.out_path() / f"ensemble_{kind}.json", summary)
    log(
        f"[ensemble] {kind}: vote-vs-mean gain over k in "
        f"[{summary['min_gain']:+.3f}, {summary['max_gain']:+.3f}], "
        f"mean {summary['mean_gain']:+.3f}"
    )
    return summary


def run_report(output_dir, log=print) -> dict:
    """Aggregate per-trial min_k into a (trials x kinds) grid with averages."""
    out = Path(output_dir)
    cfg_path = out / "config.json"
    if not cfg_path.exists():
        raise ConfigurationError(f"no config.json under {out}")
    cfg = ExperimentConfig.from_json(json.loads(cfg_path.read_text())).resolved()
    grid: dict[str, dict[int, int | None]] = {}
    missing = []
    for kind in cfg.kinds:
        grid[kind] = {}
        for trial in range(1, cfg.n_trials + 1):
            spath = cfg.trial_dir(kind, trial) / "summary.json"
            if spath.exists():
                grid[kind][trial] = json.loads(spath.read_text())["min_k"]
            else:
                grid[kind][trial] = None
                missing.append(str(spath))
    averages = {}
    for kind in cfg.kinds:
        cells = [v for v in grid[kind].values() if v is not None]
        averages[kind] = float(np.mean(cells)) if cells else None
    report = {
        "task": cfg.task,
        "method": cfg.method,
        "target_accuracy": cfg.target_accuracy,
        "sentinel_k": cfg.sentinel_k,
        "grid": {kind: {str(t): v for t, v in cells.items()} for kind, cells in grid.items()},
        "averages": averages,
        "missing": missing,
    }
    _write_json(out / "report.json", report)
    lines = [
        f"task {cfg.task}  method {cfg.method}  target {cfg.target_accuracy}"
        f"  (min clusters to reach target; {cfg.sentinel_k} = never reached)",
        "",
    ]
    width = max(8, *(len(k) for k in cfg.kinds))
    header = "trial".ljust(10) + "".join(kind.upper().rjust(width) for kind in cfg.kinds)
    lines.append(header)
    for trial in range(1, cfg.n_trials + 1):
        cells = []
        for kind in cfg.kinds:
            v = grid[kind][trial]
            cells.append(("-" if v is None else str(v)).rjust(width))
        lines.append(f"trial {trial}".ljust(10) + "".join(cells))
    avg_cells = "".join(
        ("-" if averages[k] is None else f"{averages[k]:.1f}").rjust(width) for k in cfg.kinds
    )
    lines.append("average".ljust(10) + avg_cells)
    if missing:
        lines.append("")
        lines.append(f"missing artifacts ({len(missing)}):")
        lines.extend(f"  {m}" for m in missing)
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text)
    log(text)
    return report
