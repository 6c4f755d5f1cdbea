"""Training: binary cross-entropy over full-sequence BPTT, Adam updates.

Gradients are exact analytic backpropagation-through-time over the whole
sequence (sequences here are short, so no truncation). ``grad_check``
provides the independent central-difference oracle used to verify them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import Dataset, Sequence
from .errors import ConfigurationError, NumericalError, TrainingError
from .model import CellKind, RnnModel, forward_states, init_model, predict, sigmoid

P_CLAMP = 1e-12


@dataclass
class HyperParams:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    init_scale: float = 0.1
    early_stop_acc: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float | None = 5.0
    # Optional extra stop condition: with a threshold set, early stopping
    # additionally waits for the train loss to fall this low. Saturated
    # states cluster far better than barely-converged ones.
    early_stop_loss: float | None = None

    def __post_init__(self):
        if min(self.learning_rate, self.init_scale) < 0:
            raise ConfigurationError("learning_rate and init_scale must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")
        if not 0 < self.early_stop_acc <= 1:
            raise ConfigurationError("early_stop_acc must be in (0, 1]")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigurationError("clip_norm must be positive or None")
        if self.early_stop_loss is not None and self.early_stop_loss <= 0:
            raise ConfigurationError("early_stop_loss must be positive or None")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    train_acc: float
    valid_acc: float


def zero_grads(model: RnnModel) -> dict[str, np.ndarray]:
    grads = {key: np.zeros_like(arr) for key, arr in model.param_items()}
    grads["b_out"] = np.zeros(())
    return grads


def _sequence_pass(model: RnnModel, seq: Sequence, grads: dict[str, np.ndarray] | None):
    """Forward one sequence; optionally accumulate its BPTT grads in place.

    Returns (loss, correct) for that sequence.
    """
    caches = forward_states(model, seq.tokens)
    h_final = caches[-1]["H"][-1]
    p = sigmoid(float(model.w_out @ h_final + model.b_out))
    if not math.isfinite(p):
        raise NumericalError("non-finite classifier output")
    y = seq.label
    pc = min(max(p, P_CLAMP), 1.0 - P_CLAMP)
    loss = -(y * math.log(pc) + (1 - y) * math.log(1.0 - pc))
    correct = int((p > 0.5) == bool(y))
    if grads is not None:
        g = p - y
        grads["w_out"] += g * h_final
        grads["b_out"] += g
        n_steps = len(seq.tokens)
        dH = np.zeros((n_steps, model.d))
        dH[-1] = g * model.w_out
        kind = model.kind.value
        for li in range(model.n_layers - 1, -1, -1):
            dX, layer_grads = kernels.layer_backward(
                kind, model.layers[li].tensors, caches[li], dH
            )
            for name, arr in layer_grads.items():
                grads[f"layer{li}.{name}"] += arr
            dH = dX
        np.add.at(grads["embedding"], np.asarray(seq.tokens, dtype=np.int64), dH)
    return loss, correct


def batch_loss(model: RnnModel, batch: list[Sequence]) -> float:
    """Mean BCE of a batch, forward only."""
    if not batch:
        raise ConfigurationError("batch must be non-empty")
    total = 0.0
    for idx, seq in enumerate(batch):
        try:
            loss, _ = _sequence_pass(model, seq, None)
        except NumericalError as exc:
            raise NumericalError(f"sequence {idx}: {exc}") from None
        total += loss
    return total / len(batch)


def loss_and_grads(model: RnnModel, batch: list[Sequence]):
    """Mean BCE loss and its exact analytic gradients for every parameter."""
    loss, grads, _ = _loss_grads_stats(model, batch)
    return loss, grads


def _loss_grads_stats(model: RnnModel, batch: list[Sequence]):
    if not batch:
        raise ConfigurationError("batch must be non-empty")
    grads = zero_grads(model)
    total = 0.0
    correct = 0
    for idx, seq in enumerate(batch):
        try:
            loss, ok = _sequence_pass(model, seq, grads)
        except NumericalError as exc:
            raise NumericalError(f"sequence {idx}: {exc}") from None
        total += loss
        correct += ok
    n = len(batch)
    for arr in grads.values():
        arr /= n
    return total / n, grads, correct


def grad_check(model: RnnModel, seq: Sequence, eps: float = 1e-5) -> float:
    """Max relative error between analytic BPTT and central differences.

    Every scalar parameter (embedding and classifier included) is perturbed
    by +-eps; relative error is |a-n| / max(1e-8, |a|+|n|).
    """
    if not 0 < eps < 1e-2:
        raise ConfigurationError(f"eps must be in (0, 1e-2), got {eps}")
    _, grads = loss_and_grads(model, [seq])
    worst = 0.0
    tensors = dict(model.param_items())
    for key, arr in tensors.items():
        flat = arr.reshape(-1)
        gflat = grads[key].reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + eps
            hi = batch_loss(model, [seq])
            flat[i] = saved - eps
            lo = batch_loss(model, [seq])
            flat[i] = saved
            numeric = (hi - lo) / (2 * eps)
            analytic = gflat[i]
            rel = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
            worst = max(worst, rel)
    saved = model.b_out
    model.b_out = saved + eps
    hi = batch_loss(model, [seq])
    model.b_out = saved - eps
    lo = batch_loss(model, [seq])
    model.b_out = saved
    numeric = (hi - lo) / (2 * eps)
    analytic = float(grads["b_out"])
    worst = max(worst, abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric)))
    return worst


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float | None) -> float:
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm is not None and total > max_norm > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


class AdamState:
    """Per-parameter first/second moment accumulators."""

    def __init__(self, model: RnnModel, hp: HyperParams):
        self.hp = hp
        self.t = 0
        self.m = zero_grads(model)
        self.v = zero_grads(model)

    def step(self, model: RnnModel, grads: dict[str, np.ndarray]) -> None:
        hp = self.hp
        self.t += 1
        bc1 = 1.0 - hp.beta1**self.t
        bc2 = 1.0 - hp.beta2**self.t
        trainable = model.trainable_keys()
        updates = {}
        for key, g in grads.items():
            m = self.m[key]
            v = self.v[key]
            m *= hp.beta1
            m += (1.0 - hp.beta1) * g
            v *= hp.beta2
            v += (1.0 - hp.beta2) * g * g
            if key in trainable:
                updates[key] = hp.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + hp.adam_eps)
        for key, arr in model.param_items():
            if key in updates:
                arr -= updates[key]
        if "b_out" in updates:
            model.b_out = float(model.b_out - updates["b_out"])


def accuracy_of_model(model: RnnModel, split: list[Sequence]) -> float:
    if not split:
        raise ConfigurationError("split must be non-empty")
    return sum(predict(model, s) == s.label for s in split) / len(split)


def train_model(
    kind: CellKind,
    dataset: Dataset,
    dims: tuple[int, int, int],
    hp: HyperParams,
) -> tuple[RnnModel, list[EpochStats]]:
    """Mini-batch Adam training; returns the best-validation-accuracy snapshot.

    Stops early once running train accuracy reaches ``hp.early_stop_acc``.
    Deterministic given ``hp.seed``.
    """
    if not dataset.train:
        raise ConfigurationError("dataset has no training sequences")
    rng = np.random.default_rng(hp.seed)
    model = init_model(kind, len(dataset.alphabet), dims, rng, hp.init_scale)
    opt = AdamState(model, hp)
    history: list[EpochStats] = []
    best_acc = -1.0
    best_model = model.copy()
    n = len(dataset.train)
    for epoch in range(1, hp.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        try:
            for start in range(0, n, hp.batch_size):
                batch = [dataset.train[i] for i in order[start : start + hp.batch_size]]
                loss, grads, ok = _loss_grads_stats(model, batch)
                if not math.isfinite(loss):
                    raise NumericalError("loss is not finite")
                clip_global_norm(grads, hp.clip_norm)
                opt.step(model, grads)
                loss_sum += loss * len(batch)
                correct += ok
        except NumericalError as exc:
            raise TrainingError(f"diverged at epoch {epoch}: {exc}") from None
        train_acc = correct / n
        epoch_loss = loss_sum / n
        valid_acc = accuracy_of_model(model, dataset.validation) if dataset.validation else 0.0
        history.append(EpochStats(epoch, epoch_loss, train_acc, valid_acc))
        # Latest among ties: equally accurate later snapshots have sharper,
        # more clusterable hidden states.
        if valid_acc >= best_acc:
            best_acc = valid_acc
            best_model = model.copy()
        if train_acc >= hp.early_stop_acc and (
            hp.early_stop_loss is None or epoch_loss <= hp.early_stop_loss
        ):
            break
    return best_model, history


def write_history_csv(history: list[EpochStats], path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,loss,train_acc,valid_acc\n")
        for row in history:
            fh.write(f"{row.epoch},{row.loss:.10g},{row.train_acc:.10g},{row.valid_acc:.10g}\n")
