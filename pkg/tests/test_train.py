import math

import numpy as np
import pytest

from lisor.data import Sequence, gen_task_0110
from lisor.errors import ConfigurationError, TrainingError
from lisor.model import CellKind, init_model, model_to_json
from lisor.train import (
    AdamState,
    HyperParams,
    batch_loss,
    clip_global_norm,
    grad_check,
    loss_and_grads,
    train_model,
    zero_grads,
)

KINDS = list(CellKind)


def random_model(kind, rng, d=4, layers=2, scale=0.3):
    model = init_model(kind, 2, (2, d, layers), rng, scale, embedding_trainable=True)
    for layer in model.layers:
        for arr in layer.tensors.values():
            arr += rng.uniform(-scale, scale, arr.shape)
    model.b_out = float(rng.normal() * 0.1)
    return model


def random_seq(rng, lo=3, hi=6):
    n = int(rng.integers(lo, hi + 1))
    return Sequence(tuple(int(t) for t in rng.integers(0, 2, n)), int(rng.integers(0, 2)))


def test_zero_model_balanced_batch_loss_is_ln2():
    rng = np.random.default_rng(0)
    model = init_model(CellKind.MGU, 2, (2, 6, 2), rng, 0.0)
    batch = [Sequence((0, 1), 1), Sequence((1, 0), 0)]
    loss, _ = loss_and_grads(model, batch)
    assert loss == pytest.approx(math.log(2), rel=1e-12)


def test_duplicated_batch_leaves_loss_and_grads_unchanged():
    rng = np.random.default_rng(1)
    model = random_model(CellKind.GRU, rng)
    batch = [random_seq(rng) for _ in range(3)]
    l1, g1 = loss_and_grads(model, batch)
    l2, g2 = loss_and_grads(model, batch * 2)
    assert l1 == pytest.approx(l2, rel=1e-12)
    for key in g1:
        np.testing.assert_allclose(g1[key], g2[key], rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("layers", [1, 2, 3])
def test_gradients_match_finite_differences(kind, layers):
    rng = np.random.default_rng(7)
    for _ in range(3):
        model = random_model(kind, rng, layers=layers)
        err = grad_check(model, random_seq(rng), 1e-5)
        assert err < 1e-4, f"{kind} L={layers}: {err}"


def test_grad_check_catches_mutation():
    # corrupting one analytic gradient entry by x2 must blow the error up
    rng = np.random.default_rng(8)
    model = random_model(CellKind.MGU, rng)
    seq = random_seq(rng)
    _, grads = loss_and_grads(model, [seq])
    true_err = grad_check(model, seq, 1e-5)
    assert true_err < 1e-4

    import lisor.train as train_mod

    original = train_mod.loss_and_grads

    def corrupted(m, batch):
        loss, g = original(m, batch)
        g["w_out"] = g["w_out"].copy()
        g["w_out"][0] *= 2.0
        return loss, g

    train_mod.loss_and_grads = corrupted
    try:
        assert train_mod.grad_check(model, seq, 1e-5) > 0.3
    finally:
        train_mod.loss_and_grads = original


def test_grad_check_rejects_bad_eps():
    rng = np.random.default_rng(9)
    model = random_model(CellKind.SRN, rng)
    with pytest.raises(ConfigurationError):
        grad_check(model, random_seq(rng), 0.0)
    with pytest.raises(ConfigurationError):
        grad_check(model, random_seq(rng), 0.5)


def test_clip_global_norm():
    grads = {"a": np.array([3.0, 4.0]), "b": np.zeros(2)}
    total = clip_global_norm(grads, 1.0)
    assert total == pytest.approx(5.0)
    assert np.linalg.norm(grads["a"]) == pytest.approx(1.0)
    grads2 = {"a": np.array([0.3, 0.4])}
    clip_global_norm(grads2, 1.0)  # under the limit: untouched
    np.testing.assert_allclose(grads2["a"], [0.3, 0.4])


def test_single_step_reduces_loss_at_small_lr():
    rng = np.random.default_rng(10)
    for kind in KINDS:
        model = random_model(kind, rng)
        seq = random_seq(rng)
        hp = HyperParams(learning_rate=1e-5, epochs=1, batch_size=1, seed=0)
        opt = AdamState(model, hp)
        before = batch_loss(model, [seq])
        _, grads = loss_and_grads(model, [seq])
        opt.step(model, grads)
        after = batch_loss(model, [seq])
        assert after < before, kind


def test_zero_learning_rate_freezes_parameters():
    rng = np.random.default_rng(11)
    ds = gen_task_0110(20, 0, seed=3)
    hp = HyperParams(learning_rate=0.0, epochs=3, batch_size=8, seed=5)
    model, history = train_model(CellKind.MGU, ds, (2, 4, 1), hp)
    fresh = init_model(CellKind.MGU, 2, (2, 4, 1), np.random.default_rng(5), hp.init_scale)
    assert model_to_json(model) == model_to_json(fresh)
    assert len(history) <= hp.epochs


def test_training_is_bit_reproducible():
    ds = gen_task_0110(60, 10, seed=4)
    hp = HyperParams(learning_rate=5e-3, epochs=4, batch_size=16, seed=9)
    m1, h1 = train_model(CellKind.GRU, ds, (2, 5, 2), hp)
    m2, h2 = train_model(CellKind.GRU, ds, (2, 5, 2), hp)
    assert model_to_json(m1) == model_to_json(m2)
    assert [(s.loss, s.train_acc, s.valid_acc) for s in h1] == [
        (s.loss, s.train_acc, s.valid_acc) for s in h2
    ]


def test_history_bounded_and_early_stop():
    ds = gen_task_0110(30, 0, seed=6)
    hp = HyperParams(learning_rate=1e-3, epochs=5, batch_size=8, seed=1, early_stop_acc=0.5)
    _, history = train_model(CellKind.SRN, ds, (2, 4, 1), hp)
    # nearly all labels are 0, so 50% running accuracy stops after epoch 1
    assert len(history) == 1


def test_divergence_reports_epoch(monkeypatch):
    import lisor.train as train_mod

    ds = gen_task_0110(30, 0, seed=6)
    hp = HyperParams(learning_rate=1e-3, epochs=3, batch_size=8, seed=1)

    def exploding(model, batch):
        return float("nan"), zero_grads(model), 0

    monkeypatch.setattr(train_mod, "_loss_grads_stats", exploding)
    with pytest.raises(TrainingError, match="epoch 1"):
        train_model(CellKind.SRN, ds, (2, 4, 1), hp)


def test_zero_grads_covers_every_parameter():
    rng = np.random.default_rng(12)
    model = random_model(CellKind.LSTM, rng, layers=2)
    grads = zero_grads(model)
    expected = {key for key, _ in model.param_items()} | {"b_out"}
    assert set(grads) == expected


def test_hyperparams_validation():
    with pytest.raises(ConfigurationError):
        HyperParams(epochs=0)
    with pytest.raises(ConfigurationError):
        HyperParams(early_stop_acc=0.0)
    with pytest.raises(ConfigurationError):
        HyperParams(early_stop_loss=-1.0)
