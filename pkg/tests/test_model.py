import math

import numpy as np
import pytest

from lisor.data import Sequence
from lisor.errors import InputError, ParseError, ShapeError
from lisor.model import (
    PARAM_NAMES,
    CellKind,
    CellParams,
    cell_step,
    classify_vector,
    forward,
    init_model,
    load_model,
    model_from_json,
    model_to_json,
    save_model,
    sigmoid,
)

KINDS = list(CellKind)


def random_model(kind, rng, d=6, d_emb=2, layers=2, scale=0.5):
    model = init_model(kind, 2, (d_emb, d, layers), rng, scale, embedding_trainable=True)
    for layer in model.layers:
        for arr in layer.tensors.values():
            arr += rng.uniform(-scale, scale, arr.shape)
    model.b_out = float(rng.normal() * 0.2)
    return model


def test_sigmoid_basics():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(10.0) == pytest.approx(1.0 / (1.0 + math.exp(-10.0)), rel=1e-12)
    assert sigmoid(3.7) + sigmoid(-3.7) == pytest.approx(1.0, abs=1e-15)


def test_sigmoid_extreme_stability():
    assert sigmoid(700.0) == 1.0
    assert sigmoid(-700.0) > 0.0
    arr = sigmoid(np.array([-700.0, 0.0, 700.0]))
    assert np.all(np.isfinite(arr)) and arr[1] == 0.5


def test_gate_counts():
    assert [k.n_gates for k in KINDS] == [0, 1, 2, 3]


def test_param_name_sets():
    for kind in KINDS:
        names = PARAM_NAMES[kind]
        assert len(names) == 2 * (kind.n_gates + 1)


def test_mgu_zero_params_zero_state():
    rng = np.random.default_rng(0)
    model = init_model(CellKind.MGU, 2, (2, 4, 1), rng, 0.0)
    params = model.layers[0]
    h = np.zeros(4)
    x = np.zeros(2)
    out = cell_step(params, h, x)
    assert np.allclose(out, 0.0)


def test_mgu_saturated_gate_keeps_state():
    rng = np.random.default_rng(1)
    model = init_model(CellKind.MGU, 2, (2, 5, 1), rng, 0.3)
    params = model.layers[0]
    params.tensors["b_f"][:] = -30.0  # forget gate pinned shut
    h = rng.uniform(-0.9, 0.9, 5)
    out = cell_step(params, h, rng.uniform(-1, 1, 2))
    assert np.max(np.abs(out - h)) < 1e-9


def test_lstm_output_bound_sweep():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        d = int(rng.integers(2, 6))
        model = init_model(CellKind.LSTM, 2, (2, d, 1), rng, 2.0, embedding_trainable=True)
        params = model.layers[0]
        h = np.tanh(rng.normal(size=d))
        c = rng.normal(size=d) * 3
        h2, _ = cell_step(params, h, rng.normal(size=2), c)
        assert np.max(np.abs(h2)) < 1.0


def test_cell_step_shape_errors():
    rng = np.random.default_rng(3)
    model = init_model(CellKind.GRU, 2, (2, 4, 1), rng)
    with pytest.raises(ShapeError):
        cell_step(model.layers[0], np.zeros(3), np.zeros(2))
    with pytest.raises(ShapeError):
        cell_step(model.layers[0], np.zeros(4), np.zeros(5))


@pytest.mark.parametrize("kind", KINDS)
def test_forward_trace_shape_and_bounds(kind):
    rng = np.random.default_rng(4)
    model = random_model(kind, rng, d=8, layers=3)
    for _ in range(25):
        n = int(rng.integers(1, 12))
        seq = Sequence(tuple(int(t) for t in rng.integers(0, 2, n)), 0)
        trace = forward(model, seq)
        assert len(trace) == n
        assert trace.hidden.shape == (n, 8)
        assert np.max(np.abs(trace.hidden)) < 1.0
        assert 0.0 < trace.p < 1.0


def test_forward_zero_model_traces():
    rng = np.random.default_rng(5)
    model = init_model(CellKind.SRN, 2, (2, 6, 2), rng, 0.0)
    model.embedding[:] = np.eye(2)
    trace = forward(model, Sequence((0, 1, 1, 0), 1))
    assert np.allclose(trace.hidden, 0.0)
    assert trace.p == 0.5


def test_forward_single_step():
    rng = np.random.default_rng(6)
    model = random_model(CellKind.MGU, rng)
    trace = forward(model, Sequence((1,), 0))
    assert len(trace) == 1


def test_forward_rejects_bad_tokens():
    rng = np.random.default_rng(7)
    model = random_model(CellKind.MGU, rng)
    with pytest.raises(InputError):
        forward(model, (0, 2))


def test_forward_is_deterministic():
    rng = np.random.default_rng(8)
    model = random_model(CellKind.LSTM, rng)
    t1 = forward(model, (0, 1, 0, 1, 1))
    t2 = forward(model, (0, 1, 0, 1, 1))
    assert np.array_equal(t1.hidden, t2.hidden) and t1.p == t2.p


def test_classify_vector_threshold_convention():
    rng = np.random.default_rng(9)
    model = init_model(CellKind.MGU, 2, (2, 4, 1), rng, 0.0)
    assert classify_vector(model, np.zeros(4)) == 0  # p = 0.5 is negative
    model.w_out = np.array([1.0, 0.0, 0.0, 0.0])
    assert classify_vector(model, np.array([2.0, 0.0, 0.0, 0.0])) == 1
    with pytest.raises(ShapeError):
        classify_vector(model, np.zeros(5))


@pytest.mark.parametrize("kind", KINDS)
def test_classify_matches_forward_probability(kind):
    rng = np.random.default_rng(10)
    for _ in range(10):
        model = random_model(kind, rng)
        seq = Sequence(tuple(int(t) for t in rng.integers(0, 2, 6)), 1)
        trace = forward(model, seq)
        assert classify_vector(model, trace.hidden[-1]) == int(trace.p > 0.5)


@pytest.mark.parametrize("kind", KINDS)
def test_model_json_roundtrip(kind, tmp_path):
    rng = np.random.default_rng(11)
    model = random_model(kind, rng, d=5, layers=2)
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    assert back.kind == model.kind
    assert np.array_equal(back.embedding, model.embedding)
    assert back.b_out == model.b_out and np.array_equal(back.w_out, model.w_out)
    for la, lb in zip(model.layers, back.layers):
        for name in PARAM_NAMES[kind]:
            assert np.array_equal(la.tensors[name], lb.tensors[name])


def test_model_json_version_check():
    rng = np.random.default_rng(12)
    doc = model_to_json(random_model(CellKind.SRN, rng))
    doc["version"] = "other"
    with pytest.raises(ParseError):
        model_from_json(doc)


def test_model_json_shape_validation():
    rng = np.random.default_rng(13)
    doc = model_to_json(random_model(CellKind.MGU, rng))
    doc["layers"][0]["W_f"]["data"] = doc["layers"][0]["W_f"]["data"][:-1]
    with pytest.raises(ParseError):
        model_from_json(doc)


def test_one_hot_embedding_default():
    rng = np.random.default_rng(14)
    model = init_model(CellKind.MGU, 2, (2, 4, 1), rng)
    assert np.array_equal(model.embedding, np.eye(2))
    assert not model.embedding_trainable
    bigger = init_model(CellKind.MGU, 5, (3, 4, 1), rng)
    assert bigger.embedding_trainable and bigger.embedding.shape == (5, 3)
