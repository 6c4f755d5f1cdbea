"""Gated recurrent cells, the stacked forward pass, and the classifier head.

Four cell kinds are supported, differing only in gate count:

* SRN   -- h' = tanh(W [h, x] + b)                              (no gates)
* MGU   -- forget gate f; candidate tanh(W_h [f*h, x] + b_h)    (1 gate)
* GRU   -- update gate z, reset gate r                          (2 gates)
* LSTM  -- forget/input/output gates over a cell state c        (3 gates)

All weight matrices act on the concatenation [h_prev, x] (hidden part first)
and have shape (d, d + d_in). Hidden states live in (-1, 1) component-wise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .data import Sequence
from .errors import InputError, ParseError, ShapeError

MODEL_FORMAT_VERSION = "lisor-model-v1"


class CellKind(str, Enum):
    SRN = "srn"
    MGU = "mgu"
    GRU = "gru"
    LSTM = "lstm"

    @property
    def n_gates(self) -> int:
        return {CellKind.SRN: 0, CellKind.MGU: 1, CellKind.GRU: 2, CellKind.LSTM: 3}[self]


# Parameter tensors per kind, in a fixed order (matrix, bias alternating).
PARAM_NAMES = {
    CellKind.SRN: ("W", "b"),
    CellKind.MGU: ("W_f", "b_f", "W_h", "b_h"),
    CellKind.GRU: ("W_z", "b_z", "W_r", "b_r", "W_h", "b_h"),
    CellKind.LSTM: ("W_f", "b_f", "W_i", "b_i", "W_o", "b_o", "W_c", "b_c"),
}


def sigmoid(x):
    """Logistic function 1 / (1 + exp(-x)), stable for |x| up to ~700.

    Accepts scalars or arrays; returns the matching type.
    """
    arr = np.asarray(x, dtype=np.float64)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


@dataclass
class CellParams:
    """One layer's weight matrices and biases, keyed by Table-style names."""

    kind: CellKind
    tensors: dict[str, np.ndarray]

    @property
    def d(self) -> int:
        return self.tensors[PARAM_NAMES[self.kind][0]].shape[0]

    @property
    def d_in(self) -> int:
        return self.tensors[PARAM_NAMES[self.kind][0]].shape[1] - self.d

    def validate(self) -> None:
        names = PARAM_NAMES[self.kind]
        if set(self.tensors) != set(names):
            raise ShapeError(f"{self.kind.value} layer expects tensors {names}, got {tuple(self.tensors)}")
        d, d_in = self.d, self.d_in
        if d_in < 1:
            raise ShapeError(f"inferred input width {d_in} < 1")
        for name in names:
            t = self.tensors[name]
            want = (d, d + d_in) if name.startswith("W") else (d,)
            if t.shape != want:
                raise ShapeError(f"{name}: expected shape {want}, got {t.shape}")
            if not np.all(np.isfinite(t)):
                raise ShapeError(f"{name}: non-finite entries")


@dataclass
class RnnModel:
    """Embedding + stacked recurrent layers + binary linear classifier."""

    kind: CellKind
    embedding: np.ndarray          # (n_symbols, d_emb)
    layers: list[CellParams]       # layer 0 consumes the embedding
    w_out: np.ndarray              # (d,)
    b_out: float
    embedding_trainable: bool = True

    @property
    def n_symbols(self) -> int:
        return self.embedding.shape[0]

    @property
    def d_emb(self) -> int:
        return self.embedding.shape[1]

    @property
    def d(self) -> int:
        return self.layers[0].d

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        """All parameter tensors in a stable order (embedding first)."""
        items = [("embedding", self.embedding)]
        for i, layer in enumerate(self.layers):
            for name in PARAM_NAMES[self.kind]:
                items.append((f"layer{i}.{name}", layer.tensors[name]))
        items.append(("w_out", self.w_out))
        return items

    def trainable_keys(self) -> set[str]:
        keys = {key for key, _ in self.param_items()} | {"b_out"}
        if not self.embedding_trainable:
            keys.discard("embedding")
        return keys

    def copy(self) -> "RnnModel":
        return RnnModel(
            kind=self.kind,
            embedding=self.embedding.copy(),
            layers=[
                CellParams(self.kind, {k: v.copy() for k, v in layer.tensors.items()})
                for layer in self.layers
            ],
            w_out=self.w_out.copy(),
            b_out=float(self.b_out),
            embedding_trainable=self.embedding_trainable,
        )


@dataclass
class HiddenTrace:
    """Top-layer hidden state after each consumed token, plus the final score."""

    hidden: np.ndarray   # (T, d)
    symbols: np.ndarray  # (T,) token indices
    p: float             # classifier probability on the final hidden state

    def __len__(self) -> int:
        return self.hidden.shape[0]


def init_model(
    kind: CellKind,
    n_symbols: int,
    dims: tuple[int, int, int],
    rng: np.random.Generator,
    init_scale: float = 0.1,
    embedding_trainable: bool | None = None,
) -> RnnModel:
    """Fresh model with uniform(-init_scale, init_scale) weights, zero biases.

    When d_emb equals the alphabet size the embedding starts as the identity
    (one-hot codes). Binary alphabets keep that embedding frozen by default;
    larger alphabets train it.
    """
    d_emb, d, n_layers = dims
    if min(d_emb, d, n_layers, n_symbols) < 1:
        raise ShapeError(f"bad dims {dims} / alphabet size {n_symbols}")
    if embedding_trainable is None:
        embedding_trainable = n_symbols != 2
    if d_emb == n_symbols:
        embedding = np.eye(n_symbols, dtype=np.float64)
    else:
        embedding = rng.uniform(-init_scale, init_scale, size=(n_symbols, d_emb))
    layers = []
    for i in range(n_layers):
        d_in = d_emb if i == 0 else d
        tensors = {}
        for name in PARAM_NAMES[kind]:
            if name.startswith("W"):
                tensors[name] = rng.uniform(-init_scale, init_scale, size=(d, d + d_in))
            else:
                tensors[name] = np.zeros(d, dtype=np.float64)
        layers.append(CellParams(kind, tensors))
    w_out = rng.uniform(-init_scale, init_scale, size=d)
    return RnnModel(kind, embedding, layers, w_out, 0.0, embedding_trainable)


def cell_step(params: CellParams, h: np.ndarray, x: np.ndarray, c: np.ndarray | None = None):
    """Advance one layer by one time step.

    Returns the new hidden state, or an (h, c) pair for LSTM. Mostly useful
    for spot checks; sequence processing goes through the kernels.
    """
    params.validate()
    d = params.d
    if h.shape != (d,):
        raise ShapeError(f"hidden state: expected shape ({d},), got {h.shape}")
    if x.shape != (params.d_in,):
        raise ShapeError(f"input: expected shape ({params.d_in},), got {x.shape}")
    t = params.tensors
    hx = np.concatenate([h, x])
    kind = params.kind
    if kind == CellKind.SRN:
        return np.tanh(t["W"] @ hx + t["b"])
    if kind == CellKind.MGU:
        f = sigmoid(t["W_f"] @ hx + t["b_f"])
        h_tilde = np.tanh(t["W_h"] @ np.concatenate([f * h, x]) + t["b_h"])
        return (1.0 - f) * h + f * h_tilde
    if kind == CellKind.GRU:
        z = sigmoid(t["W_z"] @ hx + t["b_z"])
        r = sigmoid(t["W_r"] @ hx + t["b_r"])
        h_tilde = np.tanh(t["W_h"] @ np.concatenate([r * h, x]) + t["b_h"])
        return (1.0 - z) * h + z * h_tilde
    if c is None:
        raise ShapeError("LSTM step needs a cell state")
    f = sigmoid(t["W_f"] @ hx + t["b_f"])
    i = sigmoid(t["W_i"] @ hx + t["b_i"])
    o = sigmoid(t["W_o"] @ hx + t["b_o"])
    c_tilde = np.tanh(t["W_c"] @ hx + t["b_c"])
    c_new = f * c + i * c_tilde
    return o * np.tanh(c_new), c_new


def forward_states(model: RnnModel, tokens) -> list[dict]:
    """Run all layers over a token sequence; return per-layer kernel caches.

    Entry i holds layer i's cache dict (including "H" of shape (T+1, d) with
    the zero initial state in row 0).
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 1 or tokens.size < 1:
        raise InputError("token sequence must be a non-empty 1-d index list")
    if tokens.min() < 0 or tokens.max() >= model.n_symbols:
        raise InputError(
            f"token index out of range for alphabet size {model.n_symbols}: {tokens.tolist()}"
        )
    x = np.ascontiguousarray(model.embedding[tokens])
    caches = []
    for layer in model.layers:
        cache = kernels.layer_forward(model.kind.value, layer.tensors, x)
        caches.append(cache)
        x = np.ascontiguousarray(cache["H"][1:])
    return caches


def forward(model: RnnModel, seq: Sequence | list[int] | tuple[int, ...]) -> HiddenTrace:
    """Consume a sequence and record the top layer's hidden state per step."""
    tokens = seq.tokens if isinstance(seq, Sequence) else tuple(seq)
    caches = forward_states(model, tokens)
    top = caches[-1]["H"][1:].copy()
    p = sigmoid(float(model.w_out @ top[-1] + model.b_out))
    return HiddenTrace(top, np.asarray(tokens, dtype=np.int64), p)


def classify_vector(model: RnnModel, h: np.ndarray) -> int:
    """Binary label of one hidden-space vector; ties at p = 0.5 go negative."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (model.d,):
        raise ShapeError(f"expected shape ({model.d},), got {h.shape}")
    return int(sigmoid(float(model.w_out @ h + model.b_out)) > 0.5)


def predict(model: RnnModel, seq: Sequence) -> int:
    return int(forward(model, seq).p > 0.5)


def save_model(model: RnnModel, path) -> None:
    doc = model_to_json(model)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def model_to_json(model: RnnModel) -> dict:
    def pack(arr):
        return {"shape": list(arr.shape), "data": np.asarray(arr, dtype=np.float64).ravel().tolist()}

    return {
        "version": MODEL_FORMAT_VERSION,
        "kind": model.kind.value,
        "dims": {"d_emb": model.d_emb, "d": model.d, "layers": model.n_layers},
        "embedding": pack(model.embedding),
        "embedding_trainable": model.embedding_trainable,
        "layers": [
            {name: pack(layer.tensors[name]) for name in PARAM_NAMES[model.kind]}
            for layer in model.layers
        ],
        "classifier": {"w": model.w_out.tolist(), "b": float(model.b_out)},
    }


def model_from_json(doc: dict) -> RnnModel:
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ParseError(f"unsupported model version {doc.get('version')!r}")

    def unpack(obj, what):
        try:
            arr = np.asarray(obj["data"], dtype=np.float64).reshape(obj["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad tensor for {what}: {exc}") from None
        return arr

    try:
        kind = CellKind(doc["kind"])
        dims = doc["dims"]
        layers = []
        for i, layer_doc in enumerate(doc["layers"]):
            tensors = {
                name: unpack(layer_doc[name], f"layer{i}.{name}") for name in PARAM_NAMES[kind]
            }
            layer = CellParams(kind, tensors)
            layer.validate()
            layers.append(layer)
        model = RnnModel(
            kind=kind,
            embedding=unpack(doc["embedding"], "embedding"),
            layers=layers,
            w_out=np.asarray(doc["classifier"]["w"], dtype=np.float64),
            b_out=float(doc["classifier"]["b"]),
            embedding_trainable=bool(doc["embedding_trainable"]),
        )
    except KeyError as exc:
        raise ParseError(f"model document missing field {exc}") from None
    if model.n_layers != dims["layers"] or model.d != dims["d"] or model.d_emb != dims["d_emb"]:
        raise ParseError("model dims field disagrees with tensor shapes")
    if model.w_out.shape != (model.d,):
        raise ParseError(f"classifier weight shape {model.w_out.shape} != ({model.d},)")
    return model


def load_model(path) -> RnnModel:
    with open(path) as fh:
        return model_from_json(json.load(fh))
