"""Backend agreement: the compiled kernels must match the numpy reference."""

import numpy as np
import pytest

from lisor import kernels
from lisor.kernels import _pure
from lisor.model import PARAM_NAMES, CellKind, init_model

try:
    from lisor.kernels import _core
except ImportError:
    _core = None

KINDS = [k.value for k in CellKind]

needs_core = pytest.mark.skipif(_core is None, reason="compiled kernels not built")


def _layer(kind, rng, d=7, din=3, scale=0.6):
    model = init_model(CellKind(kind), 2, (din, d, 1), rng, scale, embedding_trainable=True)
    tensors = model.layers[0].tensors
    for name in PARAM_NAMES[CellKind(kind)]:
        if name.startswith("b"):
            tensors[name] += rng.uniform(-scale, scale, tensors[name].shape)
    return tensors


def test_backend_reports_name():
    assert kernels.BACKEND in ("cython", "pure-python")


@needs_core
@pytest.mark.parametrize("kind", KINDS)
def test_forward_parity(kind):
    rng = np.random.default_rng(42)
    for _ in range(20):
        d, din, n = (int(rng.integers(1, 9)) for _ in range(3))
        n += 1
        tensors = _layer(kind, rng, d=d, din=din)
        X = rng.uniform(-1.5, 1.5, (n, din))
        ca = _pure.layer_forward(kind, tensors, X)
        cb = _core.layer_forward(kind, tensors, X)
        assert set(ca) == set(cb)
        for key in ca:
            np.testing.assert_allclose(ca[key], cb[key], atol=1e-13, err_msg=f"{kind}/{key}")


@needs_core
@pytest.mark.parametrize("kind", KINDS)
def test_backward_parity(kind):
    rng = np.random.default_rng(43)
    for _ in range(20):
        d, din, n = int(rng.integers(1, 9)), int(rng.integers(1, 9)), int(rng.integers(1, 9))
        tensors = _layer(kind, rng, d=d, din=din)
        X = rng.uniform(-1.5, 1.5, (n, din))
        dH = rng.normal(size=(n, d))
        cache = _pure.layer_forward(kind, tensors, X)
        dXa, ga = _pure.layer_backward(kind, tensors, cache, dH)
        dXb, gb = _core.layer_backward(kind, tensors, cache, dH)
        np.testing.assert_allclose(dXa, dXb, atol=1e-12)
        assert set(ga) == set(gb)
        for key in ga:
            np.testing.assert_allclose(ga[key], gb[key], atol=1e-12, err_msg=f"{kind}/{key}")


@needs_core
def test_forward_initial_state_is_zero_row():
    rng = np.random.default_rng(44)
    tensors = _layer("mgu", rng)
    X = rng.uniform(-1, 1, (4, 3))
    for impl in (_pure, _core):
        H = impl.layer_forward("mgu", tensors, X)["H"]
        assert H.shape == (5, 7)
        assert np.all(H[0] == 0.0)
