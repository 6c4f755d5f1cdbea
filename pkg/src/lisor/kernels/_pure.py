"""Reference numpy implementation of the per-layer sequence kernels.

Each forward runs one recurrent layer over a whole sequence and returns the
cache its backward needs. ``H`` rows are hidden states with the zero initial
state in row 0; gate caches are per-step values. The backward consumes
``dH``, the loss gradient w.r.t. every per-step output of the layer, and
returns the gradient w.r.t. the layer input plus per-tensor parameter grads.

The compiled backend in ``_core.pyx`` mirrors this module function for
function; keep the two in sync.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def srn_forward(t, X):
    W, b = t["W"], t["b"]
    n_steps, d = X.shape[0], b.shape[0]
    H = np.zeros((n_steps + 1, d))
    Wh, Wx = W[:, :d], W[:, d:]
    for i in range(n_steps):
        H[i + 1] = np.tanh(Wh @ H[i] + Wx @ X[i] + b)
    return {"H": H, "X": X}


def srn_backward(t, cache, dH):
    W, b = t["W"], t["b"]
    H, X = cache["H"], cache["X"]
    n_steps, d = X.shape[0], b.shape[0]
    Wh, Wx = W[:, :d], W[:, d:]
    dW = np.zeros_like(W)
    db = np.zeros_like(b)
    dX = np.zeros_like(X)
    carry = np.zeros(d)
    for i in range(n_steps - 1, -1, -1):
        da = (dH[i] + carry) * (1.0 - H[i + 1] ** 2)
        dW[:, :d] += np.outer(da, H[i])
        dW[:, d:] += np.outer(da, X[i])
        db += da
        dX[i] = Wx.T @ da
        carry = Wh.T @ da
    return dX, {"W": dW, "b": db}


def mgu_forward(t, X):
    Wf, bf, Wc, bc = t["W_f"], t["b_f"], t["W_h"], t["b_h"]
    n_steps, d = X.shape[0], bf.shape[0]
    H = np.zeros((n_steps + 1, d))
    F = np.empty((n_steps, d))
    Ht = np.empty((n_steps, d))
    for i in range(n_steps):
        hx = np.concatenate([H[i], X[i]])
        F[i] = _sigmoid(Wf @ hx + bf)
        Ht[i] = np.tanh(Wc @ np.concatenate([F[i] * H[i], X[i]]) + bc)
        H[i + 1] = (1.0 - F[i]) * H[i] + F[i] * Ht[i]
    return {"H": H, "X": X, "F": F, "Ht": Ht}


def mgu_backward(t, cache, dH):
    Wf, Wc = t["W_f"], t["W_h"]
    H, X, F, Ht = cache["H"], cache["X"], cache["F"], cache["Ht"]
    n_steps, d = X.shape[0], F.shape[1]
    dWf = np.zeros_like(Wf)
    dbf = np.zeros(d)
    dWc = np.zeros_like(Wc)
    dbc = np.zeros(d)
    dX = np.zeros_like(X)
    carry = np.zeros(d)
    for i in range(n_steps - 1, -1, -1):
        dh = dH[i] + carry
        f, ht, hprev = F[i], Ht[i], H[i]
        df = dh * (ht - hprev)
        da_c = dh * f * (1.0 - ht**2)
        carry = dh * (1.0 - f)
        dWc[:, :d] += np.outer(da_c, f * hprev)
        dWc[:, d:] += np.outer(da_c, X[i])
        dbc += da_c
        u = Wc[:, :d].T @ da_c
        df += u * hprev
        carry += u * f
        dX[i] = Wc[:, d:].T @ da_c
        da_f = df * f * (1.0 - f)
        dWf[:, :d] += np.outer(da_f, hprev)
        dWf[:, d:] += np.outer(da_f, X[i])
        dbf += da_f
        carry += Wf[:, :d].T @ da_f
        dX[i] += Wf[:, d:].T @ da_f
    return dX, {"W_f": dWf, "b_f": dbf, "W_h": dWc, "b_h": dbc}


def gru_forward(t, X):
    Wz, bz, Wr, br, Wc, bc = t["W_z"], t["b_z"], t["W_r"], t["b_r"], t["W_h"], t["b_h"]
    n_steps, d = X.shape[0], bz.shape[0]
    H = np.zeros((n_steps + 1, d))
    Z = np.empty((n_steps, d))
    R = np.empty((n_steps, d))
    Ht = np.empty((n_steps, d))
    for i in range(n_steps):
        hx = np.concatenate([H[i], X[i]])
        Z[i] = _sigmoid(Wz @ hx + bz)
        R[i] = _sigmoid(Wr @ hx + br)
        Ht[i] = np.tanh(Wc @ np.concatenate([R[i] * H[i], X[i]]) + bc)
        H[i + 1] = (1.0 - Z[i]) * H[i] + Z[i] * Ht[i]
    return {"H": H, "X": X, "Z": Z, "R": R, "Ht": Ht}


def gru_backward(t, cache, dH):
    Wz, Wr, Wc = t["W_z"], t["W_r"], t["W_h"]
    H, X, Z, R, Ht = cache["H"], cache["X"], cache["Z"], cache["R"], cache["Ht"]
    n_steps, d = X.shape[0], Z.shape[1]
    dWz = np.zeros_like(Wz)
    dbz = np.zeros(d)
    dWr = np.zeros_like(Wr)
    dbr = np.zeros(d)
    dWc = np.zeros_like(Wc)
    dbc = np.zeros(d)
    dX = np.zeros_like(X)
    carry = np.zeros(d)
    for i in range(n_steps - 1, -1, -1):
        dh = dH[i] + carry
        z, r, ht, hprev = Z[i], R[i], Ht[i], H[i]
        dz = dh * (ht - hprev)
        da_c = dh * z * (1.0 - ht**2)
        carry = dh * (1.0 - z)
        dWc[:, :d] += np.outer(da_c, r * hprev)
        dWc[:, d:] += np.outer(da_c, X[i])
        dbc += da_c
        u = Wc[:, :d].T @ da_c
        dr = u * hprev
        carry += u * r
        dX[i] = Wc[:, d:].T @ da_c
        da_z = dz * z * (1.0 - z)
        dWz[:, :d] += np.outer(da_z, hprev)
        dWz[:, d:] += np.outer(da_z, X[i])
        dbz += da_z
        carry += Wz[:, :d].T @ da_z
        dX[i] += Wz[:, d:].T @ da_z
        da_r = dr * r * (1.0 - r)
        dWr[:, :d] += np.outer(da_r, hprev)
        dWr[:, d:] += np.outer(da_r, X[i])
        dbr += da_r
        carry += Wr[:, :d].T @ da_r
        dX[i] += Wr[:, d:].T @ da_r
    return dX, {"W_z": dWz, "b_z": dbz, "W_r": dWr, "b_r": dbr, "W_h": dWc, "b_h": dbc}


def lstm_forward(t, X):
    Wf, bf, Wi, bi, Wo, bo, Wc, bc = (
        t["W_f"], t["b_f"], t["W_i"], t["b_i"], t["W_o"], t["b_o"], t["W_c"], t["b_c"],
    )
    n_steps, d = X.shape[0], bf.shape[0]
    H = np.zeros((n_steps + 1, d))
    C = np.zeros((n_steps + 1, d))
    F = np.empty((n_steps, d))
    I = np.empty((n_steps, d))
    O = np.empty((n_steps, d))
    Ct = np.empty((n_steps, d))
    TC = np.empty((n_steps, d))
    for i in range(n_steps):
        hx = np.concatenate([H[i], X[i]])
        F[i] = _sigmoid(Wf @ hx + bf)
        I[i] = _sigmoid(Wi @ hx + bi)
        O[i] = _sigmoid(Wo @ hx + bo)
        Ct[i] = np.tanh(Wc @ hx + bc)
        C[i + 1] = F[i] * C[i] + I[i] * Ct[i]
        TC[i] = np.tanh(C[i + 1])
        H[i + 1] = O[i] * TC[i]
    return {"H": H, "X": X, "C": C, "F": F, "I": I, "O": O, "Ct": Ct, "TC": TC}


def lstm_backward(t, cache, dH):
    Wf, Wi, Wo, Wc = t["W_f"], t["W_i"], t["W_o"], t["W_c"]
    H, X, C = cache["H"], cache["X"], cache["C"]
    F, I, O, Ct, TC = cache["F"], cache["I"], cache["O"], cache["Ct"], cache["TC"]
    n_steps, d = X.shape[0], F.shape[1]
    grads = {name: np.zeros_like(t[name]) for name in ("W_f", "b_f", "W_i", "b_i", "W_o", "b_o", "W_c", "b_c")}
    dX = np.zeros_like(X)
    carry_h = np.zeros(d)
    carry_c = np.zeros(d)
    gates = (("W_f", "b_f", Wf), ("W_i", "b_i", Wi), ("W_o", "b_o", Wo))
    for i in range(n_steps - 1, -1, -1):
        dh = dH[i] + carry_h
        do = dh * TC[i]
        dc = carry_c + dh * O[i] * (1.0 - TC[i] ** 2)
        df = dc * C[i]
        di = dc * Ct[i]
        da_c = dc * I[i] * (1.0 - Ct[i] ** 2)
        carry_c = dc * F[i]
        carry_h = np.zeros(d)
        dxi = np.zeros(X.shape[1])
        for (wname, bname, W), dg, g in zip(gates, (df, di, do), (F[i], I[i], O[i])):
            da = dg * g * (1.0 - g)
            grads[wname][:, :d] += np.outer(da, H[i])
            grads[wname][:, d:] += np.outer(da, X[i])
            grads[bname] += da
            carry_h += W[:, :d].T @ da
            dxi += W[:, d:].T @ da
        grads["W_c"][:, :d] += np.outer(da_c, H[i])
        grads["W_c"][:, d:] += np.outer(da_c, X[i])
        grads["b_c"] += da_c
        carry_h += Wc[:, :d].T @ da_c
        dxi += Wc[:, d:].T @ da_c
        dX[i] = dxi
    return dX, grads


_FORWARD = {"srn": srn_forward, "mgu": mgu_forward, "gru": gru_forward, "lstm": lstm_forward}
_BACKWARD = {"srn": srn_backward, "mgu": mgu_backward, "gru": gru_backward, "lstm": lstm_backward}


def layer_forward(kind: str, tensors: dict, X: np.ndarray) -> dict:
    return _FORWARD[kind](tensors, np.asarray(X, dtype=np.float64))


def layer_backward(kind: str, tensors: dict, cache: dict, dH: np.ndarray):
    return _BACKWARD[kind](tensors, cache, np.asarray(dH, dtype=np.float64))
