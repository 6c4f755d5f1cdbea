# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled recurrent-layer kernels.

Same contract as ``kernels._pure``: one call runs a whole sequence through
one layer (forward or backward). Loop nests are written out by hand because
the matrices are small enough that interpreter and BLAS dispatch overhead
dominates any vectorized formulation.
"""

import numpy as np

from libc.math cimport exp, tanh


cdef inline double _sig(double x) noexcept nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline void _gate_grads(
    double[:, ::1] dW, double[::1] db, double[:, ::1] W,
    double[::1] da, double[::1] hprev, double[::1] xi,
    double[::1] carry, double[::1] dxi, int d, int din,
) noexcept nogil:
    """Accumulate dW, db for one gate and push its gradient back to
    h_{t-1} (into carry) and x_t (into dxi)."""
    cdef int a, j
    cdef double g
    for a in range(d):
        g = da[a]
        db[a] += g
        for j in range(d):
            dW[a, j] += g * hprev[j]
            carry[j] += W[a, j] * g
        for j in range(din):
            dW[a, d + j] += g * xi[j]
            dxi[j] += W[a, d + j] * g


def srn_forward(dict t, X_arr):
    cdef double[:, ::1] X = np.ascontiguousarray(X_arr, dtype=np.float64)
    cdef double[:, ::1] W = np.ascontiguousarray(t["W"])
    cdef double[::1] b = np.ascontiguousarray(t["b"])
    cdef int n = X.shape[0], din = X.shape[1], d = b.shape[0]
    H_arr = np.zeros((n + 1, d))
    cdef double[:, ::1] H = H_arr
    cdef int i, a, j
    cdef double s
    for i in range(n):
        for a in range(d):
            s = b[a]
            for j in range(d):
                s += W[a, j] * H[i, j]
            for j in range(din):
                s += W[a, d + j] * X[i, j]
            H[i + 1, a] = tanh(s)
    return {"H": H_arr, "X": X_arr}


def srn_backward(dict t, dict cache, dH_arr):
    cdef double[:, ::1] W = np.ascontiguousarray(t["W"])
    cdef double[:, ::1] H = np.ascontiguousarray(cache["H"])
    cdef double[:, ::1] X = np.ascontiguousarray(cache["X"])
    cdef double[:, ::1] dH = np.ascontiguousarray(dH_arr, dtype=np.float64)
    cdef int n = X.shape[0], din = X.shape[1], d = H.shape[1]
    dW_arr = np.zeros((d, d + din))
    db_arr = np.zeros(d)
    dX_arr = np.zeros((n, din))
    carry_arr = np.zeros(d)
    da_arr = np.empty(d)
    next_arr = np.empty(d)
    cdef double[:, ::1] dW = dW_arr
    cdef double[::1] db = db_arr
    cdef double[:, ::1] dX = dX_arr
    cdef double[::1] carry = carry_arr
    cdef double[::1] da = da_arr
    cdef double[::1] nxt = next_arr
    cdef int i, a, j
    cdef double g
    for i in range(n - 1, -1, -1):
        for a in range(d):
            da[a] = (dH[i, a] + carry[a]) * (1.0 - H[i + 1, a] * H[i + 1, a])
            nxt[a] = 0.0
        for a in range(d):
            g = da[a]
            db[a] += g
            for j in range(d):
                dW[a, j] += g * H[i, j]
                nxt[j] += W[a, j] * g
            for j in range(din):
                dW[a, d + j] += g * X[i, j]
                dX[i, j] += W[a, d + j] * g
        for a in range(d):
            carry[a] = nxt[a]
    return dX_arr, {"W": dW_arr, "b": db_arr}


def mgu_forward(dict t, X_arr):
    cdef double[:, ::1] X = np.ascontiguousarray(X_arr, dtype=np.float64)
    cdef double[:, ::1] Wf = np.ascontiguousarray(t["W_f"])
    cdef double[::1] bf = np.ascontiguousarray(t["b_f"])
    cdef double[:, ::1] Wc = np.ascontiguousarray(t["W_h"])
    cdef double[::1] bc = np.ascontiguousarray(t["b_h"])
    cdef int n = X.shape[0], din = X.shape[1], d = bf.shape[0]
    H_arr = np.zeros((n + 1, d))
    F_arr = np.empty((n, d))
    Ht_arr = np.empty((n, d))
    cdef double[:, ::1] H = H_arr
    cdef double[:, ::1] F = F_arr
    cdef double[:, ::1] Ht = Ht_arr
    cdef int i, a, j
    cdef double s
    for i in range(n):
        for a in range(d):
            s = bf[a]
            for j in range(d):
                s += Wf[a, j] * H[i, j]
            for j in range(din):
                s += Wf[a, d + j] * X[i, j]
            F[i, a] = _sig(s)
        for a in range(d):
            s = bc[a]
            for j in range(d):
                s += Wc[a, j] * (F[i, j] * H[i, j])
            for j in range(din):
                s += Wc[a, d + j] * X[i, j]
            Ht[i, a] = tanh(s)
        for a in range(d):
            H[i + 1, a] = (1.0 - F[i, a]) * H[i, a] + F[i, a] * Ht[i, a]
    return {"H": H_arr, "X": X_arr, "F": F_arr, "Ht": Ht_arr}


def mgu_backward(dict t, dict cache, dH_arr):
    cdef double[:, ::1] Wf = np.ascontiguousarray(t["W_f"])
    cdef double[:, ::1] Wc = np.ascontiguousarray(t["W_h"])
    cdef double[:, ::1] H = np.ascontiguousarray(cache["H"])
    cdef double[:, ::1] X = np.ascontiguousarray(cache["X"])
    cdef double[:, ::1] F = np.ascontiguousarray(cache["F"])
    cdef double[:, ::1] Ht = np.ascontiguousarray(cache["Ht"])
    cdef double[:, ::1] dH = np.ascontiguousarray(dH_arr, dtype=np.float64)
    cdef int n = X.shape[0], din = X.shape[1], d = H.shape[1]
    dWf_arr = np.zeros((d, d + din))
    dbf_arr = np.zeros(d)
    dWc_arr = np.zeros((d, d + din))
    dbc_arr = np.zeros(d)
    dX_arr = np.zeros((n, din))
    cdef double[:, ::1] dWf = dWf_arr
    cdef double[::1] dbf = dbf_arr
    cdef double[:, ::1] dWc = dWc_arr
    cdef double[::1] dbc = dbc_arr
    cdef double[:, ::1] dX = dX_arr
    scratch = np.zeros((5, d))
    cdef double[:, ::1] sc = scratch
    cdef double[::1] carry = sc[0]
    cdef double[::1] dh = sc[1]
    cdef double[::1] da_c = sc[2]
    cdef double[::1] df = sc[3]
    cdef double[::1] da_f = sc[4]
    cdef int i, a, j
    cdef double g, u
    for i in range(n - 1, -1, -1):
        for a in range(d):
            dh[a] = dH[i, a] + carry[a]
            da_c[a] = dh[a] * F[i, a] * (1.0 - Ht[i, a] * Ht[i, a])
            df[a] = dh[a] * (Ht[i, a] - H[i, a])
            carry[a] = dh[a] * (1.0 - F[i, a])
        for a in range(d):
            g = da_c[a]
            dbc[a] += g
            for j in range(d):
                dWc[a, j] += g * (F[i, j] * H[i, j])
            for j in range(din):
                dWc[a, d + j] += g * X[i, j]
                dX[i, j] += Wc[a, d + j] * g
        # u = Wc[:, :d]^T @ da_c feeds both the gate and the direct path
        for j in range(d):
            u = 0.0
            for a in range(d):
                u += Wc[a, j] * da_c[a]
            df[j] += u * H[i, j]
            carry[j] += u * F[i, j]
        for a in range(d):
            da_f[a] = df[a] * F[i, a] * (1.0 - F[i, a])
        _gate_grads(dWf, dbf, Wf, da_f, H[i], X[i], carry, dX[i], d, din)
    return dX_arr, {"W_f": dWf_arr, "b_f": dbf_arr, "W_h": dWc_arr, "b_h": dbc_arr}


def gru_forward(dict t, X_arr):
    cdef double[:, ::1] X = np.ascontiguousarray(X_arr, dtype=np.float64)
    cdef double[:, ::1] Wz = np.ascontiguousarray(t["W_z"])
    cdef double[::1] bz = np.ascontiguousarray(t["b_z"])
    cdef double[:, ::1] Wr = np.ascontiguousarray(t["W_r"])
    cdef double[::1] br = np.ascontiguousarray(t["b_r"])
    cdef double[:, ::1] Wc = np.ascontiguousarray(t["W_h"])
    cdef double[::1] bc = np.ascontiguousarray(t["b_h"])
    cdef int n = X.shape[0], din = X.shape[1], d = bz.shape[0]
    H_arr = np.zeros((n + 1, d))
    Z_arr = np.empty((n, d))
    R_arr = np.empty((n, d))
    Ht_arr = np.empty((n, d))
    cdef double[:, ::1] H = H_arr
    cdef double[:, ::1] Z = Z_arr
    cdef double[:, ::1] R = R_arr
    cdef double[:, ::1] Ht = Ht_arr
    cdef int i, a, j
    cdef double s, sr
    for i in range(n):
        for a in range(d):
            s = bz[a]
            sr = br[a]
            for j in range(d):
                s += Wz[a, j] * H[i, j]
                sr += Wr[a, j] * H[i, j]
            for j in range(din):
                s += Wz[a, d + j] * X[i, j]
                sr += Wr[a, d + j] * X[i, j]
            Z[i, a] = _sig(s)
            R[i, a] = _sig(sr)
        for a in range(d):
            s = bc[a]
            for j in range(d):
                s += Wc[a, j] * (R[i, j] * H[i, j])
            for j in range(din):
                s += Wc[a, d + j] * X[i, j]
            Ht[i, a] = tanh(s)
        for a in range(d):
            H[i + 1, a] = (1.0 - Z[i, a]) * H[i, a] + Z[i, a] * Ht[i, a]
    return {"H": H_arr, "X": X_arr, "Z": Z_arr, "R": R_arr, "Ht": Ht_arr}


def gru_backward(dict t, dict cache, dH_arr):
    cdef double[:, ::1] Wz = np.ascontiguousarray(t["W_z"])
    cdef double[:, ::1] Wr = np.ascontiguousarray(t["W_r"])
    cdef double[:, ::1] Wc = np.ascontiguousarray(t["W_h"])
    cdef double[:, ::1] H = np.ascontiguousarray(cache["H"])
    cdef double[:, ::1] X = np.ascontiguousarray(cache["X"])
    cdef double[:, ::1] Z = np.ascontiguousarray(cache["Z"])
    cdef double[:, ::1] R = np.ascontiguousarray(cache["R"])
    cdef double[:, ::1] Ht = np.ascontiguousarray(cache["Ht"])
    cdef double[:, ::1] dH = np.ascontiguousarray(dH_arr, dtype=np.float64)
    cdef int n = X.shape[0], din = X.shape[1], d = H.shape[1]
    dWz_arr = np.zeros((d, d + din))
    dbz_arr = np.zeros(d)
    dWr_arr = np.zeros((d, d + din))
    dbr_arr = np.zeros(d)
    dWc_arr = np.zeros((d, d + din))
    dbc_arr = np.zeros(d)
    dX_arr = np.zeros((n, din))
    cdef double[:, ::1] dWz = dWz_arr
    cdef double[::1] dbz = dbz_arr
    cdef double[:, ::1] dWr = dWr_arr
    cdef double[::1] dbr = dbr_arr
    cdef double[:, ::1] dWc = dWc_arr
    cdef double[::1] dbc = dbc_arr
    cdef double[:, ::1] dX = dX_arr
    scratch = np.zeros((6, d))
    cdef double[:, ::1] sc = scratch
    cdef double[::1] carry = sc[0]
    cdef double[::1] dh = sc[1]
    cdef double[::1] da_c = sc[2]
    cdef double[::1] dz = sc[3]
    cdef double[::1] dr = sc[4]
    cdef double[::1] da = sc[5]
    cdef int i, a, j
    cdef double g, u
    for i in range(n - 1, -1, -1):
        for a in range(d):
            dh[a] = dH[i, a] + carry[a]
            da_c[a] = dh[a] * Z[i, a] * (1.0 - Ht[i, a] * Ht[i, a])
            dz[a] = dh[a] * (Ht[i, a] - H[i, a])
            carry[a] = dh[a] * (1.0 - Z[i, a])
        for a in range(d):
            g = da_c[a]
            dbc[a] += g
            for j in range(d):
                dWc[a, j] += g * (R[i, j] * H[i, j])
            for j in range(din):
                dWc[a, d + j] += g * X[i, j]
                dX[i, j] += Wc[a, d + j] * g
        for j in range(d):
            u = 0.0
            for a in range(d):
                u += Wc[a, j] * da_c[a]
            dr[j] = u * H[i, j]
            carry[j] += u * R[i, j]
        for a in range(d):
            da[a] = dz[a] * Z[i, a] * (1.0 - Z[i, a])
        _gate_grads(dWz, dbz, Wz, da, H[i], X[i], carry, dX[i], d, din)
        for a in range(d):
            da[a] = dr[a] * R[i, a] * (1.0 - R[i, a])
        _gate_grads(dWr, dbr, Wr, da, H[i], X[i], carry, dX[i], d, din)
    return dX_arr, {
        "W_z": dWz_arr, "b_z": dbz_arr,
        "W_r": dWr_arr, "b_r": dbr_arr,
        "W_h": dWc_arr, "b_h": dbc_arr,
    }


def lstm_forward(dict t, X_arr):
    cdef double[:, ::1] X = np.ascontiguousarray(X_arr, dtype=np.float64)
    cdef double[:, ::1] Wf = np.ascontiguousarray(t["W_f"])
    cdef double[::1] bf = np.ascontiguousarray(t["b_f"])
    cdef double[:, ::1] Wi = np.ascontiguousarray(t["W_i"])
    cdef double[::1] bi = np.ascontiguousarray(t["b_i"])
    cdef double[:, ::1] Wo = np.ascontiguousarray(t["W_o"])
    cdef double[::1] bo = np.ascontiguousarray(t["b_o"])
    cdef double[:, ::1] Wc = np.ascontiguousarray(t["W_c"])
    cdef double[::1] bc = np.ascontiguousarray(t["b_c"])
    cdef int n = X.shape[0], din = X.shape[1], d = bf.shape[0]
    H_arr = np.zeros((n + 1, d))
    C_arr = np.zeros((n + 1, d))
    F_arr = np.empty((n, d))
    I_arr = np.empty((n, d))
    O_arr = np.empty((n, d))
    Ct_arr = np.empty((n, d))
    TC_arr = np.empty((n, d))
    cdef double[:, ::1] H = H_arr
    cdef double[:, ::1] C = C_arr
    cdef double[:, ::1] F = F_arr
    cdef double[:, ::1] I = I_arr
    cdef double[:, ::1] O = O_arr
    cdef double[:, ::1] Ct = Ct_arr
    cdef double[:, ::1] TC = TC_arr
    cdef int i, a, j
    cdef double sf, si, so, sct
    for i in range(n):
        for a in range(d):
            sf = bf[a]
            si = bi[a]
            so = bo[a]
            sct = bc[a]
            for j in range(d):
                sf += Wf[a, j] * H[i, j]
                si += Wi[a, j] * H[i, j]
                so += Wo[a, j] * H[i, j]
                sct += Wc[a, j] * H[i, j]
            for j in range(din):
                sf += Wf[a, d + j] * X[i, j]
                si += Wi[a, d + j] * X[i, j]
                so += Wo[a, d + j] * X[i, j]
                sct += Wc[a, d + j] * X[i, j]
            F[i, a] = _sig(sf)
            I[i, a] = _sig(si)
            O[i, a] = _sig(so)
            Ct[i, a] = tanh(sct)
            C[i + 1, a] = F[i, a] * C[i, a] + I[i, a] * Ct[i, a]
            TC[i, a] = tanh(C[i + 1, a])
            H[i + 1, a] = O[i, a] * TC[i, a]
    return {
        "H": H_arr, "X": X_arr, "C": C_arr,
        "F": F_arr, "I": I_arr, "O": O_arr, "Ct": Ct_arr, "TC": TC_arr,
    }


def lstm_backward(dict t, dict cache, dH_arr):
    cdef double[:, ::1] Wf = np.ascontiguousarray(t["W_f"])
    cdef double[:, ::1] Wi = np.ascontiguousarray(t["W_i"])
    cdef double[:, ::1] Wo = np.ascontiguousarray(t["W_o"])
    cdef double[:, ::1] Wc = np.ascontiguousarray(t["W_c"])
    cdef double[:, ::1] H = np.ascontiguousarray(cache["H"])
    cdef double[:, ::1] X = np.ascontiguousarray(cache["X"])
    cdef double[:, ::1] C = np.ascontiguousarray(cache["C"])
    cdef double[:, ::1] F = np.ascontiguousarray(cache["F"])
    cdef double[:, ::1] I = np.ascontiguousarray(cache["I"])
    cdef double[:, ::1] O = np.ascontiguousarray(cache["O"])
    cdef double[:, ::1] Ct = np.ascontiguousarray(cache["Ct"])
    cdef double[:, ::1] TC = np.ascontiguousarray(cache["TC"])
    cdef double[:, ::1] dH = np.ascontiguousarray(dH_arr, dtype=np.float64)
    cdef int n = X.shape[0], din = X.shape[1], d = H.shape[1]
    dWf_arr = np.zeros((d, d + din))
    dbf_arr = np.zeros(d)
    dWi_arr = np.zeros((d, d + din))
    dbi_arr = np.zeros(d)
    dWo_arr = np.zeros((d, d + din))
    dbo_arr = np.zeros(d)
    dWc_arr = np.zeros((d, d + din))
    dbc_arr = np.zeros(d)
    dX_arr = np.zeros((n, din))
    cdef double[:, ::1] dWf = dWf_arr
    cdef double[::1] dbf = dbf_arr
    cdef double[:, ::1] dWi = dWi_arr
    cdef double[::1] dbi = dbi_arr
    cdef double[:, ::1] dWo = dWo_arr
    cdef double[::1] dbo = dbo_arr
    cdef double[:, ::1] dWc = dWc_arr
    cdef double[::1] dbc = dbc_arr
    cdef double[:, ::1] dX = dX_arr
    scratch = np.zeros((8, d))
    cdef double[:, ::1] sc = scratch
    cdef double[::1] carry_h = sc[0]
    cdef double[::1] carry_c = sc[1]
    cdef double[::1] dh = sc[2]
    cdef double[::1] dc = sc[3]
    cdef double[::1] da_f = sc[4]
    cdef double[::1] da_i = sc[5]
    cdef double[::1] da_o = sc[6]
    cdef double[::1] da_c = sc[7]
    cdef int i, a
    for i in range(n - 1, -1, -1):
        for a in range(d):
            dh[a] = dH[i, a] + carry_h[a]
            da_o[a] = dh[a] * TC[i, a]
            dc[a] = carry_c[a] + dh[a] * O[i, a] * (1.0 - TC[i, a] * TC[i, a])
            da_f[a] = dc[a] * C[i, a] * F[i, a] * (1.0 - F[i, a])
            da_i[a] = dc[a] * Ct[i, a] * I[i, a] * (1.0 - I[i, a])
            da_o[a] = da_o[a] * O[i, a] * (1.0 - O[i, a])
            da_c[a] = dc[a] * I[i, a] * (1.0 - Ct[i, a] * Ct[i, a])
            carry_c[a] = dc[a] * F[i, a]
            carry_h[a] = 0.0
        _gate_grads(dWf, dbf, Wf, da_f, H[i], X[i], carry_h, dX[i], d, din)
        _gate_grads(dWi, dbi, Wi, da_i, H[i], X[i], carry_h, dX[i], d, din)
        _gate_grads(dWo, dbo, Wo, da_o, H[i], X[i], carry_h, dX[i], d, din)
        _gate_grads(dWc, dbc, Wc, da_c, H[i], X[i], carry_h, dX[i], d, din)
    return dX_arr, {
        "W_f": dWf_arr, "b_f": dbf_arr,
        "W_i": dWi_arr, "b_i": dbi_arr,
        "W_o": dWo_arr, "b_o": dbo_arr,
        "W_c": dWc_arr, "b_c": dbc_arr,
    }


_FORWARD = {"srn": srn_forward, "mgu": mgu_forward, "gru": gru_forward, "lstm": lstm_forward}
_BACKWARD = {"srn": srn_backward, "mgu": mgu_backward, "gru": gru_backward, "lstm": lstm_backward}


def layer_forward(kind, tensors, X):
    return _FORWARD[kind](tensors, X)


def layer_backward(kind, tensors, cache, dH):
    return _BACKWARD[kind](tensors, cache, dH)
