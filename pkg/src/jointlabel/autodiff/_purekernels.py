"""Pure-numpy fallback for the fused recurrent-sequence kernels.

Semantics are identical to the compiled extension in ``_fastkernels.pyx``;
only the per-timestep loop runs in Python here. Gate layout along the last
axis is [input, forget, output, candidate], each of width H.
"""

import numpy as np


def _sigmoid(x):
    # exp underflow/overflow saturates cleanly to 1.0 / 0.0 in float64
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def lstm_forward(x, w, u, b):
    """Run a gated recurrence over the rows of ``x``.

    x: (T, D), w: (D, 4H), u: (H, 4H), b: (4H,), all float64.
    Returns (h, cache) where h is (T, H) and cache holds the per-step
    activations needed by :func:`lstm_backward`.
    """
    T = x.shape[0]
    H = u.shape[0]
    pre = x @ w + b
    gates = np.empty((T, 4 * H))
    c_seq = np.empty((T, H))
    tanh_c = np.empty((T, H))
    h = np.empty((T, H))
    h_prev = np.zeros(H)
    c_prev = np.zeros(H)
    for t in range(T):
        p = pre[t] + h_prev @ u
        gi = _sigmoid(p[:H])
        gf = _sigmoid(p[H:2 * H])
        go = _sigmoid(p[2 * H:3 * H])
        gc = np.tanh(p[3 * H:])
        c = gf * c_prev + gi * gc
        tc = np.tanh(c)
        gates[t, :H] = gi
        gates[t, H:2 * H] = gf
        gates[t, 2 * H:3 * H] = go
        gates[t, 3 * H:] = gc
        c_seq[t] = c
        tanh_c[t] = tc
        h[t] = go * tc
        h_prev = h[t]
        c_prev = c
    return h, (gates, c_seq, tanh_c, h)


def lstm_backward(dh, x, w, u, b, cache):
    """Backpropagate through :func:`lstm_forward`.

    dh: (T, H) gradient w.r.t. the returned h. Returns (dx, dw, du, db).
    """
    gates, c_seq, tanh_c, h = cache
    T = x.shape[0]
    H = u.shape[0]
    dpre = np.empty((T, 4 * H))
    dh_carry = np.zeros(H)
    dc_carry = np.zeros(H)
    for t in range(T - 1, -1, -1):
        gi = gates[t, :H]
        gf = gates[t, H:2 * H]
        go = gates[t, 2 * H:3 * H]
        gc = gates[t, 3 * H:]
        tc = tanh_c[t]
        c_prev = c_seq[t - 1] if t > 0 else 0.0
        dht = dh[t] + dh_carry
        do = dht * tc
        dc = dht * go * (1.0 - tc * tc) + dc_carry
        dc_carry = dc * gf
        dpre[t, :H] = dc * gc * gi * (1.0 - gi)
        dpre[t, H:2 * H] = dc * c_prev * gf * (1.0 - gf)
        dpre[t, 2 * H:3 * H] = do * go * (1.0 - go)
        dpre[t, 3 * H:] = dc * gi * (1.0 - gc * gc)
        dh_carry = u @ dpre[t]
    dx = dpre @ w.T
    dw = x.T @ dpre
    du = h[:-1].T @ dpre[1:]
    db = dpre.sum(axis=0)
    return dx, dw, du, db
