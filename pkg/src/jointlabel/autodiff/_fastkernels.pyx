# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled recurrent-sequence kernels.

Mirrors ``_purekernels`` exactly: the large input/output projections stay in
numpy (BLAS); only the sequential per-timestep recurrence runs as C loops.
Gate layout along the last axis is [input, forget, output, candidate].
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sig(double v) nogil:
    return 1.0 / (1.0 + exp(-v))


def lstm_forward(x, w, u, b):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t H = u.shape[0]
    pre_arr = x @ w + b
    gates_arr = np.empty((T, 4 * H))
    c_arr = np.empty((T, H))
    tanh_c_arr = np.empty((T, H))
    h_arr = np.empty((T, H))

    cdef double[:, ::1] pre = pre_arr
    cdef double[:, ::1] uu = u
    cdef double[:, ::1] gates = gates_arr
    cdef double[:, ::1] c_seq = c_arr
    cdef double[:, ::1] tanh_c = tanh_c_arr
    cdef double[:, ::1] h = h_arr
    cdef Py_ssize_t t, j, k
    cdef double gi, gf, go, gc, c, tc, hk

    with nogil:
        for t in range(T):
            if t > 0:
                for k in range(H):
                    hk = h[t - 1, k]
                    if hk != 0.0:
                        for j in range(4 * H):
                            pre[t, j] += hk * uu[k, j]
            for j in range(H):
                gi = _sig(pre[t, j])
                gf = _sig(pre[t, H + j])
                go = _sig(pre[t, 2 * H + j])
                gc = tanh(pre[t, 3 * H + j])
                if t > 0:
                    c = gf * c_seq[t - 1, j] + gi * gc
                else:
                    c = gi * gc
                tc = tanh(c)
                gates[t, j] = gi
                gates[t, H + j] = gf
                gates[t, 2 * H + j] = go
                gates[t, 3 * H + j] = gc
                c_seq[t, j] = c
                tanh_c[t, j] = tc
                h[t, j] = go * tc
    return h_arr, (gates_arr, c_arr, tanh_c_arr, h_arr)


def lstm_backward(dh, x, w, u, b, cache):
    gates_arr, c_arr, tanh_c_arr, h_arr = cache
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t H = u.shape[0]
    dpre_arr = np.empty((T, 4 * H))
    dh_carry_arr = np.zeros(H)
    dc_carry_arr = np.zeros(H)

    cdef double[:, ::1] dpre = dpre_arr
    cdef double[:, ::1] dho = dh
    cdef double[:, ::1] uu = u
    cdef double[:, ::1] gates = gates_arr
    cdef double[:, ::1] c_seq = c_arr
    cdef double[:, ::1] tanh_c = tanh_c_arr
    cdef double[::1] dh_carry = dh_carry_arr
    cdef double[::1] dc_carry = dc_carry_arr
    cdef Py_ssize_t t, j, k
    cdef double gi, gf, go, gc, tc, c_prev, dht, do, dc, s

    with nogil:
        for t in range(T - 1, -1, -1):
            for j in range(H):
                gi = gates[t, j]
                gf = gates[t, H + j]
                go = gates[t, 2 * H + j]
                gc = gates[t, 3 * H + j]
                tc = tanh_c[t, j]
                c_prev = c_seq[t - 1, j] if t > 0 else 0.0
                dht = dho[t, j] + dh_carry[j]
                do = dht * tc
                dc = dht * go * (1.0 - tc * tc) + dc_carry[j]
                dc_carry[j] = dc * gf
                dpre[t, j] = dc * gc * gi * (1.0 - gi)
                dpre[t, H + j] = dc * c_prev * gf * (1.0 - gf)
                dpre[t, 2 * H + j] = do * go * (1.0 - go)
                dpre[t, 3 * H + j] = dc * gi * (1.0 - gc * gc)
            for k in range(H):
                s = 0.0
                for j in range(4 * H):
                    s += uu[k, j] * dpre[t, j]
                dh_carry[k] = s
    dx = dpre_arr @ w.T
    dw = x.T @ dpre_arr
    du = h_arr[:-1].T @ dpre_arr[1:]
    db = dpre_arr.sum(axis=0)
    return dx, dw, du, db
