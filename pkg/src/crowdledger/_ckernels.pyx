# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel core: conv1d and LSTM forward/backward over float64.

Call-compatible with crowdledger.neural.kernels_numpy; the backend selector
prefers this module when it is built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double z) nogil:
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    cdef double e = exp(z)
    return e / (1.0 + e)


def conv1d_forward(x, w, b):
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, :, ::1] xv = x
    cdef double[:, :, ::1] wv = w
    cdef double[::1] bv = b
    cdef Py_ssize_t nb = xv.shape[0], nt = xv.shape[1], ci = xv.shape[2]
    cdef Py_ssize_t co = wv.shape[0], k = wv.shape[1]
    cdef Py_ssize_t to = nt - k + 1
    y = np.zeros((nb, to, co))
    cdef double[:, :, ::1] yv = y
    cdef Py_ssize_t n, t, o, j, c
    cdef double acc
    with nogil:
        for n in range(nb):
            for t in range(to):
                for o in range(co):
                    acc = bv[o]
                    for j in range(k):
                        for c in range(ci):
                            acc += xv[n, t + j, c] * wv[o, j, c]
                    yv[n, t, o] = acc
    return y


def conv1d_backward(x, w, dy):
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    dy = np.ascontiguousarray(dy, dtype=np.float64)
    cdef double[:, :, ::1] xv = x
    cdef double[:, :, ::1] wv = w
    cdef double[:, :, ::1] dyv = dy
    cdef Py_ssize_t nb = xv.shape[0], nt = xv.shape[1], ci = xv.shape[2]
    cdef Py_ssize_t co = wv.shape[0], k = wv.shape[1]
    cdef Py_ssize_t to = dyv.shape[1]
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    db = np.zeros(co)
    cdef double[:, :, ::1] dxv = dx
    cdef double[:, :, ::1] dwv = dw
    cdef double[::1] dbv = db
    cdef Py_ssize_t n, t, o, j, c
    cdef double g
    with nogil:
        for n in range(nb):
            for t in range(to):
                for o in range(co):
                    g = dyv[n, t, o]
                    dbv[o] += g
                    for j in range(k):
                        for c in range(ci):
                            dxv[n, t + j, c] += g * wv[o, j, c]
                            dwv[o, j, c] += g * xv[n, t + j, c]
    return dx, dw, db


def lstm_forward(x, wx, wh, b):
    x = np.ascontiguousarray(x, dtype=np.float64)
    wx = np.ascontiguousarray(wx, dtype=np.float64)
    wh = np.ascontiguousarray(wh, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, :, ::1] xv = x
    cdef double[:, ::1] wxv = wx
    cdef double[:, ::1] whv = wh
    cdef double[::1] bv = b
    cdef Py_ssize_t nb = xv.shape[0], nt = xv.shape[1], nd = xv.shape[2]
    cdef Py_ssize_t nh = whv.shape[0]
    h = np.zeros((nb, nt, nh))
    c = np.zeros((nb, nt, nh))
    gates = np.zeros((nb, nt, 4 * nh))
    z = np.zeros(4 * nh)
    cdef double[:, :, ::1] hv = h
    cdef double[:, :, ::1] cv = c
    cdef double[:, :, ::1] gv = gates
    cdef double[::1] zv = z
    cdef Py_ssize_t n, t, d, j, q
    cdef double xd, hq, ig, fg, gg, og, cj, cprev
    with nogil:
        for n in range(nb):
            for t in range(nt):
                for j in range(4 * nh):
                    zv[j] = bv[j]
                for d in range(nd):
                    xd = xv[n, t, d]
                    for j in range(4 * nh):
                        zv[j] += xd * wxv[d, j]
                if t > 0:
                    for q in range(nh):
                        hq = hv[n, t - 1, q]
                        for j in range(4 * nh):
                            zv[j] += hq * whv[q, j]
                for j in range(nh):
                    ig = _sigmoid(zv[j])
                    fg = _sigmoid(zv[nh + j])
                    gg = tanh(zv[2 * nh + j])
                    og = _sigmoid(zv[3 * nh + j])
                    cprev = cv[n, t - 1, j] if t > 0 else 0.0
                    cj = fg * cprev + ig * gg
                    gv[n, t, j] = ig
                    gv[n, t, nh + j] = fg
                    gv[n, t, 2 * nh + j] = gg
                    gv[n, t, 3 * nh + j] = og
                    cv[n, t, j] = cj
                    hv[n, t, j] = og * tanh(cj)
    return h, c, gates


def lstm_backward(x, wx, wh, h, c, gates, dh_out):
    x = np.ascontiguousarray(x, dtype=np.float64)
    wx = np.ascontiguousarray(wx, dtype=np.float64)
    wh = np.ascontiguousarray(wh, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    gates = np.ascontiguousarray(gates, dtype=np.float64)
    dh_out = np.ascontiguousarray(dh_out, dtype=np.float64)
    cdef double[:, :, ::1] xv = x
    cdef double[:, ::1] wxv = wx
    cdef double[:, ::1] whv = wh
    cdef double[:, :, ::1] hv = h
    cdef double[:, :, ::1] cv = c
    cdef double[:, :, ::1] gv = gates
    cdef double[:, :, ::1] dhov = dh_out
    cdef Py_ssize_t nb = xv.shape[0], nt = xv.shape[1], nd = xv.shape[2]
    cdef Py_ssize_t nh = whv.shape[0]
    dx = np.zeros_like(x)
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * nh)
    dh_next = np.zeros(nh)
    dc_next = np.zeros(nh)
    dz = np.zeros(4 * nh)
    cdef double[:, :, ::1] dxv = dx
    cdef double[:, ::1] dwxv = dwx
    cdef double[:, ::1] dwhv = dwh
    cdef double[::1] dbv = db
    cdef double[::1] dhn = dh_next
    cdef double[::1] dcn = dc_next
    cdef double[::1] dzv = dz
    cdef Py_ssize_t n, t, d, j, q
    cdef double ig, fg, gg, og, tc, dh_j, dc_j, cprev, acc
    with nogil:
        for n in range(nb):
            for j in range(nh):
                dhn[j] = 0.0
                dcn[j] = 0.0
            for t in range(nt - 1, -1, -1):
                for j in range(nh):
                    ig = gv[n, t, j]
                    fg = gv[n, t, nh + j]
                    gg = gv[n, t, 2 * nh + j]
                    og = gv[n, t, 3 * nh + j]
                    tc = tanh(cv[n, t, j])
                    dh_j = dhov[n, t, j] + dhn[j]
                    dc_j = dh_j * og * (1.0 - tc * tc) + dcn[j]
                    cprev = cv[n, t - 1, j] if t > 0 else 0.0
                    dzv[j] = dc_j * gg * ig * (1.0 - ig)
                    dzv[nh + j] = dc_j * cprev * fg * (1.0 - fg)
                    dzv[2 * nh + j] = dc_j * ig * (1.0 - gg * gg)
                    dzv[3 * nh + j] = dh_j * tc * og * (1.0 - og)
                    dcn[j] = dc_j * fg
                for d in range(nd):
                    acc = 0.0
                    for j in range(4 * nh):
                        acc += dzv[j] * wxv[d, j]
                        dwxv[d, j] += xv[n, t, d] * dzv[j]
                    dxv[n, t, d] = acc
                for q in range(nh):
                    acc = 0.0
                    for j in range(4 * nh):
                        acc += dzv[j] * whv[q, j]
                        if t > 0:
                            dwhv[q, j] += hv[n, t - 1, q] * dzv[j]
                    dhn[q] = acc
                for j in range(4 * nh):
                    dbv[j] += dzv[j]
    return dx, dwx, dwh, db
