# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled fused LSTM gate kernels.

Must match ``_numpy_ref`` to floating-point noise; the pure-Python module is
the reference. Single-threaded on purpose: accumulation order is part of the
determinism contract.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()

BACKEND_NAME = "compiled"


cdef inline double _sigmoid(double x) nogil:
    # Two-branch form, stable for large |x|.
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    cdef double e = exp(x)
    return e / (1.0 + e)


def lstm_gates_forward(double[:, ::1] pre, double[:, ::1] c_prev):
    cdef Py_ssize_t bsz = pre.shape[0]
    cdef Py_ssize_t hdim = c_prev.shape[1]
    h_arr = np.empty((bsz, hdim))
    c_arr = np.empty((bsz, hdim))
    i_arr = np.empty((bsz, hdim))
    f_arr = np.empty((bsz, hdim))
    g_arr = np.empty((bsz, hdim))
    o_arr = np.empty((bsz, hdim))
    tc_arr = np.empty((bsz, hdim))
    cdef double[:, ::1] h = h_arr, c = c_arr, gi = i_arr, gf = f_arr
    cdef double[:, ::1] gg = g_arr, go = o_arr, tc = tc_arr
    cdef Py_ssize_t b, j
    cdef double vi, vf, vg, vo, vc, vtc
    with nogil:
        for b in range(bsz):
            for j in range(hdim):
                vi = _sigmoid(pre[b, j])
                vf = _sigmoid(pre[b, hdim + j])
                vg = tanh(pre[b, 2 * hdim + j])
                vo = _sigmoid(pre[b, 3 * hdim + j])
                vc = vf * c_prev[b, j] + vi * vg
                vtc = tanh(vc)
                gi[b, j] = vi
                gf[b, j] = vf
                gg[b, j] = vg
                go[b, j] = vo
                c[b, j] = vc
                tc[b, j] = vtc
                h[b, j] = vo * vtc
    return h_arr, c_arr, i_arr, f_arr, g_arr, o_arr, tc_arr


def lstm_gates_backward(double[:, ::1] dh, double[:, ::1] dc_out,
                        double[:, ::1] gi, double[:, ::1] gf,
                        double[:, ::1] gg, double[:, ::1] go,
                        double[:, ::1] tc, double[:, ::1] c_prev):
    cdef Py_ssize_t bsz = dh.shape[0]
    cdef Py_ssize_t hdim = dh.shape[1]
    dpre_arr = np.empty((bsz, 4 * hdim))
    dcp_arr = np.empty((bsz, hdim))
    cdef double[:, ::1] dpre = dpre_arr, dcp = dcp_arr
    cdef Py_ssize_t b, j
    cdef double dc, vi, vf, vg, vo, vtc
    with nogil:
        for b in range(bsz):
            for j in range(hdim):
                vi = gi[b, j]
                vf = gf[b, j]
                vg = gg[b, j]
                vo = go[b, j]
                vtc = tc[b, j]
                dc = dc_out[b, j] + dh[b, j] * vo * (1.0 - vtc * vtc)
                dpre[b, j] = dc * vg * vi * (1.0 - vi)
                dpre[b, hdim + j] = dc * c_prev[b, j] * vf * (1.0 - vf)
                dpre[b, 2 * hdim + j] = dc * vi * (1.0 - vg * vg)
                dpre[b, 3 * hdim + j] = dh[b, j] * vtc * vo * (1.0 - vo)
                dcp[b, j] = dc * vf
    return dpre_arr, dcp_arr
