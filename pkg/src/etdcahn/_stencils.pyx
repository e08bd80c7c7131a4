# cython: boundscheck=False, wraparound=False, cdivision=True
"""Fused stabilized-stencil kernels on ghost-padded lattices.

Each function mirrors the arithmetic of the numpy reference in
_stencils_np.stabilized_apply exactly: laplacian accumulated axis by axis,
scaled once by eps2 * mob, plus the split-velocity upwind term, minus
kappa * w. The caller fills the ghost layer (wrap/reflect/zero), so no
boundary branches appear here.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def stab1(double[::1] padded, double[::1] mob, double[::1] vp, double[::1] vn,
          double eps2, double kappa, double ih2, double ih,
          double[::1] out):
    cdef Py_ssize_t i, n = mob.shape[0]
    cdef double w, lap, conv
    for i in range(n):
        w = padded[i + 1]
        lap = (padded[i] - 2.0 * w + padded[i + 2]) * ih2
        conv = (vp[i] * (padded[i] - w) + vn[i] * (w - padded[i + 2])) * ih
        out[i] = eps2 * mob[i] * lap + conv - kappa * w


def stab2(double[:, ::1] padded, double[:, ::1] mob,
          double[:, ::1] vp0, double[:, ::1] vn0,
          double[:, ::1] vp1, double[:, ::1] vn1,
          double eps2, double kappa,
          double ih2_0, double ih2_1, double ih_0, double ih_1,
          double[:, ::1] out):
    cdef Py_ssize_t i, j, n0 = mob.shape[0], n1 = mob.shape[1]
    cdef double w, wm, wp, lap, conv
    for i in range(n0):
        for j in range(n1):
            w = padded[i + 1, j + 1]
            wm = padded[i, j + 1]
            wp = padded[i + 2, j + 1]
            lap = (wm - 2.0 * w + wp) * ih2_0
            conv = (vp0[i, j] * (wm - w) + vn0[i, j] * (w - wp)) * ih_0
            wm = padded[i + 1, j]
            wp = padded[i + 1, j + 2]
            lap += (wm - 2.0 * w + wp) * ih2_1
            conv += (vp1[i, j] * (wm - w) + vn1[i, j] * (w - wp)) * ih_1
            out[i, j] = eps2 * mob[i, j] * lap + conv - kappa * w


def stab3(double[:, :, ::1] padded, double[:, :, ::1] mob,
          double[:, :, ::1] vp0, double[:, :, ::1] vn0,
          double[:, :, ::1] vp1, double[:, :, ::1] vn1,
          double[:, :, ::1] vp2, double[:, :, ::1] vn2,
          double eps2, double kappa,
          double ih2_0, double ih2_1, double ih2_2,
          double ih_0, double ih_1, double ih_2,
          double[:, :, ::1] out):
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t n0 = mob.shape[0], n1 = mob.shape[1], n2 = mob.shape[2]
    cdef double w, wm, wp, lap, conv
    for i in range(n0):
        for j in range(n1):
            for k in range(n2):
                w = padded[i + 1, j + 1, k + 1]
                wm = padded[i, j + 1, k + 1]
                wp = padded[i + 2, j + 1, k + 1]
                lap = (wm - 2.0 * w + wp) * ih2_0
                conv = (vp0[i, j, k] * (wm - w) + vn0[i, j, k] * (w - wp)) * ih_0
                wm = padded[i + 1, j, k + 1]
                wp = padded[i + 1, j + 2, k + 1]
                lap += (wm - 2.0 * w + wp) * ih2_1
                conv += (vp1[i, j, k] * (wm - w) + vn1[i, j, k] * (w - wp)) * ih_1
                wm = padded[i + 1, j + 1, k]
                wp = padded[i + 1, j + 1, k + 2]
                lap += (wm - 2.0 * w + wp) * ih2_2
                conv += (vp2[i, j, k] * (wm - w) + vn2[i, j, k] * (w - wp)) * ih_2
                out[i, j, k] = eps2 * mob[i, j, k] * lap + conv - kappa * w
