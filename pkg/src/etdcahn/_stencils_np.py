"""Numpy reference kernels for the fused stabilized stencil.

All kernels take a ghost-padded input array (one layer per side, filled by
the caller according to the boundary condition: wrap, reflect, or zero) and
per-node mobility and split velocity arrays of the unpadded lattice shape.
The split velocities are vp = max(v, 0) and vn = min(v, 0) per axis, which
encode the upwind choice without branching:

    conv = (vp*(w[i-1] - w[i]) + vn*(w[i] - w[i+1])) / h

The accumulation order (axis 0, 1, 2; laplacian scaled once at the end) is
fixed so the compiled backend produces the same arithmetic.
"""

import numpy as np


def _core(padded, ndim):
    return padded[(slice(1, -1),) * ndim]


def _shift(padded, ndim, axis, off):
    idx = [slice(1, -1)] * ndim
    idx[axis] = slice(1 + off, padded.shape[axis] - 1 + off)
    return padded[tuple(idx)]


def stabilized_apply(padded, mob, vp, vn, eps2, kappa, inv_h2, inv_h):
    """eps2 * mob * D_h w + upwind(w) - kappa * w on the unpadded lattice."""
    ndim = padded.ndim
    w = _core(padded, ndim)
    lap = np.zeros_like(w)
    conv = np.zeros_like(w)
    for ax in range(ndim):
        wm = _shift(padded, ndim, ax, -1)
        wp = _shift(padded, ndim, ax, +1)
        lap += (wm - 2.0 * w + wp) * inv_h2[ax]
        conv += (vp[ax] * (wm - w) + vn[ax] * (w - wp)) * inv_h[ax]
    return eps2 * mob * lap + conv - kappa * w


def laplacian_apply(padded, inv_h2):
    """Plain D_h w (no mobility, no eps^2) on the unpadded lattice."""
    ndim = padded.ndim
    w = _core(padded, ndim)
    lap = np.zeros_like(w)
    for ax in range(ndim):
        wm = _shift(padded, ndim, ax, -1)
        wp = _shift(padded, ndim, ax, +1)
        lap += (wm - 2.0 * w + wp) * inv_h2[ax]
    return lap


def upwind_apply(padded, vp, vn, inv_h):
    """Lambda_v A_v w on the unpadded lattice."""
    ndim = padded.ndim
    w = _core(padded, ndim)
    conv = np.zeros_like(w)
    for ax in range(ndim):
        wm = _shift(padded, ndim, ax, -1)
        wp = _shift(padded, ndim, ax, +1)
        conv += (vp[ax] * (wm - w) + vn[ax] * (w - wp)) * inv_h[ax]
    return conv
