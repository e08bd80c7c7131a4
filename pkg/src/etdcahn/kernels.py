"""Kernel backend selection: compiled stencils with a numpy fallback.

The compiled extension is optional; when it is missing (no compiler at
install time) the numpy reference implementation is used. Selection happens
at import and can be forced with the environment variable ETDCAHN_KERNELS
set to "cython" or "numpy", or at runtime through :func:`use`.
"""

import os
import warnings

import numpy as np

from . import _stencils_np

try:
    from . import _stencils as _compiled

    HAVE_COMPILED = True
except ImportError:
    _compiled = None
    HAVE_COMPILED = False

_active = None


def use(name: str) -> str:
    """Select a backend by name ("auto", "cython", "numpy"). Returns the
    name of the backend actually in effect."""
    global _active
    if name == "numpy":
        _active = "numpy"
    elif name == "cython":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled stencil extension is not available")
        _active = "cython"
    elif name == "auto":
        _active = "cython" if HAVE_COMPILED else "numpy"
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    return _active


def backend_name() -> str:
    return _active


_env = os.environ.get("ETDCAHN_KERNELS", "auto")
try:
    use(_env)
except (RuntimeError, ValueError):
    warnings.warn(
        f"ETDCAHN_KERNELS={_env!r} not usable, falling back to numpy kernels",
        stacklevel=1,
    )
    use("numpy")


def stabilized_apply(padded, mob, vp, vn, eps2, kappa, inv_h2, inv_h):
    """Fused eps2*mob*D_h + upwind - kappa*I applied to a ghost-padded array."""
    if _active == "cython":
        ndim = padded.ndim
        out = np.empty(mob.shape)
        if ndim == 1:
            _compiled.stab1(padded, mob, vp[0], vn[0], eps2, kappa,
                            inv_h2[0], inv_h[0], out)
        elif ndim == 2:
            _compiled.stab2(padded, mob, vp[0], vn[0], vp[1], vn[1], eps2,
                            kappa, inv_h2[0], inv_h2[1], inv_h[0], inv_h[1],
                            out)
        else:
            _compiled.stab3(padded, mob, vp[0], vn[0], vp[1], vn[1], vp[2],
                            vn[2], eps2, kappa, inv_h2[0], inv_h2[1],
                            inv_h2[2], inv_h[0], inv_h[1], inv_h[2], out)
        return out
    return _stencils_np.stabilized_apply(padded, mob, vp, vn, eps2, kappa,
                                         inv_h2, inv_h)


laplacian_apply = _stencils_np.laplacian_apply
upwind_apply = _stencils_np.upwind_apply
