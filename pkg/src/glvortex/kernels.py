"""Backend selection for the polar-grid kernels.

The compiled extension is used when it imports; setting GLVORTEX_PURE=1
forces the numpy implementation.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("GLVORTEX_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def _check(psi, a, c, w=None):
    nr = psi.shape[0]
    if psi.ndim != 2 or len(a) != nr - 1 or len(c) != nr or (w is not None and len(w) != nr):
        raise ValueError("kernel arrays have inconsistent shapes")


def stiffness_apply(psi, a, c):
    _check(np.asarray(psi), a, c)
    return _impl.stiffness_apply(np.ascontiguousarray(psi, dtype=np.complex128), a, c)


def energy_gradient(pp, pm, a, c, w, lam, beta):
    pp, pm = np.asarray(pp), np.asarray(pm)
    if pp.shape != pm.shape:
        raise ValueError("components must share a shape")
    _check(pp, a, c, w)
    return _impl.energy_gradient(
        np.ascontiguousarray(pp, dtype=np.complex128),
        np.ascontiguousarray(pm, dtype=np.complex128),
        a, c, w, float(lam), float(beta),
    )


def tridiag_solve(sub, diag, rhs):
    if np.shape(diag) != np.shape(rhs) or len(sub) != np.shape(diag)[1] - 1:
        raise ValueError("tridiagonal arrays have inconsistent shapes")
    return _impl.tridiag_solve(
        np.ascontiguousarray(sub, dtype=np.float64),
        np.ascontiguousarray(diag, dtype=np.float64),
        np.ascontiguousarray(rhs, dtype=np.complex128),
    )
