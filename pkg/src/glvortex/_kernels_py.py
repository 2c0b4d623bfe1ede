"""Pure numpy versions of the polar-grid kernels."""

import numpy as np


def stiffness_apply(psi, a, c):
    """K psi for the five-point polar stencil.

    psi has shape (n_r, n_theta); a[j] couples rings j and j+1, c[j] couples
    angular neighbours on ring j. 0.5 * Re <psi, K psi> is the Dirichlet energy.
    """
    psi = np.asarray(psi)
    out = c[:, None] * (2.0 * psi - np.roll(psi, 1, axis=1) - np.roll(psi, -1, axis=1))
    flux = a[:, None] * (psi[1:] - psi[:-1])
    out[:-1] -= flux
    out[1:] += flux
    return out


def energy_gradient(pp, pm, a, c, w, lam, beta):
    """Energy terms and the real-coordinate gradient of the two-component energy.

    Returns (dirichlet, iso, spin, gp, gm) where gp = dE/dRe psi_+ + i dE/dIm psi_+.
    """
    Kp = stiffness_apply(pp, a, c)
    Km = stiffness_apply(pm, a, c)
    dirichlet = 0.5 * float(np.sum((pp.conj() * Kp).real) + np.sum((pm.conj() * Km).real))
    rp = pp.real**2 + pp.imag**2
    rm = pm.real**2 + pm.imag**2
    s = rp + rm - 1.0
    d = rp - rm
    W = w[:, None]
    iso = 0.25 * lam * float(np.sum(W * s * s))
    spin = 0.25 * lam * beta * float(np.sum(W * d * d))
    gp = Kp + (lam * W * (s + beta * d)) * pp
    gm = Km + (lam * W * (s - beta * d)) * pm
    return dirichlet, iso, spin, gp, gm


def tridiag_solve(sub, diag, rhs):
    """Solve symmetric tridiagonal systems, one per row of ``diag``.

    sub has shape (n-1,) and is shared; diag has shape (m, n); rhs (m, n) complex.
    """
    m, n = diag.shape
    cp = np.empty((m, n))
    x = np.empty(rhs.shape, dtype=np.result_type(rhs, np.float64))
    beta = diag[:, 0].copy()
    x[:, 0] = rhs[:, 0] / beta
    for j in range(1, n):
        cp[:, j - 1] = sub[j - 1] / beta
        beta = diag[:, j] - sub[j - 1] * cp[:, j - 1]
        x[:, j] = (rhs[:, j] - sub[j - 1] * x[:, j - 1]) / beta
    for j in range(n - 2, -1, -1):
        x[:, j] -= cp[:, j] * x[:, j + 1]
    return x
