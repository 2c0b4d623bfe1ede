"""Independent reference computations used by the tests.

Nothing here calls into glvortex; each oracle rebuilds its quantity from the
defining formulas with a different discretization or algorithm.
"""

import math

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def fd_profile(R, n, iters=50):
    """F'' + F'/r - F/r^2 + (1 - F^2) F = 0, F(0) = 0, F(R) = 1 by centred FD + Newton."""
    r = np.linspace(0.0, R, n + 1)
    h = R / n
    ri = r[1:-1]
    F = np.tanh(r)
    F[-1] = 1.0
    lo = 1.0 / h**2 - 1.0 / (2 * h * ri)
    up = 1.0 / h**2 + 1.0 / (2 * h * ri)
    for _ in range(iters):
        Fi = F[1:-1]
        res = lo * F[:-2] + up * F[2:] - 2 * Fi / h**2 - Fi / ri**2 + (1 - Fi**2) * Fi
        diag = -2 / h**2 - 1 / ri**2 + 1 - 3 * Fi**2
        J = sp.diags([lo[1:], diag, up[:-1]], [-1, 0, 1], format="csc")
        dF = spla.spsolve(J, -res)
        F[1:-1] += dF
        if np.max(np.abs(dF)) < 1e-14:
            break
    return r, F


def mode1_dense(x, f, lam, beta):
    """Dense (H, W) of the finite-volume mode-1 form on nodes x (uniform, x[0] = 0, x[-1] = 1).

    Unknowns: a0 at nodes 0..N-1, a2 at nodes 1..N-1 (both vanish at x = 1, a2 at 0).
    """
    N = len(x) - 1
    h = x[1] - x[0]
    xm = 0.5 * (x[1:] + x[:-1])
    w = x * h
    w[0] = h * h / 8
    # gradient matrix on nodes 0..N
    G = np.zeros((N + 1, N + 1))
    for i in range(N):
        c = xm[i] / h
        G[i, i] += c
        G[i + 1, i + 1] += c
        G[i, i + 1] -= c
        G[i + 1, i] -= c
    i0 = np.arange(0, N)
    i2 = np.arange(1, N)
    n0, n2 = len(i0), len(i2)
    H = np.zeros((n0 + n2, n0 + n2))
    H[:n0, :n0] = G[np.ix_(i0, i0)]
    H[n0:, n0:] = G[np.ix_(i2, i2)]
    V0 = lam * (f**2 - 1) + beta * lam * f**2
    V2 = np.zeros_like(x)
    V2[1:] = 4.0 / x[1:] ** 2
    V2 = V2 + V0
    H[:n0, :n0] += np.diag(w[i0] * V0[i0])
    H[n0:, n0:] += np.diag(w[i2] * V2[i2])
    # cross term -2 beta lam f^2 a0 a2 (half on each side)
    cross = -beta * lam * w * f**2
    for k, node in enumerate(i2):
        H[node, n0 + k] += cross[node]
        H[n0 + k, node] += cross[node]
    W = np.concatenate([w[i0], w[i2]])
    return H, W


def lowest_generalized(H, W, k=1):
    return sla.eigh(H, np.diag(W), eigvals_only=True, subset_by_index=(0, k - 1))




def dense_spectrum(H, w):
    """All eigenvalues of H v = mu diag(w) v for a sparse symmetric H."""
    A = H.toarray() if sp.issparse(H) else H
    s = 1.0 / np.sqrt(w)
    return np.linalg.eigvalsh(A * s[:, None] * s[None, :])


def quartic_min_brute(p, lo=-5.0, hi=5.0, n=200001):
    t = np.linspace(lo, hi, n)
    v = np.polyval(p[::-1], t)
    return t[np.argmin(v)]


def winding_number(values):
    """Winding number of a closed loop of complex samples."""
    d = np.angle(np.roll(values, -1) / values)
    return int(round(np.sum(d) / (2 * math.pi)))
