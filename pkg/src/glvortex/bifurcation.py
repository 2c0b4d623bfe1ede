"""Full 2D linearization about U_lam and the symmetry-breaking branch.

Perturbations live on the interior nodes of the polar grid and are stored as
real vectors ordered (Re phi_+, Im phi_+, Re phi_-, Im phi_-), each block in
ring-major order. The discrete L is W^{-1} H with H the exact Hessian of the
discrete energy, so <L u, v>_W = u^T H v is symmetric by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import field2d as f2
from .field2d import DiskField, DiskGrid

__all__ = [
    "LinearizedOperator2D",
    "BranchPoint",
    "Branch",
    "NewtonError",
    "hessian",
    "linearize",
    "apply_L",
    "quadratic_form",
    "ground_eigen_2d",
    "block_spectrum",
    "ground_eigenvalue_blocks",
    "critical_lambda_2d",
    "lift_mode_pair",
    "apply_T",
    "rotate",
    "generator",
    "newton_solve",
    "continue_branch",
    "phi_second_derivative",
    "branch_to_csv",
    "branch_summary_json",
]


class NewtonError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Packing


def _n_int(grid: DiskGrid) -> int:
    return (grid.n_r - 1) * grid.n_theta


def pack(grid: DiskGrid, pp: np.ndarray, pm: np.ndarray) -> np.ndarray:
    """Interior values of (psi_+, psi_-) as one real vector."""
    i = slice(0, grid.n_r - 1)
    return np.concatenate([pp[i].real.ravel(), pp[i].imag.ravel(), pm[i].real.ravel(), pm[i].imag.ravel()])


def unpack(grid: DiskGrid, x: np.ndarray, boundary=None):
    n = _n_int(grid)
    shp = (grid.n_r - 1, grid.n_theta)
    pp = np.zeros((grid.n_r, grid.n_theta), dtype=complex)
    pm = np.zeros_like(pp)
    pp[:-1] = (x[:n] + 1j * x[n:2 * n]).reshape(shp)
    pm[:-1] = (x[2 * n:3 * n] + 1j * x[3 * n:]).reshape(shp)
    if boundary is not None:
        pp[-1], pm[-1] = boundary
    return pp, pm


def _weights(grid: DiskGrid) -> np.ndarray:
    w = grid.weights[:-1].ravel()
    return np.tile(w, 4)


def _stiffness_interior(grid: DiskGrid) -> sp.csr_matrix:
    """K restricted to interior nodes (boundary values eliminated)."""
    nr, nt = grid.n_r - 1, grid.n_theta
    a = grid.radial_coupling
    c = grid.angular_coupling[:-1]
    idx = np.arange(nr * nt).reshape(nr, nt)
    rows, cols, vals = [], [], []
    diag = np.zeros((nr, nt))
    diag += 2.0 * c[:, None]
    diag += a[:, None]  # edge to ring j+1 (the boundary ring for j = nr-1)
    diag[1:] += a[:-1, None]
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    # angular neighbours
    kp = np.roll(idx, -1, axis=1)
    rows += [idx.ravel(), kp.ravel()]
    cols += [kp.ravel(), idx.ravel()]
    cv = np.repeat(-c, nt)
    vals += [cv, cv]
    # radial neighbours
    lo, hi = idx[:-1].ravel(), idx[1:].ravel()
    av = np.repeat(-a[:-1], nt)
    rows += [lo, hi]
    cols += [hi, lo]
    vals += [av, av]
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nr * nt,) * 2)
    K.sum_duplicates()
    return K


def hessian(fld: DiskField, lam: Optional[float] = None, beta: Optional[float] = None) -> sp.csr_matrix:
    """Exact Hessian of the discrete energy at ``fld`` in the packed real coordinates."""
    grid = fld.grid
    lam = fld.lam if lam is None else lam
    beta = fld.beta if beta is None else beta
    n = _n_int(grid)
    K = _stiffness_interior(grid)
    w = grid.weights[:-1].ravel()
    pp, pm = fld.psi_plus[:-1].ravel(), fld.psi_minus[:-1].ravel()
    X = np.vstack([pp.real, pp.imag, pm.real, pm.imag])  # (4, n)
    sig = np.array([1.0, 1.0, -1.0, -1.0])
    rho_p = X[0] ** 2 + X[1] ** 2
    rho_m = X[2] ** 2 + X[3] ** 2
    s = rho_p + rho_m - 1.0
    d = rho_p - rho_m
    blocks = [[None] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(4):
            v = lam * w * (2.0 * X[i] * X[j] + 2.0 * beta * sig[i] * sig[j] * X[i] * X[j])
            if i == j:
                v = v + lam * w * (s + beta * d * sig[i])
            D = sp.diags(v)
            blocks[i][j] = (K + D) if i == j else D
    return sp.bmat(blocks, format="csr")


def _lam_gradient(fld: DiskField) -> np.ndarray:
    """d/d lam of the energy gradient; the potential part is linear in lam."""
    grid, beta = fld.grid, fld.beta
    W = grid.weights[:-1]
    pp, pm = fld.psi_plus[:-1], fld.psi_minus[:-1]
    rp, rm = np.abs(pp) ** 2, np.abs(pm) ** 2
    s, d = rp + rm - 1.0, rp - rm
    gp = np.zeros_like(fld.psi_plus)
    gm = np.zeros_like(fld.psi_minus)
    gp[:-1] = W * (s + beta * d) * pp
    gm[:-1] = W * (s - beta * d) * pm
    return pack(grid, gp, gm)


# ---------------------------------------------------------------------------
# Linearized operator


@dataclass
class LinearizedOperator2D:
    lam: float
    beta: float
    grid: DiskGrid
    H: sp.csr_matrix
    weights: np.ndarray
    base: DiskField

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (self.H @ x) / self.weights

    def inner(self, x, y) -> float:
        return float(np.dot(self.weights * x, y))


def linearize(lam: float, beta: float, grid: Optional[DiskGrid] = None, base: Optional[DiskField] = None) -> LinearizedOperator2D:
    """L_lam at the discrete symmetric vortex (or at ``base`` when given)."""
    if lam <= 0 or beta <= 0:
        raise ValueError("lambda and beta must be positive")
    grid = grid or (base.grid if base is not None else DiskGrid(64, 64))
    if base is None:
        base = f2.symmetric_solution(lam, grid, beta, discrete=True)
    H = hessian(base, lam, beta)
    return LinearizedOperator2D(lam, beta, grid, H, _weights(grid), base)


def apply_L(op: LinearizedOperator2D, phi):
    """L Phi for Phi = (phi_+, phi_-) given on the full grid (boundary ring ignored, must vanish)."""
    php, phm = phi
    if np.any(php[-1] != 0) or np.any(phm[-1] != 0):
        raise ValueError("perturbation must vanish on the boundary ring")
    y = op.apply(pack(op.grid, php, phm))
    return unpack(op.grid, y)


def quadratic_form(op: LinearizedOperator2D, phi) -> float:
    x = pack(op.grid, *phi)
    return float(x @ (op.H @ x))


@dataclass
class EigenResult2D:
    mu: np.ndarray
    vectors: list
    residuals: np.ndarray
    upper: float = float("nan")


def _eigen_lowest(H: sp.spmatrix, w: np.ndarray, k: int, lower: float, tol: float = 1e-9,
                  maxiter: int = 500, seed: int = 0):
    """Lowest k eigenpairs of H v = mu W v by inverse subspace iteration.

    ``lower`` must be below the spectrum; the shift moves up towards the
    lowest Ritz value once it is resolved.
    """
    n = H.shape[0]
    Wd = sp.diags(w)
    p = min(n, k + 3)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    sigma = lower
    lu = spla.splu((H - sigma * Wd).tocsc())
    scale = max(1.0, abs(lower))
    theta = res = None
    for it in range(1, maxiter + 1):
        Y = lu.solve(w[:, None] * X)
        # W-orthonormalize
        G = Y.T @ (w[:, None] * Y)
        L = np.linalg.cholesky(0.5 * (G + G.T))
        X = np.linalg.solve(L, Y.T).T
        HX = H @ X
        Bm = X.T @ HX
        theta, Z = np.linalg.eigh(0.5 * (Bm + Bm.T))
        X = X @ Z
        HX = HX @ Z
        R = HX / w[:, None] - X * theta
        res = np.sqrt(np.sum(w[:, None] * R * R, axis=0))
        if np.all(res[:k] <= tol * (1.0 + np.abs(theta[:k]))):
            break
        if it % 4 == 0:
            target = theta[0] - max(10.0 * res[0], 0.05 * (theta[min(k, p - 1)] - theta[0]), 1e-3 * scale)
            if target > sigma + 1e-9 * scale:
                sigma = target
                lu = spla.splu((H - sigma * Wd).tocsc())
    else:
        raise NewtonError(f"2D inverse iteration did not converge (residuals {res[:k]})")
    return theta[:k], X[:, :k], res[:k]


def ground_eigen_2d(lam: float, beta: float, grid: Optional[DiskGrid] = None, k: int = 3,
                    op: Optional[LinearizedOperator2D] = None, tol: float = 1e-9):
    """Smallest eigenvalues and eigenvectors of the discrete L_lam.

    Returns (mu, [Phi_1, ...], residuals); the ground level is doubly
    degenerate by the rotation symmetry, so k >= 2 returns the whole pair.
    """
    op = op or linearize(lam, beta, grid)
    # |U|^2 <= 1 and the remaining terms are non-negative
    lower = -op.lam * 1.0 - 1.0
    mu, X, res = _eigen_lowest(op.H, op.weights, k, lower, tol=tol)
    vecs = [unpack(op.grid, X[:, j]) for j in range(k)]
    return mu, vecs, res


def _angular_block(grid: DiskGrid, f: np.ndarray, lam: float, beta: float, m: int):
    """Banded form of the discrete H restricted to angular sector m, per unit n_theta.

    The base u = f_j e^{i theta} commutes with rotation combined with a phase,
    so perturbations e^{i theta}(A e^{i m theta} + B e^{-i m theta}) with real
    radial A, B (one per component) span an invariant subspace.
    """
    n = grid.n_r - 1
    nt = grid.n_theta
    a = grid.radial_coupling
    c = grid.angular_coupling[:n]
    w = grid.ring_weights[:n]
    ff = f[:n] ** 2
    sig = lambda k: 2.0 - 2.0 * math.cos(k * grid.dtheta)  # noqa: E731
    special = m == 0 or 2 * m == nt
    s_a, s_b = (sig(1 + m), sig(1 + m)) if special else (sig(1 + m), sig(1 - m))
    # r_i = coefficient of component i in Re-part amplitude, per ring
    rc = np.array([1.0, 0.0]) if special else np.array([1.0, 1.0]) / math.sqrt(2.0)
    # local 4x4 potential matrix, components (A+, B+, A-, B-)
    sgn = np.array([1.0, 1.0, -1.0, -1.0])
    rv = np.concatenate([rc, rc])
    P = np.zeros((n, 4, 4))
    sym = np.array([s_a, s_b, s_a, s_b])
    for i in range(4):
        P[:, i, i] += c * sym[i] + lam * w * (ff - 1.0) + a[:n]
        P[1:, i, i] += a[: n - 1]
        for j in range(4):
            P[:, i, j] += lam * w * ff * rv[i] * rv[j] * (1.0 + beta * sgn[i] * sgn[j])
    # symmetric scaling by W^{-1/2}; W is w_j on every component
    s = 1.0 / np.sqrt(w)
    ab = np.zeros((5, 4 * n))  # upper banded, bandwidth 4
    for i in range(4):
        for j in range(i, 4):
            ab[4 - (j - i), np.arange(n) * 4 + j] = P[:, i, j] * s * s
    off = -a[: n - 1] * s[:-1] * s[1:]
    for i in range(4):
        ab[0, 4 * np.arange(1, n) + i] = off
    return ab


def block_spectrum(lam: float, beta: float, grid: DiskGrid, k: int = 1, base: Optional[DiskField] = None,
                   sectors: Optional[Sequence[int]] = None):
    """Lowest k eigenvalues of the discrete L in every angular sector m = 0..n_theta/2.

    Returns a (len(sectors), k) array, all sectors by default. The union over sectors (sectors
    0 < m < n_theta/2 counted twice) is the spectrum of the sparse operator
    built by ``linearize`` on the same grid and base.
    """
    import scipy.linalg as sla

    if base is None:
        base = f2.symmetric_solution(lam, grid, beta, discrete=True)
    f = base.info["radial_factor"]
    sectors = range(grid.n_theta // 2 + 1) if sectors is None else sectors
    out = np.empty((len(sectors), k))
    for i, m in enumerate(sectors):
        ab = _angular_block(grid, f, lam, beta, m)
        out[i] = sla.eig_banded(ab, eigvals_only=True, select="i", select_range=(0, k - 1))
    return out


def ground_eigenvalue_blocks(lam: float, beta: float, grid: DiskGrid) -> float:
    """Lowest eigenvalue of the discrete L from sectors 0 and 1 only.

    For 1 <= m < n_theta/2 the sector-m block exceeds the sector-1 block by a
    non-negative diagonal (the angular symbols grow with m), and the sector
    n_theta/2 block likewise dominates sector 0, so nothing else can be lower.
    """
    return float(block_spectrum(lam, beta, grid, k=1, sectors=(0, 1)).min())


def antisymmetry_defect(phi) -> float:
    p, m = phi
    return float(np.linalg.norm(p + m) / math.sqrt(np.linalg.norm(p) ** 2 + np.linalg.norm(m) ** 2))


def angular_leakage(grid: DiskGrid, w: np.ndarray, modes=(0, 2)) -> float:
    """Weighted energy fraction of w outside the given angular Fourier modes."""
    c = np.fft.fft(w[:-1], axis=1) / grid.n_theta
    ring = grid.ring_weights[:-1, None]
    tot = float(np.sum(ring * np.abs(c) ** 2))
    keep = np.zeros(grid.n_theta, dtype=bool)
    for m in modes:
        keep[m % grid.n_theta] = True
    out = float(np.sum((ring * np.abs(c) ** 2)[:, ~keep]))
    return out / tot if tot > 0 else 0.0


def critical_lambda_2d(beta: float, grid: DiskGrid, guess: float, tol: float = 1e-10) -> float:
    """lambda where the discrete 2D ground eigenvalue vanishes (secant from ``guess``)."""
    l0, l1 = guess, guess * 1.01
    m0 = ground_eigen_2d(l0, beta, grid, k=1)[0][0]
    m1 = ground_eigen_2d(l1, beta, grid, k=1)[0][0]
    for _ in range(30):
        l2 = l1 - m1 * (l1 - l0) / (m1 - m0)
        l0, m0 = l1, m1
        l1 = l2
        m1 = ground_eigen_2d(l1, beta, grid, k=1)[0][0]
        if abs(l1 - l0) <= tol * l1:
            break
    return float(l1)


# ---------------------------------------------------------------------------
# Symmetries


def apply_T(grid: DiskGrid, pp: np.ndarray, pm: np.ndarray):
    """T(psi_+, psi_-) = (-psi_-(-x), -psi_+(-x)); -x is a shift by n_theta/2."""
    s = grid.n_theta // 2
    return -np.roll(pm, s, axis=1), -np.roll(pp, s, axis=1)


def rotate(grid: DiskGrid, pp: np.ndarray, pm: np.ndarray, steps: int):
    """R_xi psi(z) = conj(xi) psi(xi z) for xi = exp(2 pi i steps / n_theta)."""
    xi = np.exp(2j * math.pi * steps / grid.n_theta)
    return np.conj(xi) * np.roll(pp, -steps, axis=1), np.conj(xi) * np.roll(pm, -steps, axis=1)


def generator(grid: DiskGrid, pp: np.ndarray, pm: np.ndarray):
    """d/d alpha of R_{e^{i alpha}} at alpha = 0: -i psi + d_theta psi (spectral derivative)."""
    m = np.fft.fftfreq(grid.n_theta, 1.0 / grid.n_theta)
    if grid.n_theta % 2 == 0:
        m[grid.n_theta // 2] = 0.0

    def d(u):
        return np.fft.ifft(1j * m[None, :] * np.fft.fft(u, axis=1), axis=1)

    return -1j * pp + d(pp), -1j * pm + d(pm)


def lift_mode_pair(grid: DiskGrid, a0_r, a0, a2) -> tuple:
    """(w, -w) with w = a0 - a2 e^{2 i theta}, normalized in the discrete L2 of the disk."""
    r = grid.r / grid.radius
    A0 = np.interp(r, a0_r, a0)
    A2 = np.interp(r, a0_r, a2)
    w = A0[:, None] - A2[:, None] * np.exp(2j * grid.theta)[None, :]
    w[-1] = 0.0
    nrm = math.sqrt(2.0 * float(np.sum(grid.weights * np.abs(w) ** 2)))
    w = w / nrm
    return w, -w


# ---------------------------------------------------------------------------
# Newton and continuation


@dataclass
class BranchPoint:
    t: float
    lam: float
    field: DiskField
    zeros: tuple
    t_symmetry_residual: float
    newton_residual: float
    energy: float = float("nan")
    ground_eigenvalue: float = float("nan")
    iterations: int = 0
    newton_history: list = field(default_factory=list)


@dataclass
class Branch:
    beta: float
    lambda_beta: float
    points: list
    W1: tuple
    flagged: bool = False
    message: str = ""
    lambda_critical_2d: float = float("nan")


def _residual_norm(fld: DiskField) -> float:
    return f2.residual_norm(fld)


def _t_defect(grid, pp, pm) -> float:
    tp, tm = apply_T(grid, pp, pm)
    num = np.linalg.norm(tp - pp) ** 2 + np.linalg.norm(tm - pm) ** 2
    den = np.linalg.norm(pp) ** 2 + np.linalg.norm(pm) ** 2
    return math.sqrt(num / den)


def newton_solve(guess: DiskField, lam: float, beta: float, tol: float = 1e-10,
                 W1: Optional[tuple] = None, t: Optional[float] = None,
                 max_iter: int = 30, project_T: bool = True) -> DiskField:
    """Solve the discrete Euler-Lagrange system near ``guess``.

    Without ``W1`` this is plain Newton at fixed lambda. With ``W1`` and
    ``t`` lambda becomes an unknown fixed by <Psi, W1> = t, the rotation
    direction is removed with the row <Psi, G W1> = 0 (a multiplier on G W1
    closes the system), and iterates are projected onto TPsi = Psi.
    """
    if not guess.boundary_ok():
        raise f2.InvalidFieldError("guess does not carry the boundary data")
    grid = guess.grid
    bnd = (guess.psi_plus[-1].copy(), guess.psi_minus[-1].copy())
    fld = guess.copy(epsilon=1.0 / math.sqrt(lam), beta=beta)
    w = _weights(grid)
    n4 = len(w)
    bordered = W1 is not None
    if bordered:
        if t is None:
            raise ValueError("t is required with W1")
        v1 = pack(grid, *W1)
        g1 = pack(grid, *generator(grid, *W1))
        g1 -= v1 * (np.dot(w * v1, g1) / np.dot(w * v1, v1))
    hist = []
    sigma = 0.0
    it = 0
    for it in range(1, max_iter + 1):
        if project_T:
            pp, pm = apply_T(grid, fld.psi_plus, fld.psi_minus)
            fld.psi_plus = 0.5 * (fld.psi_plus + pp)
            fld.psi_minus = 0.5 * (fld.psi_minus + pm)
            fld.psi_plus[-1], fld.psi_minus[-1] = bnd
        gp, gm = f2.gradient(fld)
        F = pack(grid, gp, gm)
        x = pack(grid, fld.psi_plus, fld.psi_minus)
        rn = math.sqrt(float(np.sum(F * F / w)))
        hist.append(rn)
        H = hessian(fld)
        if bordered:
            c1 = t - float(np.dot(w * v1, x))
            c2 = -float(np.dot(w * g1, x))
            if rn <= tol and abs(c1) <= tol and abs(c2) <= tol and it > 1:
                break
            b = _lam_gradient(fld)
            A = sp.bmat([
                [H, sp.csr_matrix(b[:, None]), sp.csr_matrix((w * g1)[:, None])],
                [sp.csr_matrix((w * v1)[None, :]), None, None],
                [sp.csr_matrix((w * g1)[None, :]), None, None],
            ], format="csc")
            rhs = np.concatenate([-(F + sigma * w * g1), [c1, c2]])
            try:
                sol = spla.spsolve(A, rhs)
            except RuntimeError as exc:  # singular factor
                raise NewtonError(str(exc)) from exc
            if not np.all(np.isfinite(sol)):
                raise NewtonError("bordered Jacobian is singular")
            dx, dl, ds = sol[:n4], sol[n4], sol[n4 + 1]
            lam = lam + dl
            sigma = sigma + ds
            if lam <= 0:
                raise NewtonError("lambda left the positive axis")
            fld.epsilon = 1.0 / math.sqrt(lam)
        else:
            if rn <= tol and it > 1:
                break
            dx = spla.spsolve(H.tocsc(), -F)
            if not np.all(np.isfinite(dx)):
                raise NewtonError("Jacobian is singular")
        x = x + dx
        fld.psi_plus, fld.psi_minus = unpack(grid, x, bnd)
        if len(hist) > 3 and hist[-1] > 1e3 * hist[0]:
            raise NewtonError(f"Newton diverged (residual {hist[-1]:.3e})")
    else:
        raise NewtonError(f"Newton did not converge in {max_iter} iterations (residual {hist[-1]:.3e})")
    fld.info.update(newton_history=hist, newton_residual=hist[-1], lam=lam, sigma=sigma, iterations=it)
    return fld


def _transverse_ground(sol: DiskField, lam: float, beta: float) -> float:
    """Lowest eigenvalue of L at a branch field, skipping the rotation near-kernel."""
    grid = sol.grid
    op = linearize(lam, beta, grid, base=sol)
    mu, vecs, _ = ground_eigen_2d(lam, beta, grid, k=2, op=op)
    g = pack(grid, *generator(grid, sol.psi_plus, sol.psi_minus))
    w = op.weights
    g /= math.sqrt(float(np.dot(w * g, g)))
    overlap = [abs(float(np.dot(w * g, pack(grid, *v)))) for v in vecs]
    return float(mu[int(np.argmin(overlap))])


def continue_branch(beta: float, lambda_beta, t_max: float = 0.1, n_steps: int = 10,
                    grid: Optional[DiskGrid] = None, tol: float = 1e-10, both_signs: bool = True,
                    with_eigenvalue: bool = True) -> Branch:
    """Predictor-corrector continuation of the T-symmetric branch from lambda_beta.

    ``lambda_beta`` may be a CriticalCoupling or a number. The kernel
    direction W1 is the lifted mode-1 ground pair, projected onto the
    discrete 2D ground eigenspace at the discrete critical lambda.
    """
    from .spectral import mu1_of_lambda

    if not 0 < beta < 1:
        raise ValueError("branch continuation needs 0 < beta < 1")
    grid = grid or DiskGrid(64, 64)
    lb = float(getattr(lambda_beta, "lambda_beta", lambda_beta))
    lam_c = critical_lambda_2d(beta, grid, lb)
    gs = mu1_of_lambda(lam_c, beta, n=800)
    W = lift_mode_pair(grid, gs.eigenvector.grid.nodes, gs.eigenvector.a0, gs.eigenvector.a2)
    op = linearize(lam_c, beta, grid)
    mu, vecs, _ = ground_eigen_2d(lam_c, beta, grid, k=2, op=op)
    wts = _weights(grid)
    v = pack(grid, *W)
    basis = np.array([pack(grid, *p) for p in vecs]).T
    G = basis.T @ (wts[:, None] * basis)
    coef = np.linalg.solve(G, basis.T @ (wts * v))
    v = basis @ coef
    v /= math.sqrt(float(np.dot(wts * v, v)))
    W1 = unpack(grid, v)
    U = op.base
    pts = []
    flagged, msg = False, ""
    signs = (1.0, -1.0) if both_signs else (1.0,)
    for sgn in signs:
        prev = None
        prev_lam = lam_c
        for j in range(1, n_steps + 1):
            t = sgn * t_max * j / n_steps
            if prev is None:
                gp = U.psi_plus + t * W1[0]
                gm = U.psi_minus + t * W1[1]
            else:
                dt = t - prev.t
                gp = prev.field.psi_plus + dt * W1[0]
                gm = prev.field.psi_minus + dt * W1[1]
            guess = U.copy()
            guess.psi_plus, guess.psi_minus = gp, gm
            guess.psi_plus[-1], guess.psi_minus[-1] = U.psi_plus[-1], U.psi_minus[-1]
            try:
                sol = newton_solve(guess, prev_lam, beta, tol=tol, W1=W1, t=t)
            except NewtonError as exc:
                flagged, msg = True, f"corrector failed at t={t}: {exc}"
                break
            lam_t = sol.info["lam"]
            sol.epsilon = 1.0 / math.sqrt(lam_t)
            zp, zm = f2.find_zeros(sol)
            z_plus = min(zp, key=lambda z: abs(z[0]))[0] if zp else complex("nan")
            z_minus = min(zm, key=lambda z: abs(z[0]))[0] if zm else complex("nan")
            ev = float("nan")
            if with_eigenvalue:
                ev = _transverse_ground(sol, lam_t, beta)
            bp = BranchPoint(t, lam_t, sol, (complex(z_plus), complex(z_minus)),
                             _t_defect(grid, sol.psi_plus, sol.psi_minus), sol.info["newton_residual"],
                             f2.energy(sol).total, ev, sol.info["iterations"], sol.info["newton_history"])
            pts.append(bp)
            prev, prev_lam = bp, lam_t
    pts.sort(key=lambda p: p.t)
    return Branch(beta, lb, pts, W1, flagged, msg, lam_c)


def phi_second_derivative(branch, max_residual: float = 1e-5):
    """Least-squares fit lam(t) = c0 + c1 t + c2 t^2 + c4 t^4.

    Returns (phi''(0) = 2 c2, c1, c0, rms). The t^4 column keeps the
    curvature estimate unbiased at finite t_max; c1 should vanish by evenness.
    """
    pts = branch.points if hasattr(branch, "points") else branch
    if len(pts) < 4:
        raise ValueError("need at least four branch points")
    t = np.array([p.t for p in pts])
    lam = np.array([p.lam for p in pts])
    A = np.vstack([np.ones_like(t), t, t * t, t**4]).T
    coef, *_ = np.linalg.lstsq(A, lam, rcond=None)
    rms = float(np.sqrt(np.mean((A @ coef - lam) ** 2)))
    if rms > max_residual * max(1.0, abs(coef[0])):
        raise ValueError(f"branch fit residual {rms:.3e} too large; refine the t grid")
    return float(2.0 * coef[2]), float(coef[1]), float(coef[0]), rms


def branch_to_csv(branch: Branch, path=None) -> str:
    lines = ["t,lambda,energy,abs_z_plus,arg_z_plus,t_symmetry_residual,newton_residual,ground_eigenvalue"]
    for p in branch.points:
        z = p.zeros[0]
        lines.append(
            f"{p.t:.17g},{p.lam:.17g},{p.energy:.17g},{abs(z):.17g},{math.atan2(z.imag, z.real):.17g},"
            f"{p.t_symmetry_residual:.17g},{p.newton_residual:.17g},{p.ground_eigenvalue:.17g}"
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def branch_summary_json(branch: Branch, path=None) -> str:
    d2, _, _, _ = phi_second_derivative(branch)
    rec = {
        "beta": branch.beta,
        "lambda_beta": branch.lambda_beta,
        "phi_second_derivative": d2,
        "sign": int(np.sign(d2)),
        "n_points": len(branch.points),
    }
    text = json.dumps(rec, sort_keys=True, indent=2) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
