"""Fourier-mode reduced spectra of the linearization about the symmetric vortex.

Every reduced operator here is a real system of radial functions c_j(r),
each carrying an angular index m_j, with quadratic form

    sum_j int [ (c_j')^2 + (m_j^2 / r^2) c_j^2 + V_j c_j^2 ] r dr
      + sum_couplings int g(r) (c_a + s c_b)^2 r dr

discretized by cell-centred finite volumes on the uniform grid r_i = i h of
[0, 1]. Nodes carry control-volume weights w_0 = h^2/8, w_i = r_i h; flux
terms use midpoint radii r_{i+1/2}. Components with m != 0 are pinned at the
origin, all components vanish at r = 1. The resulting generalized problem
H v = mu W v is symmetric, and after the W^(1/2) scaling it is banded with
the unknowns interleaved node by node.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .radial_profile import RadialGrid, RadialProfile, collocation_bvp, entire_profile, profile_f_lambda

__all__ = [
    "RadialOperator",
    "ModePair",
    "SpectralResult",
    "CriticalCoupling",
    "NoCrossingError",
    "EigenSolverError",
    "assemble_radial",
    "assemble_mode1",
    "assemble_mode_n",
    "ground_eigenpair",
    "mu1_of_lambda",
    "find_lambda_beta",
    "muhat_monotonicity",
    "qbreve_infinity",
    "sweep_to_csv",
    "critical_coupling_to_json",
]


class NoCrossingError(RuntimeError):
    """The ground mode-1 eigenvalue never changed sign in the scanned range."""


class EigenSolverError(RuntimeError):
    pass


@dataclass
class RadialOperator:
    grid: RadialGrid
    names: tuple
    H: sp.csr_matrix
    weights: np.ndarray
    # index[c] -> (positions in the unknown vector, node indices)
    index: dict
    lam: float = float("nan")
    beta: float = float("nan")
    mode: int = -1

    @property
    def size(self) -> int:
        return self.H.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """M v, the operator acting in the weighted inner product."""
        return (self.H @ v) / self.weights

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.dot(self.weights * u, v))

    def form(self, v: np.ndarray) -> float:
        """<M v, v> in the weighted inner product (= v^T H v)."""
        return float(v @ (self.H @ v))

    def pack(self, **components) -> np.ndarray:
        v = np.zeros(self.size)
        for name, (pos, nodes) in self.index.items():
            v[pos] = np.asarray(components[name])[nodes]
        return v

    def unpack(self, v: np.ndarray) -> dict:
        n = len(self.grid.nodes)
        out = {}
        for name, (pos, nodes) in self.index.items():
            a = np.zeros(n)
            a[nodes] = v[pos]
            out[name] = a
        return out


@dataclass
class ModePair:
    grid: RadialGrid
    a0: np.ndarray
    a2: np.ndarray

    def norm2(self) -> float:
        return self.grid_weights_integral(self.a0**2 + self.a2**2)

    def grid_weights_integral(self, g):
        return float(np.dot(_control_weights(self.grid), g))


@dataclass
class SpectralResult:
    lam: float
    beta: float
    mode_index: int
    eigenvalue_mu: float
    eigenvector: object
    solver_residual: float
    index: int = 0


@dataclass
class CriticalCoupling:
    beta: float
    lambda_beta: float
    bracket: tuple
    eigenvalue_slope: float
    grid_levels: list = field(default_factory=list)
    level_values: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "lambda_beta": self.lambda_beta,
            "bracket": list(self.bracket),
            "slope": self.eigenvalue_slope,
            "grid_levels": list(self.grid_levels),
            "level_values": list(self.level_values),
        }


# ---------------------------------------------------------------------------
# Assembly


def _control_weights(grid: RadialGrid) -> np.ndarray:
    r = grid.nodes
    h = r[1] - r[0]
    w = r * h
    w[0] = h * h / 8.0
    w[-1] = (r[-1] - 0.25 * h) * 0.5 * h  # half cell; unused for Dirichlet nodes
    return w


def assemble_radial(grid: RadialGrid, components: Sequence[tuple], couplings: Sequence[tuple] = ()) -> RadialOperator:
    """Assemble a radial system.

    ``components``: sequence of (name, m, V) with V sampled on the nodes.
    ``couplings``: sequence of (name_a, name_b, sign, g) adding
    int g (c_a + sign c_b)^2 r dr to the form.
    """
    r = grid.nodes
    N = len(r) - 1
    h = r[1] - r[0]
    if not np.allclose(np.diff(r), h, rtol=1e-10, atol=0):
        raise ValueError("assembly requires a uniform radial grid")
    w_all = _control_weights(grid)
    rmid = 0.5 * (r[:-1] + r[1:])
    nc = len(components)
    # unknown ordering: node-major, component-minor
    index = {}
    pos_of = {}
    counter = 0
    start = {name: (0 if m == 0 else 1) for name, m, _ in components}
    for i in range(N):
        for name, m, _ in components:
            if i >= start[name]:
                pos_of[(name, i)] = counter
                counter += 1
    for name, m, _ in components:
        nodes = np.arange(start[name], N)
        index[name] = (np.array([pos_of[(name, i)] for i in nodes], dtype=int), nodes)
    n = counter
    rows, cols, vals = [], [], []

    def add(p, q, v):
        rows.append(p)
        cols.append(q)
        vals.append(v)

    weights = np.zeros(n)
    for name, m, V in components:
        V = np.asarray(V, float)
        pos, nodes = index[name]
        weights[pos] = w_all[nodes]
        # potential + centrifugal part, lumped at nodes
        for p, i in zip(pos, nodes):
            d = w_all[i] * V[i]
            if m != 0:
                d += w_all[i] * m * m / (r[i] * r[i])
            add(p, p, d)
        # flux part: sum_i rmid_i (c_{i+1} - c_i)^2 / h, c_N = 0 and c_0 = 0 for m != 0
        for i in range(N):
            k = rmid[i] / h
            pi = pos_of.get((name, i))
            pj = pos_of.get((name, i + 1))
            if pi is not None:
                add(pi, pi, k)
            if pj is not None:
                add(pj, pj, k)
            if pi is not None and pj is not None:
                add(pi, pj, -k)
                add(pj, pi, -k)
    for a, b, s, g in couplings:
        g = np.asarray(g, float)
        for i in range(N):
            pa = pos_of.get((a, i))
            pb = pos_of.get((b, i))
            c = w_all[i] * g[i]
            if c == 0.0:
                continue
            if pa is not None:
                add(pa, pa, c)
            if pb is not None:
                add(pb, pb, c)
            if pa is not None and pb is not None:
                add(pa, pb, s * c)
                add(pb, pa, s * c)
    H = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    H.sum_duplicates()
    return RadialOperator(grid, tuple(c[0] for c in components), H, weights, index)


def _check_profile(profile: RadialProfile):
    if abs(profile.grid.nodes[-1] - 1.0) > 1e-14:
        raise ValueError("profile must be f_lambda sampled on [0, 1]")


def assemble_mode1(lam: float, beta: float, profile: RadialProfile) -> RadialOperator:
    """Discrete M_lambda acting on the real pair (a0, a2)."""
    if lam <= 0 or beta <= 0:
        raise ValueError("lambda and beta must be positive")
    _check_profile(profile)
    f2 = profile.values**2
    V = lam * (f2 - 1.0)
    op = assemble_radial(
        profile.grid,
        [("a0", 0, V), ("a2", 2, V)],
        [("a0", "a2", -1.0, beta * lam * f2)],
    )
    op.lam, op.beta, op.mode = lam, beta, 1
    return op


def assemble_mode_n(n: int, lam: float, beta: float, profile: RadialProfile) -> RadialOperator:
    """Real form of the Fourier block L^(n) acting on (b_{n+1}, b_{1-n}).

    The coupling |b_{n+1} + conj(b_{1-n})|^2 splits into (Re + Re)^2 and
    (Im - Im)^2, so the block is assembled on four real radial functions
    (two for n = 0). Eigenvalues of the complex block appear twice.
    For n = 0 the single component b_1 is coupled to itself through
    2 beta lam f^2 (Re b_1)^2.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    _check_profile(profile)
    f2 = profile.values**2
    V = lam * (f2 - 1.0)
    if n == 0:
        op = assemble_radial(profile.grid, [("re_b1", 1, V + 2.0 * beta * lam * f2), ("im_b1", 1, V)])
    else:
        mp, mm = n + 1, 1 - n
        op = assemble_radial(
            profile.grid,
            [("re_p", mp, V), ("re_m", mm, V), ("im_p", mp, V), ("im_m", mm, V)],
            [("re_p", "re_m", +1.0, beta * lam * f2), ("im_p", "im_m", -1.0, beta * lam * f2)],
        )
    op.lam, op.beta, op.mode = lam, beta, n
    return op


# ---------------------------------------------------------------------------
# Eigen-solver


def _to_banded_upper(A: sp.spmatrix):
    A = A.tocoo()
    off = A.col - A.row
    u = int(off.max()) if off.size else 0
    n = A.shape[0]
    ab = np.zeros((u + 1, n))
    mask = off >= 0
    np.add.at(ab, (u - off[mask], A.col[mask]), A.data[mask])
    return ab, u


def ground_eigenpair(op: RadialOperator, k: int = 1, shift: Optional[float] = None,
                     tol: float = 1e-10, maxiter: int = 2000, seed: int = 0,
                     start: Optional[np.ndarray] = None) -> list:
    """k smallest eigenpairs of M v = mu v by shifted inverse subspace iteration.

    The shift is kept strictly below the spectrum, certified by the banded
    Cholesky factorization of (A - shift I); a failed factorization lowers
    the shift and retries. Rayleigh-Ritz on a block of k + 2 vectors acts as
    the deflation.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    s = 1.0 / np.sqrt(op.weights)
    A = sp.diags(s) @ op.H @ sp.diags(s)
    A = A.tocsr()
    n = A.shape[0]
    ab, u = _to_banded_upper(A)
    diag = ab[u].copy()
    absrow = np.asarray(abs(A).sum(axis=1)).ravel()
    gersh_lo = float(np.min(2 * diag - absrow))
    normA = float(absrow.max())
    if shift is None:
        sigma = gersh_lo - 1.0
    else:
        sigma = float(shift)

    def factor(sig):
        m = ab.copy()
        m[u] -= sig
        return sla.cholesky_banded(m, lower=False, check_finite=False)

    for _ in range(60):
        try:
            c = factor(sigma)
            break
        except sla.LinAlgError:
            sigma -= max(1.0, abs(sigma))  # shift above an eigenvalue; move down
    else:
        raise EigenSolverError("could not find a shift below the spectrum")

    p = min(n, k + 2)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if start is not None:
        X[:, 0] = np.asarray(start) / s
    X, _ = np.linalg.qr(X)
    floor = 1e3 * np.finfo(float).eps * normA
    theta = None
    res = None
    it = 0
    for it in range(1, maxiter + 1):
        Y = sla.cho_solve_banded((c, False), X, check_finite=False)
        X, _ = np.linalg.qr(Y)
        AX = A @ X
        Bm = X.T @ AX
        theta, Z = np.linalg.eigh(0.5 * (Bm + Bm.T))
        X = X @ Z
        AX = AX @ Z
        R = AX - X * theta
        res = np.linalg.norm(R, axis=0)
        if np.all(res[:k] <= np.maximum(tol * (1.0 + np.abs(theta[:k])), floor)):
            break
        # move the shift towards the wanted end once the block has settled
        if it % 5 == 0 and p > k:
            gap = theta[min(k, p - 1)] - theta[0]
            target = theta[0] - max(res[0], 0.1 * gap)
            if target > sigma + 1e-12 * max(1.0, abs(sigma)):
                try:
                    c = factor(target)
                    sigma = target
                except sla.LinAlgError:
                    pass
    else:
        raise EigenSolverError(
            f"inverse iteration not converged after {maxiter} iterations (residual {res[:k]})"
        )
    out = []
    for j in range(k):
        v = X[:, j] * s  # W-orthonormal
        comps = op.unpack(v)
        if "a0" in comps:
            if comps["a0"][np.argmax(np.abs(comps["a0"]))] < 0:
                v = -v
                comps = op.unpack(v)
            vec = ModePair(op.grid, comps["a0"], comps["a2"])
        else:
            vec = comps
        out.append(SpectralResult(op.lam, op.beta, op.mode, float(theta[j]), vec, float(res[j]), j))
    return out


# ---------------------------------------------------------------------------
# Critical coupling


def mu1_of_lambda(lam: float, beta: float, n: int = 400, profile: Optional[RadialProfile] = None,
                  shift: Optional[float] = None, k: int = 1) -> SpectralResult:
    if lam <= 0 or beta <= 0:
        raise ValueError("lambda and beta must be positive")
    if profile is None:
        profile = profile_f_lambda(lam, n=n)
    op = assemble_mode1(lam, beta, profile)
    return ground_eigenpair(op, k=k, shift=shift)[0]


def _resolution_for(lam: float, n: int) -> int:
    # keep at least ~25 cells per core length 1/sqrt(lam)
    need = int(math.ceil(25.0 * math.sqrt(lam)))
    m = max(n, need)
    return m + (m % 2)


SCAN_LAMBDAS = (1e-2, 1e-1, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1e3, 3e3, 1e4, 3e4, 1e5, 3e5, 1e6)


def _crossing(beta: float, n: int, lo: float, hi: float, mu_lo: float, mu_hi: float, rel: float):
    """Illinois false position on mu(lam) keeping a sign bracket."""
    def mu(l):
        return mu1_of_lambda(l, beta, n=n).eigenvalue_mu

    side = 0
    for _ in range(200):
        if hi - lo <= rel * hi:
            break
        l = (lo * mu_hi - hi * mu_lo) / (mu_hi - mu_lo)
        if not (lo < l < hi):
            l = 0.5 * (lo + hi)
        # keep the new point away from the ends so the bracket collapses
        l = min(max(l, lo + 0.25 * rel * hi), hi - 0.25 * rel * hi)
        m = mu(l)
        if m > 0:
            lo, mu_lo = l, m
            if side == -1:
                mu_hi *= 0.5
            side = -1
        elif m < 0:
            hi, mu_hi = l, m
            if side == +1:
                mu_lo *= 0.5
            side = +1
        else:
            lo = hi = l
            break
        # once the root is pinned, close the bracket symmetrically around it
        if abs(m) < 1e-12:
            break
    lam = 0.5 * (lo + hi) if hi > lo else lo
    half = 0.5 * rel * lam
    a, b = lam - half, lam + half
    ma, mb = mu(a), mu(b)
    if not (ma > 0 > mb):
        # fall back to plain bisection on the remaining bracket
        a, b = lo, hi
        while b - a > rel * b:
            c = 0.5 * (a + b)
            if mu(c) > 0:
                a = c
            else:
                b = c
    return 0.5 * (a + b), (a, b)


def find_lambda_beta(beta: float, tol: float = 1e-6, levels: Sequence[int] = (400, 800),
                     lam_max: float = 1e6) -> CriticalCoupling:
    """Locate lambda_beta where the ground mode-1 eigenvalue changes sign.

    The crossing is found on each radial resolution in ``levels`` to a
    relative bracket width ``tol``, then Richardson-extrapolated assuming
    second-order convergence. The slope d mu / d lam is measured on the
    finest level by a centred difference.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    scan = [l for l in SCAN_LAMBDAS if l <= lam_max]
    prev = None
    bracket0 = None
    for l in scan:
        m = mu1_of_lambda(l, beta, n=_resolution_for(l, levels[0])).eigenvalue_mu
        if m < 0:
            if prev is None:
                raise NoCrossingError(f"mu_1 already negative at lambda={l} for beta={beta}")
            bracket0 = (prev[0], l)
            break
        prev = (l, m)
    if bracket0 is None:
        raise NoCrossingError(f"no crossing of mu_1 for beta={beta} in [{scan[0]}, {scan[-1]}]")
    values = []
    brackets = []
    for n in levels:
        n_eff = _resolution_for(bracket0[1], n)
        lo, hi = bracket0
        mlo = mu1_of_lambda(lo, beta, n=n_eff).eigenvalue_mu
        mhi = mu1_of_lambda(hi, beta, n=n_eff).eigenvalue_mu
        if not (mlo > 0 > mhi):
            raise NoCrossingError(f"scan bracket {bracket0} lost its sign change at n={n_eff}")
        lam_n, br = _crossing(beta, n_eff, lo, hi, mlo, mhi, tol)
        values.append(lam_n)
        brackets.append(br)
    if len(values) >= 2:
        ratio = (levels[-1] / levels[-2]) ** 2
        lam_beta = values[-1] + (values[-1] - values[-2]) / (ratio - 1.0)
    else:
        lam_beta = values[-1]
    n_fine = _resolution_for(bracket0[1], levels[-1])
    d = 1e-3 * values[-1]
    slope = (
        mu1_of_lambda(values[-1] + d, beta, n=n_fine).eigenvalue_mu
        - mu1_of_lambda(values[-1] - d, beta, n=n_fine).eigenvalue_mu
    ) / (2 * d)
    return CriticalCoupling(beta, lam_beta, brackets[-1], slope, list(levels), values)


def muhat_monotonicity(beta: float, R_list: Sequence[float], n: int = 800) -> list:
    """[(R, mu_hat_1(R))] with mu_hat_1(R) = mu_1(R^2) / R^2."""
    R_list = list(R_list)
    if any(b <= a for a, b in zip(R_list, R_list[1:])) or min(R_list) <= 0:
        raise ValueError("R_list must be positive and increasing")
    out = []
    for R in R_list:
        lam = R * R
        mu = mu1_of_lambda(lam, beta, n=_resolution_for(lam, n)).eigenvalue_mu
        out.append((R, mu / lam))
    return out


# ---------------------------------------------------------------------------
# Far-field quadratic form


def qbreve_infinity(beta: float, Finf=None, r_max: float = 40.0, n: int = 16000):
    """(direct value, closed form) for the entire-plane test pair.

    With A = F', B = F / r the form
        4 pi int [A'^2 + B'^2 + 2 (B - A)^2 / r^2 + (F^2 - 1)(A^2 + B^2)
                  + 2 beta F^2 A^2] r dr
    is evaluated on [0, r_max] by quadrature, alongside the closed form
    8 pi (beta - 1) int F^2 A^2 r dr obtained from the equations for A, B.
    """
    if Finf is None:
        Finf = entire_profile(r_max)
    hfun = getattr(Finf, "spline", None)
    if hfun is None:
        raise ValueError("Finf must come from entire_profile (needs the h = F/r interpolant)")
    R = Finf.profile.domain_radius_R
    grid = RadialGrid.uniform(R, n)
    r = grid.nodes
    h, dh = hfun(r)
    F = r * h
    # h'' from h'' + 3 h'/r = -(1 - r^2 h^2) h, with the r -> 0 limit -h(0)/4
    d2h = np.empty_like(r)
    nz = r > 0
    d2h[nz] = -3.0 * dh[nz] / r[nz] - (1.0 - F[nz] ** 2) * h[nz]
    d2h[~nz] = -h[~nz] / 4.0
    A = h + r * dh  # F'
    dA = 2.0 * dh + r * d2h  # F''
    B = h
    dB = dh
    # (B - A) / r = -h'
    integrand = dA**2 + dB**2 + 2.0 * dh**2 + (F**2 - 1.0) * (A**2 + B**2) + 2.0 * beta * F**2 * A**2
    direct = 4.0 * math.pi * grid.integrate(integrand)
    closed = 8.0 * math.pi * (beta - 1.0) * grid.integrate(F**2 * A**2)
    return direct, closed


# ---------------------------------------------------------------------------
# Reports


def sweep_to_csv(rows: Sequence[SpectralResult], path=None, R_of=math.sqrt) -> str:
    lines = ["beta,lambda,R,mode,index,mu,residual"]
    for s in rows:
        lines.append(
            f"{s.beta:.17g},{s.lam:.17g},{R_of(s.lam):.17g},{s.mode_index},{s.index},"
            f"{s.eigenvalue_mu:.17g},{s.solver_residual:.17g}"
        )
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def critical_coupling_to_json(cc: CriticalCoupling, path=None) -> str:
    text = json.dumps(cc.to_dict(), sort_keys=True, indent=2) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
