"""Two-component energy on the disk: discretization, minimization, diagnostics.

Polar tensor grid with radial nodes r_j = (j + 1/2) h, j = 0..n_r-1, and
h = R / (n_r - 1/2) so that the last ring sits on the boundary r = R. The
origin is not a node. Each node owns the annular sector between its
neighbouring midpoints (the boundary ring owns a half cell). The discrete
energy is

    E = 1/2 sum_edges k_e |psi_a - psi_b|^2
        + sum_nodes w [ lam/4 (|Psi|^2 - 1)^2 + lam beta/4 (|psi_+|^2 - |psi_-|^2)^2 ]

and every derived quantity (residual, Hessian, line search) is exact for
this functional.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from . import kernels
from .radial_profile import profile_f_lambda

__all__ = [
    "DiskGrid",
    "DiskField",
    "EnergyBreakdown",
    "CoreEnergyEstimate",
    "UnderResolvedError",
    "InvalidFieldError",
    "boundary_data",
    "initial_field",
    "energy",
    "identity_potential",
    "gradient",
    "residual",
    "residual_norm",
    "minimize",
    "minimize_gl",
    "core_energy",
    "spin_l2",
    "find_zeros",
    "symmetric_solution",
    "gl_energy",
    "field_to_csv",
    "field_metadata",
    "plot_script",
]


class UnderResolvedError(RuntimeError):
    pass


class InvalidFieldError(ValueError):
    pass


@dataclass(frozen=True)
class DiskGrid:
    n_r: int
    n_theta: int
    radius: float = 1.0

    def __post_init__(self):
        if self.n_r < 3:
            raise ValueError("n_r must be >= 3")
        if self.n_theta < 4 or self.n_theta % 2:
            raise ValueError("n_theta must be even and >= 4")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def h(self) -> float:
        return self.radius / (self.n_r - 0.5)

    @property
    def dtheta(self) -> float:
        return 2.0 * math.pi / self.n_theta

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.n_r) + 0.5) * self.h

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.n_theta) * self.dtheta

    @property
    def ring_weights(self) -> np.ndarray:
        """Cell area per node on each ring."""
        r, h, dt = self.r, self.h, self.dtheta
        w = r * h * dt
        R = self.radius
        w[-1] = 0.5 * (R * R - (R - 0.5 * h) ** 2) * dt
        return w

    @property
    def weights(self) -> np.ndarray:
        return np.repeat(self.ring_weights[:, None], self.n_theta, axis=1)

    @property
    def radial_coupling(self) -> np.ndarray:
        # edge (j, j+1): midpoint arc length over spacing
        return (np.arange(1, self.n_r) * self.h) * self.dtheta / self.h

    @property
    def angular_coupling(self) -> np.ndarray:
        r, h, dt = self.r, self.h, self.dtheta
        c = h / (r * dt)
        c[-1] = 0.5 * h / (self.radius * dt)
        return c

    def coords(self):
        """(x + i y) at every node, shape (n_r, n_theta)."""
        return self.r[:, None] * np.exp(1j * self.theta[None, :])

    def cell_diameter(self, z: complex) -> float:
        rr = min(abs(z), self.radius)
        return math.hypot(self.h, max(rr, 0.5 * self.h) * self.dtheta)

    def refined(self, factor: int = 2) -> "DiskGrid":
        return DiskGrid(int(round((self.n_r - 0.5) * factor + 0.5)), self.n_theta * factor, self.radius)


@dataclass
class DiskField:
    grid: DiskGrid
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    degrees: tuple
    epsilon: float
    beta: float
    info: dict = field(default_factory=dict)

    @property
    def lam(self) -> float:
        return self.epsilon**-2

    def copy(self, **kw) -> "DiskField":
        out = replace(self, psi_plus=self.psi_plus.copy(), psi_minus=self.psi_minus.copy(), info=dict(self.info))
        for k, v in kw.items():
            setattr(out, k, v)
        return out

    def boundary_ok(self) -> bool:
        bp, bm = boundary_data(*self.degrees, self.grid)
        return bool(np.array_equal(self.psi_plus[-1], bp) and np.array_equal(self.psi_minus[-1], bm))


@dataclass
class EnergyBreakdown:
    dirichlet: float
    potential_iso: float
    potential_spin: float
    total: float
    spin_l2_scaled: float

    def to_dict(self) -> dict:
        return {
            "dirichlet": self.dirichlet,
            "potential_iso": self.potential_iso,
            "potential_spin": self.potential_spin,
            "total": self.total,
            "spin_l2_scaled": self.spin_l2_scaled,
        }


@dataclass
class CoreEnergyEstimate:
    degrees: tuple
    beta: float
    samples: list
    Q_extrapolated: float
    fit_residual: float
    c1: float = float("nan")
    fields: list = field(default_factory=list, repr=False)


# ---------------------------------------------------------------------------
# Data and energy


def boundary_data(n_plus: int, n_minus: int, grid: DiskGrid):
    if n_plus not in (0, 1) or n_minus not in (0, 1):
        raise ValueError("degrees must be 0 or 1")
    th = grid.theta
    s = 1.0 / math.sqrt(2.0)
    bp = s * np.exp(1j * n_plus * th) if n_plus else np.full(grid.n_theta, s, dtype=complex)
    bm = s * np.exp(1j * n_minus * th) if n_minus else np.full(grid.n_theta, s, dtype=complex)
    return bp, bm


def _check_params(epsilon, beta):
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not beta > 0:
        raise ValueError("beta must be positive")


def initial_field(grid: DiskGrid, degrees=(1, 1), epsilon: float = 0.1, beta: float = 1.0,
                  perturbation: Optional[tuple] = None) -> DiskField:
    """(1/sqrt2)(g e^{i n+ theta}, g e^{i n- theta}) with g = min(r/eps, 1) on wound components.

    ``perturbation`` = (t, a0, a2) on the radial nodes adds t (w, -w) with
    w = a0 - a2 e^{2 i theta}; it vanishes on the boundary ring.
    """
    _check_params(epsilon, beta)
    n_p, n_m = degrees
    bp, bm = boundary_data(n_p, n_m, grid)
    g = np.minimum(grid.r / (epsilon * grid.radius), 1.0)[:, None]
    pp = (g if n_p else 1.0) * bp[None, :]
    pm = (g if n_m else 1.0) * bm[None, :]
    shape = (grid.n_r, grid.n_theta)
    pp = np.array(np.broadcast_to(pp, shape), dtype=complex)
    pm = np.array(np.broadcast_to(pm, shape), dtype=complex)
    if perturbation is not None:
        t, a0, a2 = perturbation
        w = np.asarray(a0)[:, None] - np.asarray(a2)[:, None] * np.exp(2j * grid.theta)[None, :]
        w[-1] = 0.0
        pp = pp + t * w
        pm = pm - t * w
    pp[-1], pm[-1] = bp, bm
    return DiskField(grid, pp, pm, (n_p, n_m), float(epsilon), float(beta))


def _terms(grid: DiskGrid, pp, pm, lam, beta):
    return kernels.energy_gradient(pp, pm, grid.radial_coupling, grid.angular_coupling,
                                   grid.ring_weights, lam, beta)


def spin_l2(fld: DiskField) -> float:
    """eps^-2 int S^2 with S = (|psi_-|^2 - |psi_+|^2) / 2."""
    S = 0.5 * (np.abs(fld.psi_minus) ** 2 - np.abs(fld.psi_plus) ** 2)
    return fld.lam * float(np.sum(fld.grid.weights * S * S))


def energy(fld: DiskField) -> EnergyBreakdown:
    d, iso, spin, _, _ = _terms(fld.grid, fld.psi_plus, fld.psi_minus, fld.lam, fld.beta)
    return EnergyBreakdown(d, iso, spin, d + iso + spin, spin_l2(fld))


def identity_potential(fld: DiskField) -> float:
    """Potential energy written as lam/4 int [2 sum (|psi_pm|^2 - 1/2)^2 + 4 (beta - 1) S^2]."""
    rp = np.abs(fld.psi_plus) ** 2
    rm = np.abs(fld.psi_minus) ** 2
    S = 0.5 * (rm - rp)
    dens = 2.0 * ((rp - 0.5) ** 2 + (rm - 0.5) ** 2) + 4.0 * (fld.beta - 1.0) * S * S
    return 0.25 * fld.lam * float(np.sum(fld.grid.weights * dens))


def gl_energy(grid: DiskGrid, u: np.ndarray, epsilon: float) -> float:
    """Single-component energy 1/2 int |grad u|^2 + 1/(4 eps^2) int (|u|^2 - 1)^2."""
    a, c = grid.radial_coupling, grid.angular_coupling
    Ku = kernels.stiffness_apply(u, a, c)
    d = 0.5 * float(np.sum((u.conj() * Ku).real))
    return d + 0.25 * epsilon**-2 * float(np.sum(grid.weights * (np.abs(u) ** 2 - 1.0) ** 2))


def gradient(fld: DiskField):
    """Real-coordinate gradient (dE/dRe + i dE/dIm) with boundary rows zeroed."""
    _, _, _, gp, gm = _terms(fld.grid, fld.psi_plus, fld.psi_minus, fld.lam, fld.beta)
    gp[-1] = 0.0
    gm[-1] = 0.0
    return gp, gm


def residual(fld: DiskField):
    """Discrete -Lap psi_pm minus the right-hand sides of the Euler-Lagrange system."""
    gp, gm = gradient(fld)
    W = fld.grid.weights
    return gp / W, gm / W


def residual_norm(fld: DiskField) -> float:
    """Weighted L2 norm of the residual, sqrt(sum w |res|^2)."""
    gp, gm = gradient(fld)
    W = fld.grid.weights
    return math.sqrt(float(np.sum((np.abs(gp) ** 2 + np.abs(gm) ** 2) / W)))


# ---------------------------------------------------------------------------
# Minimization


class _Preconditioner:
    """(K + shift W)^{-1} on interior rings: FFT in theta, tridiagonal in r."""

    def __init__(self, grid: DiskGrid, shift: float):
        a = grid.radial_coupling
        c = grid.angular_coupling[:-1]
        w = grid.ring_weights[:-1]
        m = np.arange(grid.n_theta)
        sym = 2.0 - 2.0 * np.cos(m * grid.dtheta)
        base = a.copy()  # a[j] couples interior ring j to j+1 (boundary for the last)
        base[1:] += a[:-1]
        self.diag = base[None, :] + sym[:, None] * c[None, :] + shift * w[None, :]
        self.sub = -a[:-1].copy()

    def __call__(self, g):
        gh = np.fft.fft(g[:-1], axis=1).T
        x = kernels.tridiag_solve(self.sub, self.diag, np.ascontiguousarray(gh))
        out = np.zeros_like(g)
        out[:-1] = np.fft.ifft(x.T, axis=1)
        return out


def _line_poly(grid, pp, pm, dp, dm, lam, beta):
    """Coefficients (low to high) of E(x + alpha d), a quartic in alpha."""
    a, c, W = grid.radial_coupling, grid.angular_coupling, grid.weights
    Kp, Km = kernels.stiffness_apply(pp, a, c), kernels.stiffness_apply(pm, a, c)
    Kdp, Kdm = kernels.stiffness_apply(dp, a, c), kernels.stiffness_apply(dm, a, c)
    re = lambda u, v: float(np.sum((u.conj() * v).real))  # noqa: E731
    q0 = 0.5 * (re(pp, Kp) + re(pm, Km))
    q1 = re(dp, Kp) + re(dm, Km)
    q2 = 0.5 * (re(dp, Kdp) + re(dm, Kdm))
    Ap, Am = np.abs(pp) ** 2, np.abs(pm) ** 2
    Bp, Bm = (pp.conj() * dp).real, (pm.conj() * dm).real
    Cp, Cm = np.abs(dp) ** 2, np.abs(dm) ** 2

    def sq(u0, u1, u2, coef):
        return coef * np.array([
            np.sum(W * u0 * u0),
            np.sum(W * 2 * u0 * u1),
            np.sum(W * (u1 * u1 + 2 * u0 * u2)),
            np.sum(W * 2 * u1 * u2),
            np.sum(W * u2 * u2),
        ])

    iso = sq(Ap + Am - 1.0, 2 * (Bp + Bm), Cp + Cm, 0.25 * lam)
    spin = sq(Ap - Am, 2 * (Bp - Bm), Cp - Cm, 0.25 * lam * beta)
    return np.array([q0, q1, q2, 0.0, 0.0]) + iso + spin


def _quartic_argmin(p):
    dp = np.array([p[1], 2 * p[2], 3 * p[3], 4 * p[4]])
    roots = np.roots(dp[::-1]) if abs(p[4]) > 0 else np.roots(dp[:3][::-1])
    cands = [float(z.real) for z in np.atleast_1d(roots) if abs(z.imag) <= 1e-10 * max(1.0, abs(z.real)) and z.real > 0]
    if not cands:
        return None
    vals = [np.polyval(p[::-1], x) for x in cands]
    return cands[int(np.argmin(vals))]


def minimize(initial: DiskField, tol: float = 1e-6, max_iter: int = 20000,
             restart: int = 50, shift: Optional[float] = None, armijo: float = 1e-4) -> DiskField:
    """Preconditioned Polak-Ribiere conjugate gradient on the discrete energy.

    The line search minimizes the exact quartic E(x + alpha d); the step is
    accepted when the polynomial decrease passes an Armijo test (and the
    recomputed energy agrees), otherwise the search direction is reset to
    steepest descent. Stops once the
    weighted residual norm is below ``tol``.
    """
    if not initial.boundary_ok():
        raise InvalidFieldError("initial field does not carry the boundary data")
    grid, lam, beta = initial.grid, initial.lam, initial.beta
    W = grid.weights
    P = _Preconditioner(grid, lam if shift is None else shift)
    pp, pm = initial.psi_plus.copy(), initial.psi_minus.copy()

    def evaluate(pp, pm):
        d, iso, sp, gp, gm = _terms(grid, pp, pm, lam, beta)
        gp[-1] = 0.0
        gm[-1] = 0.0
        return d + iso + sp, gp, gm

    E, gp, gm = evaluate(pp, pm)
    zp, zm = P(gp), P(gm)
    dp, dm = -zp, -zm
    gz = float(np.sum((gp.conj() * zp).real) + np.sum((gm.conj() * zm).real))
    history = [E]
    rn = math.sqrt(float(np.sum((np.abs(gp) ** 2 + np.abs(gm) ** 2) / W)))
    it = 0
    since = 0
    converged = rn <= tol
    while not converged and it < max_iter:
        it += 1
        poly = _line_poly(grid, pp, pm, dp, dm, lam, beta)
        alpha = _quartic_argmin(poly) if poly[1] < 0 else None
        accepted = False
        if alpha is not None:
            # decide on the exact polynomial decrease; differencing two
            # recomputed energies loses everything below round-off of E
            drop = sum(poly[k] * alpha**k for k in range(1, 5))
            if drop <= armijo * alpha * poly[1]:
                np_, nm_ = pp + alpha * dp, pm + alpha * dm
                En, gpn, gmn = evaluate(np_, nm_)
                accepted = En <= E + 1e-12 * abs(E) + abs(drop)
        if not accepted:
            if since == 0:
                break  # steepest descent failed: at round-off level
            dp, dm = -zp, -zm
            since = 0
            continue
        pp, pm, E = np_, nm_, En
        history.append(E)
        zpn, zmn = P(gpn), P(gmn)
        gzn = float(np.sum((gpn.conj() * zpn).real) + np.sum((gmn.conj() * zmn).real))
        num = gzn - float(np.sum((gpn.conj() * zp).real) + np.sum((gmn.conj() * zm).real))
        bk = max(0.0, num / gz) if gz > 0 else 0.0
        since += 1
        if since >= restart:
            bk, since = 0.0, 0
        gp, gm, zp, zm, gz = gpn, gmn, zpn, zmn, gzn
        dp, dm = -zp + bk * dp, -zm + bk * dm
        rn = math.sqrt(float(np.sum((np.abs(gp) ** 2 + np.abs(gm) ** 2) / W)))
        converged = rn <= tol
    out = initial.copy()
    out.psi_plus, out.psi_minus = pp, pm
    out.info.update(converged=bool(converged), iterations=it, residual_norm=rn, energy=E,
                    energy_history=history)
    return out


def minimize_gl(epsilon: float, tol: float = 1e-6, grid: Optional[DiskGrid] = None, max_iter: int = 20000):
    """Minimize the single-component energy with boundary data e^{i theta}.

    Runs on the diagonal psi_+ = psi_- = u / sqrt 2, where the two-component
    energy reduces exactly to the single-component one; the update keeps the
    diagonal invariant. Returns (u, I_GL, field).
    """
    grid = grid or DiskGrid(256, 256)
    f0 = initial_field(grid, (1, 1), epsilon, 1.0)
    f = minimize(f0, tol=tol / math.sqrt(2.0), max_iter=max_iter)
    u = math.sqrt(2.0) * f.psi_plus
    return u, gl_energy(grid, u, epsilon), f


def _ground_pair_on(grid: DiskGrid, lam: float, beta: float):
    from .spectral import mu1_of_lambda  # local import keeps module load light

    n = max(400, int(25 * math.sqrt(lam)))
    n += n % 2
    res = mu1_of_lambda(lam, beta, n=n)
    rg = res.eigenvector.grid.nodes
    r = grid.r / grid.radius
    a0 = np.interp(r, rg, res.eigenvector.a0)
    a2 = np.interp(r, rg, res.eigenvector.a2)
    return a0, a2


def minimize_degrees(degrees, epsilon, beta, grid: Optional[DiskGrid] = None, tol: float = 1e-6,
                     max_iter: int = 20000, kick: float = 0.05) -> DiskField:
    """Minimize with the standard initial field; (1,1) data at beta < 1 gets an antipodal kick
    along the ground mode-1 pair to leave the symmetric saddle."""
    grid = grid or DiskGrid(256, 256)
    pert = None
    if tuple(degrees) == (1, 1) and beta < 1:
        a0, a2 = _ground_pair_on(grid, epsilon**-2, beta)
        scale = 1.0 / max(np.max(np.abs(a0)), 1e-300)
        pert = (kick, a0 * scale, a2 * scale)
    f0 = initial_field(grid, tuple(degrees), epsilon, beta, perturbation=pert)
    return minimize(f0, tol=tol, max_iter=max_iter)


def core_energy(degrees, beta: float, eps_list: Sequence[float], tol: float = 1e-6,
                grid: Optional[DiskGrid] = None, fields: Optional[Sequence[DiskField]] = None) -> CoreEnergyEstimate:
    """Fit I(eps) - (pi/2)(n+ + n-)|ln eps| = Q + c1 eps by least squares."""
    eps = [float(e) for e in eps_list]
    if len(eps) < 3:
        raise ValueError("need at least three epsilon values")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_list must be decreasing")
    grid = grid or DiskGrid(256, 256)
    if min(eps) < 4 * grid.h:
        raise UnderResolvedError(f"smallest epsilon {min(eps)} below 4 grid spacings ({4 * grid.h:.4g})")
    n_tot = sum(degrees)
    samples, flds = [], []
    for i, e in enumerate(eps):
        f = fields[i] if fields is not None else minimize_degrees(degrees, e, beta, grid, tol)
        flds.append(f)
        samples.append((e, energy(f).total))
    x = np.array([s[0] for s in samples])
    y = np.array([s[1] for s in samples]) - 0.5 * math.pi * n_tot * np.abs(np.log(x))
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    dy = np.diff(y)
    if np.any(dy > fit) and np.any(dy < -fit):
        raise UnderResolvedError(f"non-monotone core-energy sequence {y.tolist()}")
    return CoreEnergyEstimate(tuple(degrees), float(beta), samples, float(coef[0]), fit, float(coef[1]), flds)


# ---------------------------------------------------------------------------
# Symmetric vortex


def _discrete_profile(grid: DiskGrid, lam: float, f0: np.ndarray, tol: float = 1e-13, max_iter: int = 50):
    """Radial Newton for the exact discrete critical point of the form f_j e^{i theta}."""
    a = grid.radial_coupling
    c = grid.angular_coupling
    w = grid.ring_weights
    sym = 2.0 - 2.0 * math.cos(grid.dtheta)
    f = f0.copy()
    f[-1] = 1.0
    n = grid.n_r - 1
    for _ in range(max_iter):
        g = c * sym * f + lam * w * (f * f - 1.0) * f
        flux = a * (f[1:] - f[:-1])
        g[:-1] -= flux
        g[1:] += flux
        g = g[:n]
        diag = c[:n] * sym + lam * w[:n] * (3 * f[:n] ** 2 - 1.0) + a
        diag[1:] += a[: n - 1]
        ab = np.zeros((3, n))
        ab[0, 1:] = -a[: n - 1]
        ab[1] = diag
        ab[2, :-1] = -a[: n - 1]
        step = sla.solve_banded((1, 1), ab, -g)
        f[:n] += step
        if np.max(np.abs(step)) <= tol:
            break
    return f


def symmetric_solution(lam: float, grid: Optional[DiskGrid] = None, beta: float = 1.0,
                       discrete: bool = False, n_profile: int = 4000) -> DiskField:
    """U_lam = (u/sqrt2, u/sqrt2) with u = f_lam(r) e^{i theta}.

    With ``discrete`` the radial factor is polished to the exact critical point
    of the discrete energy, which the linearization and Newton code need.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    grid = grid or DiskGrid(256, 256)
    if grid.radius != 1.0:
        raise ValueError("symmetric_solution is defined on the unit disk")
    prof = profile_f_lambda(lam, n=n_profile)
    f = np.interp(grid.r, prof.grid.nodes, prof.values)
    f[-1] = 1.0
    if discrete:
        f = _discrete_profile(grid, lam, f)
    e = np.exp(1j * grid.theta)[None, :] / math.sqrt(2.0)
    u = f[:, None] * e
    fld = DiskField(grid, u.copy(), u.copy(), (1, 1), 1.0 / math.sqrt(lam), float(beta))
    fld.psi_plus[-1], fld.psi_minus[-1] = boundary_data(1, 1, grid)
    fld.info["radial_factor"] = f
    return fld


# ---------------------------------------------------------------------------
# Zeros


def _bilinear_zero(c00, c10, c11, c01):
    """Zero of the bilinear interpolant on [0,1]^2 (s radial, t angular) by Newton."""
    s, t = 0.5, 0.5
    for _ in range(30):
        v = (1 - s) * (1 - t) * c00 + s * (1 - t) * c10 + s * t * c11 + (1 - s) * t * c01
        ds = (1 - t) * (c10 - c00) + t * (c11 - c01)
        dt = (1 - s) * (c01 - c00) + s * (c11 - c10)
        J = np.array([[ds.real, dt.real], [ds.imag, dt.imag]])
        try:
            step = np.linalg.solve(J, [-v.real, -v.imag])
        except np.linalg.LinAlgError:
            break
        s, t = s + step[0], t + step[1]
        if abs(step[0]) + abs(step[1]) < 1e-14:
            break
    return min(max(s, 0.0), 1.0), min(max(t, 0.0), 1.0)


def _zeros_of(grid: DiskGrid, psi: np.ndarray):
    if np.min(np.abs(psi[-1])) < 1e-12:
        raise InvalidFieldError("field vanishes on the boundary ring")
    # one phase increment per edge, reused with opposite sign by the
    # neighbouring cell, so cell windings always add up consistently
    dA = np.angle(np.roll(psi, -1, axis=1) * psi.conj())  # (j,k) -> (j,k+1)
    dR = np.angle(psi[1:] * psi[:-1].conj())  # (j,k) -> (j+1,k)
    zs = []
    w0 = int(round(dA[0].sum() / (2 * np.pi)))
    if w0 != 0:
        # central polygon: fit a + b z + c conj(z) on the innermost ring
        z = grid.coords()[0]
        A = np.vstack([np.ones_like(z), z, z.conj()]).T
        (a, b, c), *_ = np.linalg.lstsq(A, psi[0], rcond=None)
        # a + (b + c) x + i (b - c) y = 0
        M = np.array([[(b + c).real, -(b - c).imag], [(b + c).imag, (b - c).real]])
        xy = np.linalg.solve(M, [-a.real, -a.imag])
        zs.append((complex(xy[0], xy[1]), w0))
    circ = dR + dA[1:] - np.roll(dR, -1, axis=1) - dA[:-1]
    wind = np.rint(circ / (2 * np.pi)).astype(int)
    nt = grid.n_theta
    r, th = grid.r, grid.theta
    for j, k in zip(*np.nonzero(wind)):
        k1 = (k + 1) % nt
        s_, t_ = _bilinear_zero(psi[j, k], psi[j + 1, k], psi[j + 1, k1], psi[j, k1])
        rr = r[j] + s_ * grid.h
        tt = th[k] + t_ * grid.dtheta
        zs.append((rr * complex(math.cos(tt), math.sin(tt)), int(wind[j, k])))
    return zs


def find_zeros(fld: DiskField):
    """Zeros of each component: ([(z, winding), ...] for psi_+, same for psi_-)."""
    return _zeros_of(fld.grid, fld.psi_plus), _zeros_of(fld.grid, fld.psi_minus)


# ---------------------------------------------------------------------------
# Snapshots


def field_metadata(fld: DiskField) -> dict:
    return {
        "epsilon": fld.epsilon,
        "beta": fld.beta,
        "degrees": list(fld.degrees),
        "grid": {"n_r": fld.grid.n_r, "n_theta": fld.grid.n_theta, "radius": fld.grid.radius},
        "energy": energy(fld).to_dict(),
    }


def field_to_csv(fld: DiskField, path=None, meta_path=None) -> str:
    lines = ["r,theta,re_psi_plus,im_psi_plus,re_psi_minus,im_psi_minus"]
    g = fld.grid
    for j, rj in enumerate(g.r):
        for k, tk in enumerate(g.theta):
            p, m = fld.psi_plus[j, k], fld.psi_minus[j, k]
            lines.append(f"{rj:.17g},{tk:.17g},{p.real:.17g},{p.imag:.17g},{m.real:.17g},{m.imag:.17g}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    if meta_path is not None:
        with open(meta_path, "w") as fh:
            json.dump(field_metadata(fld), fh, sort_keys=True, indent=2)
            fh.write("\n")
    return text


def plot_script(csv_name: str) -> str:
    """gnuplot script drawing |psi_+|, |psi_-| and S from a snapshot CSV."""
    return f"""set datafile separator ','
set view map
set size ratio -1
set pm3d map
set multiplot layout 1,3
set title '|psi_+|'
splot '{csv_name}' every ::1 using ($1*cos($2)):($1*sin($2)):(sqrt($3**2+$4**2)) with points pt 5 ps 0.3 palette notitle
set title '|psi_-|'
splot '{csv_name}' every ::1 using ($1*cos($2)):($1*sin($2)):(sqrt($5**2+$6**2)) with points pt 5 ps 0.3 palette notitle
set title 'S'
splot '{csv_name}' every ::1 using ($1*cos($2)):($1*sin($2)):(0.5*(($5**2+$6**2)-($3**2+$4**2))) with points pt 5 ps 0.3 palette notitle
unset multiplot
"""
