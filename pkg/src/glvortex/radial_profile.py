"""Radial equivariant profile of the degree-one vortex.

The profile solves the singular boundary-value problem

    -F'' - F'/r + F/r**2 = (1 - F**2) F,    F(0) = 0,  F(R) = R_value

and is obtained by shooting on the Cauchy problem phi(0) = 0, phi'(0) = b.
Near the origin the Cauchy problem is singular, so the solution on
|r| <= rho = min(1/2, 1/(2b)) is built from the fixed point of the integral
map acting on h = phi / r (a truncated power series in r**2); beyond rho the
regular ODE is stepped outward.

Shooting is exponentially ill-conditioned for large R (the sensitivity
d phi(R)/db grows like exp(sqrt(2) R)), so large domains go through a
collocation solve instead (see ``collocation_bvp``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_bvp as _scipy_solve_bvp
from scipy.integrate import solve_ivp

__all__ = [
    "RadialGrid",
    "RadialProfile",
    "ShootingResult",
    "CauchySolution",
    "PicardError",
    "BracketError",
    "solve_cauchy",
    "derivative_in_b",
    "solve_bvp",
    "collocation_bvp",
    "profile_f_lambda",
    "entire_profile",
    "profile_to_csv",
    "profile_from_csv",
]

BLOWUP_THRESHOLD = 1.0e3
PICARD_MAX_ITER = 60
PICARD_DEGREE = 40  # number of even coefficients kept in h(r) = sum c_k r^(2k)
SHOOTING_BRACKET = (1.0e-6, 2.0)
# beyond this radius shooting cannot reach a 1e-10 residual in double precision
SHOOTING_MAX_R = 12.0


class PicardError(RuntimeError):
    """Fixed-point iteration near the origin failed to converge."""


class BracketError(RuntimeError):
    """The shooting bracket did not straddle the boundary value."""


@dataclass(frozen=True)
class RadialGrid:
    """Nodes 0 = r_0 < ... < r_N = R with weights for int g(r) r dr.

    The weights are composite Simpson weights applied to g(r) r, which is
    exact for g of degree <= 2 on every pair of cells.
    """

    nodes: np.ndarray
    quadrature_weights: np.ndarray

    @classmethod
    def uniform(cls, R: float, n: int) -> "RadialGrid":
        if n < 2 or n % 2:
            raise ValueError("number of cells must be even and >= 2")
        r = np.linspace(0.0, R, n + 1)
        h = R / n
        c = np.ones(n + 1)
        c[1:-1:2] = 4.0
        c[2:-1:2] = 2.0
        w = c * h / 3.0 * r
        return cls(r, w)

    @property
    def R(self) -> float:
        return float(self.nodes[-1])

    @property
    def step(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    def integrate(self, g: np.ndarray) -> float:
        """Approximate int_0^R g(r) r dr."""
        return float(np.dot(self.quadrature_weights, g))


@dataclass(frozen=True)
class RadialProfile:
    grid: RadialGrid
    values: np.ndarray
    slope_b: float
    domain_radius_R: float

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def derivative(self) -> np.ndarray:
        """Second-order finite-difference F' on the grid."""
        return np.gradient(self.values, self.grid.nodes, edge_order=2)


@dataclass
class CauchySolution:
    """Samples of phi(., b) (and optionally d phi / db) on a grid."""

    b: float
    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    blowup_radius: Optional[float] = None
    picard_distances: list = field(default_factory=list)
    rho: float = 0.0
    h: Optional[np.ndarray] = None  # d phi / db when requested
    dh: Optional[np.ndarray] = None


@dataclass
class ShootingResult:
    profile: RadialProfile
    b_of_R: float
    residual: float
    blowup_radius: Optional[float] = None


# ---------------------------------------------------------------------------
# Picard stage near the origin


def _picard_radius(b: float) -> float:
    return 0.5 if abs(b) <= 1.0 else 0.5 / abs(b)


def _poly_even_eval(c: np.ndarray, r: np.ndarray) -> np.ndarray:
    # c[k] multiplies r^(2k)
    return np.polynomial.polynomial.polyval(np.asarray(r, float) ** 2, c)


def _poly_even_deriv(c: np.ndarray, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, float)
    k = np.arange(len(c))
    dc = (2 * k * c)[1:]  # coefficient of r^(2k-1) = r * r^(2(k-1))
    return r * np.polynomial.polynomial.polyval(r**2, dc)


def _picard_map(c: np.ndarray, b: float, dc: Optional[np.ndarray] = None):
    """One application of T[h] = b + 1/2 int_0^r (s^2/r^2 - 1) s g(s) ds.

    g = (1 - s^2 h^2) h is formed in the r^2-power basis:
    int_0^r s^(2k+3)/r^2 - s^(2k+1) ds = r^(2k+2) (1/(2k+4) - 1/(2k+2)).
    The tangent map for d h / d b uses g' = (1 - 3 s^2 h^2) dh.
    """
    K = len(c)

    def mul(a, b_):
        out = np.zeros(K)
        prod = np.convolve(a, b_)[:K]
        out[: prod.size] = prod
        return out

    h2 = mul(c, c)
    r2h2 = np.concatenate(([0.0], h2[: K - 1]))  # multiply by r^2
    one_minus = -r2h2
    one_minus[0] += 1.0
    g = mul(one_minus, c)
    k = np.arange(K - 1)
    fac = 0.5 * (1.0 / (2 * k + 4) - 1.0 / (2 * k + 2))
    out = np.zeros(K)
    out[0] = b
    out[1:] = fac * g[: K - 1]
    if dc is None:
        return out, None
    one_minus3 = -3.0 * r2h2
    one_minus3[0] += 1.0
    dg = mul(one_minus3, dc)
    dout = np.zeros(K)
    dout[0] = 1.0
    dout[1:] = fac * dg[: K - 1]
    return out, dout


def _picard(b: float, tol: float, with_tangent: bool = False):
    rho = _picard_radius(b)
    probe = np.linspace(0.0, rho, 65)
    c = np.zeros(PICARD_DEGREE)
    c[0] = b
    dc = np.zeros(PICARD_DEGREE) if with_tangent else None
    if with_tangent:
        dc[0] = 1.0
    distances = []
    prev = _poly_even_eval(c, probe)
    for _ in range(PICARD_MAX_ITER):
        c, dc = _picard_map(c, b, dc)
        cur = _poly_even_eval(c, probe)
        d = float(np.max(np.abs(cur - prev)))
        distances.append(d)
        prev = cur
        if d <= tol * max(1.0, abs(b)) * 1e-3:
            break
    else:
        raise PicardError(
            f"Picard iteration not converged for b={b} after {PICARD_MAX_ITER} steps "
            f"(last distance {distances[-1]:.3e})"
        )
    if not np.all(np.isfinite(c)):
        raise PicardError(f"Picard iteration diverged for b={b}")
    return rho, c, dc, distances


# ---------------------------------------------------------------------------
# Cauchy problem


def _rhs(r, y):
    phi, dphi = y[0], y[1]
    return [dphi, -dphi / r + phi / r**2 - (1.0 - phi * phi) * phi]


def _rhs_tangent(r, y):
    phi, dphi, h, dh = y
    return [
        dphi,
        -dphi / r + phi / r**2 - (1.0 - phi * phi) * phi,
        dh,
        -dh / r + h / r**2 - (1.0 - 3.0 * phi * phi) * h,
    ]


def _blowup_event(r, y):
    return abs(y[0]) - BLOWUP_THRESHOLD


_blowup_event.terminal = True


def _rk4_fixed(fun, r0, y0, r1, step):
    n = max(1, int(math.ceil((r1 - r0) / step - 1e-12)))
    hstep = (r1 - r0) / n
    rs = r0 + hstep * np.arange(n + 1)
    ys = np.empty((len(y0), n + 1))
    y = np.asarray(y0, float)
    ys[:, 0] = y
    blow = None
    for i in range(n):
        r = rs[i]
        k1 = np.asarray(fun(r, y))
        k2 = np.asarray(fun(r + 0.5 * hstep, y + 0.5 * hstep * k1))
        k3 = np.asarray(fun(r + 0.5 * hstep, y + 0.5 * hstep * k2))
        k4 = np.asarray(fun(r + hstep, y + hstep * k3))
        y = y + hstep / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[:, i + 1] = y
        if not np.isfinite(y[0]) or abs(y[0]) > BLOWUP_THRESHOLD:
            blow = rs[i + 1]
            return rs[: i + 2], ys[:, : i + 2], blow
    return rs, ys, blow


def solve_cauchy(
    b: float,
    r_max: float,
    tol: float = 1e-10,
    r_eval: Optional[np.ndarray] = None,
    ode_tol: float = 1e-8,
    fixed_step: Optional[float] = None,
    tangent: bool = False,
) -> CauchySolution:
    """Sample phi(., b) on [0, min(r_max, R_b)).

    ``r_eval`` selects the output radii (default: 401 uniform points).
    ``fixed_step`` switches the outer stage from adaptive RK45 to classical
    RK4 with that step; outputs are then the RK4 nodes themselves when
    ``r_eval`` is None. ``tangent`` also propagates h = d phi / d b.
    """
    if b < 0:
        raise ValueError("b must be >= 0")
    if r_max <= 0 or tol <= 0:
        raise ValueError("r_max and tol must be positive")
    rho, c, dc, distances = _picard(b, tol, with_tangent=tangent)
    if r_eval is None and fixed_step is None:
        r_eval = np.linspace(0.0, r_max, 401)
    fun = _rhs_tangent if tangent else _rhs

    r_start = min(rho, r_max)
    y0 = [r_start * _poly_even_eval(c, r_start), _poly_even_eval(c, r_start) + r_start * _poly_even_deriv(c, r_start)]
    if tangent:
        y0 += [
            r_start * _poly_even_eval(dc, r_start),
            _poly_even_eval(dc, r_start) + r_start * _poly_even_deriv(dc, r_start),
        ]

    blow = None
    if fixed_step is not None:
        rs, ys, blow = _rk4_fixed(fun, r_start, y0, r_max, fixed_step) if r_max > r_start else (
            np.array([r_start]), np.array(y0)[:, None], None)
        if r_eval is None:
            inner = np.arange(0.0, r_start, fixed_step)
            r_eval = np.concatenate((inner, rs))
        outer_interp = None
    else:
        if r_max > r_start:
            sol = solve_ivp(
                fun, (r_start, r_max), y0, method="RK45", rtol=ode_tol, atol=ode_tol * 1e-2,
                dense_output=True, events=_blowup_event,
            )
            if sol.status == -1:
                raise RuntimeError(f"ODE integration failed for b={b}: {sol.message}")
            if sol.t_events[0].size:
                blow = float(sol.t_events[0][0])
            outer_interp = sol.sol
            r_end = float(sol.t[-1])
        else:
            outer_interp = None
            r_end = r_start

    r_eval = np.asarray(r_eval, float)
    limit = blow if blow is not None else np.inf
    r_eval = r_eval[r_eval < limit] if blow is not None else r_eval
    nvar = 4 if tangent else 2
    out = np.empty((nvar, r_eval.size))
    inner = r_eval <= r_start
    ri = r_eval[inner]
    hv = _poly_even_eval(c, ri)
    out[0, inner] = ri * hv
    out[1, inner] = hv + ri * _poly_even_deriv(c, ri)
    if tangent:
        dv = _poly_even_eval(dc, ri)
        out[2, inner] = ri * dv
        out[3, inner] = dv + ri * _poly_even_deriv(dc, ri)
    outer = ~inner
    if np.any(outer):
        ro = r_eval[outer]
        if fixed_step is not None:
            for v in range(nvar):
                out[v, outer] = np.interp(ro, rs, ys[v])
            exact = np.isin(ro, rs)
            if not np.all(exact):
                # cubic Hermite between RK4 nodes for phi (and h)
                for v in range(0, nvar, 2):
                    out[v, outer] = _hermite(rs, ys[v], ys[v + 1], ro)
        else:
            ro = np.minimum(ro, r_end)
            vals = outer_interp(ro)
            out[:, outer] = vals
    res = CauchySolution(
        b=b, r=r_eval, phi=out[0], dphi=out[1], blowup_radius=blow,
        picard_distances=distances, rho=rho,
    )
    if tangent:
        res.h = out[2]
        res.dh = out[3]
    return res


def _hermite(xs, ys, dys, x):
    i = np.clip(np.searchsorted(xs, x) - 1, 0, len(xs) - 2)
    x0, x1 = xs[i], xs[i + 1]
    hh = x1 - x0
    t = (x - x0) / hh
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    h11 = t**3 - t**2
    return h00 * ys[i] + h10 * hh * dys[i] + h01 * ys[i + 1] + h11 * hh * dys[i + 1]


def derivative_in_b(b: float, r_max: float, r_eval: Optional[np.ndarray] = None, ode_tol: float = 1e-10):
    """Return (r, h) with h = d phi / d b from the variational equation."""
    sol = solve_cauchy(b, r_max, r_eval=r_eval, ode_tol=ode_tol, tangent=True)
    if sol.blowup_radius is not None:
        raise RuntimeError(f"phi(., {b}) blew up at r={sol.blowup_radius:.4g} < r_max")
    return sol.r, sol.h


# ---------------------------------------------------------------------------
# Boundary-value problem


def _endpoint(b: float, R: float, ode_tol: float):
    sol = solve_cauchy(b, R, r_eval=np.array([R]), ode_tol=ode_tol)
    if sol.blowup_radius is not None:
        return None
    return float(sol.phi[-1])


def solve_bvp(R: float, tol: float = 1e-10, n: int = 400, ode_tol: float = 1e-11,
              boundary_value: float = 1.0) -> ShootingResult:
    """Shoot for b_R with phi(R, b_R) = boundary_value."""
    if R <= 0:
        raise ValueError("R must be positive")
    target = boundary_value

    def overshoot(v):
        return v is None or v > target

    lo, hi = SHOOTING_BRACKET
    v_lo, v_hi = _endpoint(lo, R, ode_tol), _endpoint(hi, R, ode_tol)
    if overshoot(v_lo) or not overshoot(v_hi):
        # widen once
        lo, hi = lo * 1e-3, hi * 10.0
        v_lo, v_hi = _endpoint(lo, R, ode_tol), _endpoint(hi, R, ode_tol)
        if overshoot(v_lo) or not overshoot(v_hi):
            raise BracketError(f"shooting bracket [{lo}, {hi}] does not straddle for R={R}")
    # bisection until the overshoot end has a finite endpoint value
    for _ in range(200):
        if v_hi is not None and (hi - lo) <= 1e-15 * hi:
            break
        mid = 0.5 * (lo + hi)
        v = _endpoint(mid, R, ode_tol)
        if overshoot(v):
            hi, v_hi = mid, v
        else:
            lo, v_lo = mid, v
        if v_hi is not None and v_lo is not None and abs(v_hi - v_lo) < 1e-2:
            break
    # secant / false position safeguarded by the bracket
    b = lo
    for _ in range(100):
        if v_hi is None:
            b = 0.5 * (lo + hi)
        else:
            b = lo + (target - v_lo) * (hi - lo) / (v_hi - v_lo)
            if not (lo < b < hi):
                b = 0.5 * (lo + hi)
        v = _endpoint(b, R, ode_tol)
        if v is not None and abs(v - target) <= tol:
            break
        if overshoot(v):
            hi, v_hi = b, v
        else:
            lo, v_lo = b, v
        if hi - lo <= 4e-16 * hi:
            # bracket collapsed at machine precision
            v = v if v is not None else v_lo
            b = b if v is not None else lo
            break
        # Illinois-style damping keeps false position from stalling
        if v_hi is not None and v_lo is not None and b == lo:
            v_hi = target + 0.5 * (v_hi - target)
    grid = RadialGrid.uniform(R, n)
    sol = solve_cauchy(b, R, r_eval=grid.nodes, ode_tol=ode_tol)
    if sol.blowup_radius is not None:
        raise BracketError(f"final shooting slope {b} blows up before R={R}")
    values = sol.phi.copy()
    residual = abs(values[-1] - target)
    return ShootingResult(RadialProfile(grid, values, b, R), b, residual, None)


def _initial_guess(r, R, boundary_value):
    F0 = r / np.sqrt(r * r + 2.0)
    F0 *= boundary_value / (R / math.sqrt(R * R + 2.0))
    return F0


def collocation_bvp(R: float, boundary_value: float = 1.0, tol: float = 1e-10, n: int = 400,
                    guess: Optional[RadialProfile] = None) -> ShootingResult:
    """Collocation solve of the profile equation in the variable h = F / r.

    h satisfies h'' + 3 h'/r = -(1 - r^2 h^2) h with h'(0) = 0 and
    h(R) = boundary_value / R; the 3/r term is handled as a singular term.
    """
    if R <= 0:
        raise ValueError("R must be positive")

    S = np.array([[0.0, 0.0], [0.0, -3.0]])

    def fun(x, y):
        return np.vstack((y[1], -(1.0 - x * x * y[0] ** 2) * y[0]))

    def bc(ya, yb):
        return np.array([ya[1], yb[0] * R - boundary_value])

    x = np.linspace(0.0, R, max(200, int(20 * R)))
    if guess is not None:
        F0 = np.interp(x, guess.r, guess.values, right=boundary_value)
    else:
        F0 = _initial_guess(x, R, boundary_value)
    h0 = np.empty_like(x)
    h0[1:] = F0[1:] / x[1:]
    h0[0] = h0[1]
    y0 = np.vstack((h0, np.gradient(h0, x)))
    y0[1, 0] = 0.0
    sol = _scipy_solve_bvp(fun, bc, x, y0, S=S, tol=tol, max_nodes=2_000_000, bc_tol=tol * 1e-2)
    if sol.status != 0:
        raise BracketError(f"collocation solve failed for R={R}: {sol.message}")
    grid = RadialGrid.uniform(R, n)
    hv = sol.sol(grid.nodes)[0]
    values = grid.nodes * hv
    values[-1] = boundary_value
    b = float(sol.sol(0.0)[0])
    residual = abs(float(R * sol.sol(R)[0]) - boundary_value)
    res = ShootingResult(RadialProfile(grid, values, b, R), b, residual, None)
    res.spline = sol.sol  # h and h' as callables, used by far-field diagnostics
    return res


def _solve_profile(R: float, n: int, tol: float) -> ShootingResult:
    if R <= SHOOTING_MAX_R:
        return solve_bvp(R, tol=tol, n=n)
    return collocation_bvp(R, 1.0, tol=tol, n=n)


def profile_f_lambda(lam: float, n: int = 400, tol: float = 1e-10) -> RadialProfile:
    """f_lambda(r) = F(sqrt(lam) r, sqrt(lam)) sampled on a uniform grid of [0, 1]."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    R = math.sqrt(lam)
    grid = RadialGrid.uniform(1.0, n)
    if R <= SHOOTING_MAX_R:
        res = solve_bvp(R, tol=tol, n=2)
        sol = solve_cauchy(res.b_of_R, R, r_eval=R * grid.nodes, ode_tol=1e-11)
        values = sol.phi.copy()
        b = res.b_of_R
    else:
        res = collocation_bvp(R, 1.0, tol=tol, n=2)
        values = R * grid.nodes * res.spline(R * grid.nodes)[0]
        b = res.b_of_R
    values[-1] = 1.0
    return RadialProfile(grid, values, R * b, 1.0)


def entire_profile(r_max: float = 40.0, tol: float = 1e-10, n: int = 8000) -> ShootingResult:
    """Approximate the entire-plane profile F_inf on [0, r_max].

    The far-field condition F(r_max) = sqrt(1 - 1/r_max^2) comes from the
    leading balance (1 - F^2) F ~ F / r^2.
    """
    if r_max < 20:
        raise ValueError("r_max must be >= 20")
    value = math.sqrt(1.0 - 1.0 / r_max**2)
    return collocation_bvp(r_max, value, tol=tol, n=n)


# ---------------------------------------------------------------------------
# CSV


def profile_to_csv(profile: RadialProfile, path=None) -> str:
    buf = io.StringIO()
    buf.write(f"# R={profile.domain_radius_R:.17g} b={profile.slope_b:.17g}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "F"])
    for r, F in zip(profile.grid.nodes, profile.values):
        w.writerow([f"{r:.17g}", f"{F:.17g}"])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def profile_from_csv(text: str) -> RadialProfile:
    lines = text.splitlines()
    head = lines[0].lstrip("#").split()
    meta = dict(item.split("=") for item in head)
    rows = list(csv.reader(lines[2:]))
    r = np.array([float(a) for a, _ in rows])
    F = np.array([float(b) for _, b in rows])
    # quadrature weights are recomputed for uniform grids
    n = len(r) - 1
    if n % 2 == 0 and np.allclose(np.diff(r), r[1] - r[0], rtol=1e-12, atol=0):
        grid = RadialGrid(r, RadialGrid.uniform(r[-1], n).quadrature_weights)
    else:
        grid = RadialGrid(r, np.zeros_like(r))
    return RadialProfile(grid, F, float(meta["b"]), float(meta["R"]))
