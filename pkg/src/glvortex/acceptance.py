"""Numerical acceptance checks, shared by the test-suite and ``glvortex verify``.

Each ``criterion_N`` returns a CriterionResult; heavy intermediate results
(critical couplings, disk minimizers) are cached per process.
"""

from __future__ import annotations

import functools
import math
import os
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import bifurcation as bif
from . import field2d as f2
from . import radial_profile as rp
from . import spectral as spc

__all__ = ["CriterionResult", "CRITERIA", "run_all"]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = "" if self.passed else " | " + "; ".join(self.failures)
        return f"[{tag}] criterion {self.number}: {self.title}{extra}"


class _Checker:
    def __init__(self, number, title):
        self.res = CriterionResult(number, title, True)

    def check(self, ok, what):
        if not ok:
            self.res.passed = False
            self.res.failures.append(what)
        return ok

    def note(self, **kw):
        self.res.details.update(kw)


# ---------------------------------------------------------------------------
# Shared, cached computations


@functools.lru_cache(maxsize=None)
def critical(beta: float, levels=(400, 800)):
    return spc.find_lambda_beta(beta, levels=levels)


DISK_GRID = f2.DiskGrid(256, 256)
BRANCH_GRID = f2.DiskGrid(64, 64)
BRANCH_T_MAX = 0.1
BRANCH_STEPS = 10


@functools.lru_cache(maxsize=None)
def disk_minimizer(degrees, epsilon, beta, n=256):
    return f2.minimize_degrees(degrees, epsilon, beta, f2.DiskGrid(n, n), tol=1e-6)


@functools.lru_cache(maxsize=None)
def gl_minimizer(epsilon, n=256):
    return f2.minimize_gl(epsilon, tol=1e-6, grid=f2.DiskGrid(n, n))


@functools.lru_cache(maxsize=None)
def branch(beta=0.5):
    return bif.continue_branch(beta, critical(beta), t_max=BRANCH_T_MAX, n_steps=BRANCH_STEPS, grid=BRANCH_GRID)


def positivity_grid(lam: float) -> f2.DiskGrid:
    """Grid resolving the core radius 1/sqrt(lam) by ~20 rings.

    Coarser grids pin the vortex between cells and turn the translation
    mode negative at large lambda.
    """
    s = math.sqrt(lam)
    n_r = max(256, int(math.ceil(20.0 * s)))
    n_theta = max(64, 2 ** int(math.ceil(math.log2(2.5 * s))))
    return f2.DiskGrid(n_r, n_theta)


# ---------------------------------------------------------------------------


def criterion_1() -> CriterionResult:
    c = _Checker(1, "shooting residual, b_R decreasing, profile shape")
    bs = []
    for R in (1.0, 2.0, 4.0, 8.0):
        res = rp.solve_bvp(R, tol=1e-10, n=400)
        c.check(res.residual <= 1e-10, f"R={R}: residual {res.residual:.2e}")
        sol = rp.solve_cauchy(res.b_of_R, R, r_eval=res.profile.r, ode_tol=1e-11)
        F, dF = sol.phi[1:-1], sol.dphi[1:-1]
        r = sol.r[1:-1]
        dh = (dF * r - F) / r**2  # (F/r)'
        c.check(bool(np.all((F > 0) & (F < 1))), f"R={R}: 0<F<1 violated")
        c.check(bool(np.all(dF >= 0)), f"R={R}: F' >= 0 violated")
        c.check(bool(np.all(dh < 0)), f"R={R}: (F/r)' < 0 violated")
        bs.append(res.b_of_R)
    c.check(all(b1 > b2 for b1, b2 in zip(bs, bs[1:])), f"b_R not decreasing {bs}")
    c.note(b_R=bs)
    return c.res


def criterion_2() -> CriterionResult:
    c = _Checker(2, "reduced vs full 2D ground eigenvalue, antisymmetry")
    lb = critical(0.5).lambda_beta
    coarse, fine = f2.DiskGrid(32, 32), f2.DiskGrid(64, 64)
    rows = []
    for fac in (0.5, 0.75, 1.0, 1.5, 2.0):
        lam = fac * lb
        m1c = spc.mu1_of_lambda(lam, 0.5, n=400).eigenvalue_mu
        m1f = spc.mu1_of_lambda(lam, 0.5, n=800).eigenvalue_mu
        mc = bif.ground_eigen_2d(lam, 0.5, coarse, k=2)[0][0]
        mu, vecs, _ = bif.ground_eigen_2d(lam, 0.5, fine, k=2)
        bound = abs(mu[0] - mc) + abs(m1f - m1c)
        diff = abs(mu[0] - m1f)
        c.check(diff <= 3 * bound, f"lam={lam:.4g}: |mu2D - mu1| = {diff:.3e} > 3 x {bound:.3e}")
        if mu[0] < 0:
            for v in vecs:
                d = bif.antisymmetry_defect(v)
                c.check(d <= 1e-6, f"lam={lam:.4g}: antisymmetry defect {d:.2e}")
        rows.append((lam, mu[0], m1f, bound))
    c.note(rows=rows)
    return c.res


def criterion_3() -> CriterionResult:
    c = _Checker(3, "positivity for beta >= 1 (reduced and 2D)")
    rows = []
    for beta in (1.0, 2.0):
        for lam in (1.0, 10.0, 1e2, 1e3, 1e4):
            n = max(400, int(math.ceil(25 * math.sqrt(lam))))
            n += n % 2
            m1 = spc.mu1_of_lambda(lam, beta, n=n).eigenvalue_mu
            m2 = bif.ground_eigenvalue_blocks(lam, beta, positivity_grid(lam))
            c.check(m1 > 0, f"beta={beta} lam={lam}: mu1 = {m1:.3e}")
            c.check(m2 > 0, f"beta={beta} lam={lam}: mu2D = {m2:.3e}")
            rows.append((beta, lam, m1, m2))
    c.note(rows=rows)
    return c.res


def criterion_4() -> CriterionResult:
    c = _Checker(4, "critical coupling bracket, slope, 3-digit stability")
    out = {}
    for beta in (0.25, 0.5, 0.75):
        cc = critical(beta)
        lo, hi = cc.bracket
        n = spc._resolution_for(hi, cc.grid_levels[-1])
        mlo = spc.mu1_of_lambda(lo, beta, n=n).eigenvalue_mu
        mhi = spc.mu1_of_lambda(hi, beta, n=n).eigenvalue_mu
        c.check(mlo > 0 > mhi, f"beta={beta}: bracket signs {mlo:.2e}, {mhi:.2e}")
        c.check(cc.eigenvalue_slope < 0, f"beta={beta}: slope {cc.eigenvalue_slope:.3e}")
        a, b = cc.level_values[-2], cc.level_values[-1]
        c.check(float(f"{a:.3g}") == float(f"{b:.3g}"), f"beta={beta}: levels {a} vs {b} differ at 3 digits")
        out[beta] = cc.lambda_beta
    c.note(lambda_beta=out)
    return c.res


def criterion_5() -> CriterionResult:
    c = _Checker(5, "mu_hat_1(R) strictly decreasing")
    seq = spc.muhat_monotonicity(0.5, [1, 2, 4, 8, 16])
    vals = [v for _, v in seq]
    c.check(all(a > b for a, b in zip(vals, vals[1:])), f"sequence {vals}")
    c.note(sequence=seq)
    return c.res


def criterion_6() -> CriterionResult:
    c = _Checker(6, "far-field quadratic form identity")
    Finf = rp.entire_profile(40.0)
    # 8 pi int F^2 A^2 r dr, the size of either side away from beta = 1
    scale = abs(spc.qbreve_infinity(2.0, Finf)[1])
    out = {}
    for beta in (0.5, 1.0, 1.5):
        direct, closed = spc.qbreve_infinity(beta, Finf)
        out[beta] = (direct, closed)
        if beta == 1.0:
            c.check(closed == 0.0, f"closed form at beta=1 is {closed}")
            c.check(abs(direct) <= 0.02 * scale, f"beta=1: direct {direct:.3e} vs scale {scale:.3e}")
        else:
            c.check(abs(direct - closed) <= 0.02 * abs(closed), f"beta={beta}: {direct:.5f} vs {closed:.5f}")
    c.check(out[0.5][0] < 0 and out[0.5][1] < 0, "beta=0.5 values not negative")
    c.note(values=out)
    return c.res


def criterion_7() -> CriterionResult:
    c = _Checker(7, "disk energetics for beta >= 1")
    eps = 0.05
    _, I_gl, _ = gl_minimizer(eps)
    f11 = disk_minimizer((1, 1), eps, 2.0)
    f10 = disk_minimizer((1, 0), eps, 1.0)
    e11 = f2.energy(f11).total
    e10 = f2.energy(f10).total
    c.check(f11.info["converged"] and f10.info["converged"], "minimizer not converged")
    c.check(abs(e11 - I_gl) <= 0.01 * I_gl, f"I11(beta=2) {e11:.6f} vs I_GL {I_gl:.6f}")
    s11 = f2.spin_l2(f11)
    c.check(s11 <= 1e-3, f"spin_l2 {s11:.3e}")
    c.check(abs(e10 - 0.5 * I_gl) <= 0.01 * 0.5 * I_gl, f"I10(beta=1) {e10:.6f} vs I_GL/2 {0.5 * I_gl:.6f}")
    c.note(I_GL=I_gl, I11=e11, I10=e10, spin11=s11)
    return c.res


def criterion_8() -> CriterionResult:
    c = _Checker(8, "disk energetics for beta < 1")
    beta = 0.5
    eps_list = (0.1, 0.05, 0.03)
    spins11, spins10 = [], []
    f11s, f10s, gls = [], [], []
    for eps in eps_list:
        f11 = disk_minimizer((1, 1), eps, beta)
        f10 = disk_minimizer((1, 0), eps, beta)
        f11s.append(f11)
        f10s.append(f10)
        gls.append(gl_minimizer(eps)[2])
        e11 = f2.energy(f11).total
        eU = f2.energy(f2.symmetric_solution(eps**-2, DISK_GRID, beta)).total
        c.check(e11 < eU, f"eps={eps}: I11 {e11:.6f} not below E(U) {eU:.6f}")
        spins11.append(f2.spin_l2(f11))
        spins10.append(f2.spin_l2(f10))
        c.check(spins10[-1] >= math.pi / 8 * 0.85, f"eps={eps}: spin10 {spins10[-1]:.4f}")
        zp, zm = f2.find_zeros(f11)
        if zp and zm:
            gap = min(abs(a[0] - b[0]) for a in zp for b in zm)
            cell = max(DISK_GRID.cell_diameter(a[0]) for a in zp)
            c.check(gap > cell, f"eps={eps}: zero separation {gap:.4f} <= cell {cell:.4f}")
        else:
            c.check(False, f"eps={eps}: zeros not found")
    c.check(spins11[-1] >= math.pi / 4 * 0.85, f"spin11 at eps=0.03 {spins11[-1]:.4f}")
    c.check(all(a < b for a, b in zip(spins11, spins11[1:])), f"spin11 not increasing in 1/eps {spins11}")
    q11 = f2.core_energy((1, 1), beta, eps_list, grid=DISK_GRID, fields=f11s).Q_extrapolated
    q10 = f2.core_energy((1, 0), beta, eps_list, grid=DISK_GRID, fields=f10s).Q_extrapolated
    qgl = f2.core_energy((1, 1), 1.0, eps_list, grid=DISK_GRID, fields=gls).Q_extrapolated
    tol = 0.1
    c.check(q11 <= 2 * q10 + tol, f"Q11 {q11:.4f} > 2 Q10 + tol {2 * q10 + tol:.4f}")
    c.check(2 * q10 <= qgl - (1 - beta) * math.pi / 4 + tol,
            f"2 Q10 {2 * q10:.4f} > Q_GL - (1-beta) pi/4 + tol {qgl - (1 - beta) * math.pi / 4 + tol:.4f}")
    c.note(spin11=spins11, spin10=spins10, Q11=q11, Q10=q10, Q_GL=qgl)
    return c.res


def criterion_9() -> CriterionResult:
    c = _Checker(9, "bifurcation branch")
    br = branch(0.5)
    pts = [p for p in br.points if p.t > 0]
    c.check(not br.flagged, br.message or "branch flagged")
    c.check(len(pts) >= 10, f"only {len(pts)} points with t > 0")
    for p in br.points:
        c.check(p.newton_residual <= 1e-8, f"t={p.t}: Newton residual {p.newton_residual:.2e}")
        c.check(p.t_symmetry_residual <= 1e-8, f"t={p.t}: T residual {p.t_symmetry_residual:.2e}")
        zsum = abs(p.zeros[0] + p.zeros[1])
        c.check(zsum <= BRANCH_GRID.cell_diameter(p.zeros[0]), f"t={p.t}: |z+ + z-| = {zsum:.2e}")
    lam_of = {round(p.t, 12): p.lam for p in br.points}
    for p in pts:
        q = lam_of.get(round(-p.t, 12))
        c.check(q is not None and abs(q - p.lam) <= 1e-6 * p.lam, f"t={p.t}: lam(t) vs lam(-t)")
    d2, c1, c0, rms = bif.phi_second_derivative(br)
    lb = br.lambda_beta
    c.check(abs(c0 - br.lambda_critical_2d) <= 1e-5 * lb, f"fit intercept {c0} vs discrete critical {br.lambda_critical_2d}")
    c.check(abs(c0 - lb) <= 1e-3 * lb, f"fit intercept {c0} vs lambda_beta {lb}")
    c.note(phi2=d2, linear=c1, intercept=c0, lambda_beta=lb, lambda_2d=br.lambda_critical_2d, n_points=len(br.points))
    return c.res


def _cli_twice() -> tuple:
    cfg = "[profile]\nR = 1, 2\nn = 200\n\n[spectrum]\nbeta = 0.5\nlambda = 5, 20\nmodes = 0, 1\n"
    outs = []
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "c.ini")
        with open(path, "w") as fh:
            fh.write(cfg)
        for i in range(2):
            for verb in ("profile", "spectrum"):
                d = os.path.join(tmp, f"run{i}")
                subprocess.run([sys.executable, "-m", "glvortex", verb, "--config", path, "--out", d, "--jobs", "1"],
                               check=True, capture_output=True)
            files = {}
            for name in sorted(os.listdir(d)):
                if name.endswith((".csv", ".json")) and name != "manifest.json":
                    with open(os.path.join(d, name), "rb") as fh:
                        files[name] = fh.read()
            outs.append(files)
    return outs


def criterion_10(seed: int = 0) -> CriterionResult:
    c = _Checker(10, "determinism and oracle checks")
    rng = np.random.default_rng(seed)
    # determinism: two CLI runs, identical bytes
    a, b = _cli_twice()
    c.check(a == b and len(a) > 0, "repeated CLI runs differ")
    # gradient vs centred difference, O(h^2)
    g = f2.DiskGrid(24, 24)
    fld = f2.initial_field(g, (1, 0), 0.2, 0.7)
    fld.psi_plus[:-1] += 0.05 * (rng.standard_normal((23, 24)) + 1j * rng.standard_normal((23, 24)))
    gp, gm = f2.gradient(fld)
    dp = rng.standard_normal((24, 24)) + 1j * rng.standard_normal((24, 24))
    dm = rng.standard_normal((24, 24)) + 1j * rng.standard_normal((24, 24))
    dp[-1] = dm[-1] = 0
    exact = float(np.sum((gp.conj() * dp).real) + np.sum((gm.conj() * dm).real))
    errs = []
    for h in (1e-3, 5e-4):
        e = []
        for s in (1, -1):
            q = fld.copy()
            q.psi_plus = fld.psi_plus + s * h * dp
            q.psi_minus = fld.psi_minus + s * h * dm
            e.append(f2.energy(q).total)
        errs.append(abs((e[0] - e[1]) / (2 * h) - exact) / abs(exact))
    c.check(errs[1] <= 1e-6, f"gradient FD error {errs[1]:.2e}")
    c.check(errs[0] / errs[1] > 3.0, f"gradient FD not second order: {errs}")
    # derivative in b vs finite differences
    r = np.linspace(0, 3, 31)
    _, hb = rp.derivative_in_b(0.6, 3.0, r)
    d = 1e-5
    fp = rp.solve_cauchy(0.6 + d, 3.0, r_eval=r, ode_tol=1e-12).phi
    fm = rp.solve_cauchy(0.6 - d, 3.0, r_eval=r, ode_tol=1e-12).phi
    fd = (fp - fm) / (2 * d)
    rel = float(np.max(np.abs(fd - hb)) / np.max(np.abs(hb)))
    c.check(rel <= 1e-6, f"derivative_in_b mismatch {rel:.2e}")
    # reduced quadratic form vs direct same-grid quadrature
    prof = rp.profile_f_lambda(20.0, n=200)
    op = spc.assemble_mode1(20.0, 0.5, prof)
    x = prof.grid.nodes
    a0 = (1 - x**2) * np.cos(rng.uniform(0, 3) * x)
    a2 = x**2 * (1 - x) * rng.uniform(0.5, 2)
    v = op.pack(a0=a0, a2=a2)
    qf = op.form(v)
    qd = _mode1_quadrature(x, prof.values, 20.0, 0.5, a0, a2)
    c.check(abs(qf - qd) <= 1e-6 * abs(qd), f"M form {qf} vs quadrature {qd}")
    # 2D quadratic form vs direct second-variation quadrature
    lop = bif.linearize(15.0, 0.5, f2.DiskGrid(16, 16))
    php = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    phm = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    php[-1] = phm[-1] = 0
    q2 = bif.quadratic_form(lop, (php, phm))
    q2d = _second_variation(lop.base, 15.0, 0.5, php, phm)
    c.check(abs(q2 - q2d) <= 1e-6 * abs(q2d), f"L form {q2} vs quadrature {q2d}")
    c.note(gradient_errors=errs, derivative_in_b=rel)
    return c.res


def _mode1_quadrature(x, f, lam, beta, a0, a2):
    """pi x the form of M_lam on the finite-volume grid, written out term by term."""
    h = x[1] - x[0]
    xm = 0.5 * (x[1:] + x[:-1])
    w = x * h
    w[0] = h * h / 8
    grad = np.sum(xm * ((np.diff(a0) / h) ** 2 + (np.diff(a2) / h) ** 2) * h)
    pot = np.zeros_like(x)
    pot[1:] = 4 * a2[1:] ** 2 / x[1:] ** 2
    pot += lam * (f**2 - 1) * (a0**2 + a2**2) + beta * lam * f**2 * (a0 - a2) ** 2
    return float(grad + np.sum(w[:-1] * pot[:-1]))


def _second_variation(U, lam, beta, php, phm):
    """Direct quadrature of E''(U)[Phi] for U = (u, u)/sqrt 2."""
    g = U.grid
    a, cc = g.radial_coupling, g.angular_coupling
    u = math.sqrt(2) * U.psi_plus
    dirichlet = 0.0
    for p in (php, phm):
        dirichlet += np.sum(a[:, None] * np.abs(p[1:] - p[:-1]) ** 2)
        dirichlet += np.sum(cc[:, None] * np.abs(np.roll(p, -1, axis=1) - p) ** 2)
    W = g.weights
    ip = lambda v: (u.conj() * v).real  # noqa: E731
    pot = lam * (np.abs(u) ** 2 - 1) * (np.abs(php) ** 2 + np.abs(phm) ** 2)
    pot += lam * ip(php + phm) ** 2 + beta * lam * ip(php - phm) ** 2
    return float(dirichlet + np.sum(W * pot))


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_all(numbers=None, stream=sys.stdout) -> list:
    out = []
    for k in numbers or sorted(CRITERIA):
        try:
            res = CRITERIA[k]()
        except Exception as exc:  # a crash counts as a failure of that criterion
            res = CriterionResult(k, "error", False, failures=[f"{type(exc).__name__}: {exc}"])
        print(res.line(), file=stream, flush=True)
        out.append(res)
    return out
