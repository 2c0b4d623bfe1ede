import math

import numpy as np
import pytest

from glvortex import bifurcation as bif
from glvortex import field2d as f2
from glvortex import spectral as spc

import oracles


@pytest.fixture(scope="module")
def small():
    g = f2.DiskGrid(14, 12)
    return g, bif.linearize(25.0, 0.5, g)


def test_hessian_against_gradient_differences():
    g = f2.DiskGrid(10, 12)
    rng = np.random.default_rng(5)
    fld = f2.initial_field(g, (1, 1), 0.3, 0.6)
    fld.psi_plus[:-1] += 0.1 * (rng.standard_normal((9, 12)) + 1j * rng.standard_normal((9, 12)))
    H = bif.hessian(fld)
    x = rng.standard_normal(H.shape[0])
    dp, dm = bif.unpack(g, x)
    h = 1e-6
    a, b = fld.copy(), fld.copy()
    a.psi_plus, a.psi_minus = fld.psi_plus + h * dp, fld.psi_minus + h * dm
    b.psi_plus, b.psi_minus = fld.psi_plus - h * dp, fld.psi_minus - h * dm
    fd = (bif.pack(g, *f2.gradient(a)) - bif.pack(g, *f2.gradient(b))) / (2 * h)
    assert np.max(np.abs(fd - H @ x)) <= 1e-7 * np.max(np.abs(H @ x))
    assert abs(H - H.T).max() < 1e-12


def test_sector_blocks_reproduce_full_spectrum(small):
    g, op = small
    full = oracles.dense_spectrum(op.H, op.weights)
    bs = bif.block_spectrum(25.0, 0.5, g, k=4 * (g.n_r - 1))
    vals = []
    for m in range(bs.shape[0]):
        mult = 1 if m in (0, g.n_theta // 2) else 2
        vals += list(bs[m]) * mult
    assert len(vals) == len(full)
    assert np.allclose(np.sort(vals), full, rtol=1e-9, atol=1e-9)


def test_ground_from_two_sectors_is_global_minimum(small):
    g, op = small
    full = oracles.dense_spectrum(op.H, op.weights)
    assert bif.ground_eigenvalue_blocks(25.0, 0.5, g) == pytest.approx(full[0], rel=1e-10)


def test_inverse_iteration_against_dense(small):
    g, op = small
    mu, vecs, res = bif.ground_eigen_2d(25.0, 0.5, g, k=3, op=op)
    full = oracles.dense_spectrum(op.H, op.weights)
    assert np.allclose(mu, full[:3], rtol=1e-9, atol=1e-9)
    assert np.all(res < 1e-8)


def test_ground_mode_antisymmetric_in_sectors_zero_two():
    g = f2.DiskGrid(32, 32)
    mu, vecs, _ = bif.ground_eigen_2d(30.0, 0.5, g, k=2)
    assert mu[0] < 0
    assert mu[1] == pytest.approx(mu[0], rel=1e-8)  # rotation pair
    for v in vecs:
        assert bif.antisymmetry_defect(v) < 1e-8
        assert bif.angular_leakage(g, v[0] * np.exp(-1j * g.theta)[None, :], modes=(-1, 1)) < 1e-12


def test_symmetries_fix_the_vortex():
    g = f2.DiskGrid(16, 16)
    U = f2.symmetric_solution(20.0, g, 0.5, discrete=True)
    tp, tm = bif.apply_T(g, U.psi_plus, U.psi_minus)
    assert np.allclose(tp, U.psi_plus, atol=1e-14) and np.allclose(tm, U.psi_minus, atol=1e-14)
    for s in (1, 3, 7):
        rp_, rm_ = bif.rotate(g, U.psi_plus, U.psi_minus, s)
        assert np.allclose(rp_, U.psi_plus, atol=1e-14)
    gp, gm = bif.generator(g, U.psi_plus, U.psi_minus)
    assert np.max(np.abs(gp)) < 1e-12


def test_linearization_commutes_with_T(small):
    g, op = small
    rng = np.random.default_rng(2)
    x = rng.standard_normal(op.H.shape[0])
    Tx = bif.pack(g, *bif.apply_T(g, *bif.unpack(g, x)))
    TLx = bif.pack(g, *bif.apply_T(g, *bif.unpack(g, op.H @ x)))
    assert np.allclose(op.H @ Tx, TLx, atol=1e-10)


def test_quadratic_form_and_apply(small):
    g, op = small
    rng = np.random.default_rng(9)
    x = rng.standard_normal(op.H.shape[0])
    phi = bif.unpack(g, x)
    assert bif.quadratic_form(op, phi) == pytest.approx(op.inner(op.apply(x), x), rel=1e-12)
    bad = (phi[0].copy(), phi[1].copy())
    bad[0][-1] = 1.0
    with pytest.raises(ValueError):
        bif.apply_L(op, bad)


def test_discrete_critical_coupling_near_reduced_value():
    lb = spc.find_lambda_beta(0.5, levels=(200, 400)).lambda_beta
    lc = bif.critical_lambda_2d(0.5, f2.DiskGrid(32, 32), lb)
    # O(h^2) offset of the 32 x 32 grid
    assert abs(lc - lb) < 3e-3 * lb
    assert abs(bif.ground_eigen_2d(lc, 0.5, f2.DiskGrid(32, 32), k=1)[0][0]) < 1e-8


def test_lifted_pair_normalized():
    g = f2.DiskGrid(20, 16)
    r = np.linspace(0, 1, 41)
    w = bif.lift_mode_pair(g, r, 1 - r**2, r**2 * (1 - r))
    assert 2 * np.sum(g.weights * np.abs(w[0]) ** 2) == pytest.approx(1.0)
    assert np.array_equal(w[1], -w[0])


def test_newton_at_fixed_lambda_recovers_vortex():
    g = f2.DiskGrid(16, 16)
    U = f2.symmetric_solution(20.0, g, 0.5, discrete=True)
    guess = U.copy()
    rng = np.random.default_rng(0)
    guess.psi_plus = U.psi_plus.copy()
    guess.psi_plus[:-1] += 1e-3 * rng.standard_normal((15, 16))
    guess.psi_minus = U.psi_minus.copy()
    guess.psi_minus[:-1] += 1e-3 * rng.standard_normal((15, 16))
    sol = bif.newton_solve(guess, 20.0, 0.5, project_T=False)
    assert sol.info["newton_residual"] < 1e-10
    assert np.max(np.abs(sol.psi_plus - U.psi_plus)) < 1e-8
    h = sol.info["newton_history"]
    assert h[-1] < 1e-4 * h[-2] or h[-1] < 1e-12  # quadratic tail


@pytest.fixture(scope="module")
def short_branch():
    return bif.continue_branch(0.5, 17.598246, t_max=0.08, n_steps=4, grid=f2.DiskGrid(32, 32),
                               with_eigenvalue=False)


def test_short_branch_properties(short_branch):
    br = short_branch
    assert not br.flagged and len(br.points) == 8
    g = br.points[0].field.grid
    for p in br.points:
        assert p.newton_residual <= 1e-8 and p.t_symmetry_residual <= 1e-8
        assert abs(p.zeros[0] + p.zeros[1]) < g.cell_diameter(p.zeros[0])
    by_t = {round(p.t, 12): p.lam for p in br.points}
    for p in br.points:
        assert by_t[round(-p.t, 12)] == pytest.approx(p.lam, rel=1e-9)


def test_short_branch_curvature_and_export(short_branch):
    d2, c1, c0, rms = bif.phi_second_derivative(short_branch)
    assert d2 > 0
    assert c0 == pytest.approx(short_branch.lambda_critical_2d, rel=1e-5)
    text = bif.branch_to_csv(short_branch)
    assert text.splitlines()[0] == ("t,lambda,energy,abs_z_plus,arg_z_plus,t_symmetry_residual,"
                                    "newton_residual,ground_eigenvalue")
    assert '"sign": 1' in bif.branch_summary_json(short_branch)


def test_phi_fit_on_exact_polynomial():
    class P:
        def __init__(self, t):
            self.t, self.lam = t, 3.0 + 2.0 * t * t + 5.0 * t**4

    pts = [P(t) for t in np.linspace(-0.2, 0.2, 9)]
    d2, c1, c0, rms = bif.phi_second_derivative(pts)
    assert d2 == pytest.approx(4.0, rel=1e-10) and abs(c1) < 1e-10 and c0 == pytest.approx(3.0)


def test_branch_rejects_beta_at_least_one():
    with pytest.raises(ValueError):
        bif.continue_branch(1.2, 20.0)
