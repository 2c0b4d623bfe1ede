import math

import numpy as np
import pytest

from glvortex import field2d as f2

import oracles


def _gl_energy_1d(eps, n=4000):
    """Symmetric-vortex energy from the FD radial oracle, trapezoid in r."""
    lam = eps**-2
    R = math.sqrt(lam)
    s, F = oracles.fd_profile(R, n)
    r = s / R
    dF = np.gradient(F, r, edge_order=2)
    g = 0.5 * dF**2 + lam / 4 * (1 - F**2) ** 2
    g[1:] += 0.5 * F[1:] ** 2 / r[1:] ** 2
    g[0] += 0.5 * dF[0] ** 2  # F / r -> F'(0)
    return 2 * math.pi * np.trapezoid(g * r, r)


def test_weights_tile_the_disk():
    g = f2.DiskGrid(17, 12, radius=2.0)
    assert g.weights.sum() == pytest.approx(math.pi * 4.0, rel=1e-13)


def test_grid_validation():
    with pytest.raises(ValueError):
        f2.DiskGrid(10, 7)
    with pytest.raises(ValueError):
        f2.DiskGrid(2, 8)


def test_dirichlet_energy_of_identity_map_converges():
    # psi = z on the unit disk: (1/2) int |grad z|^2 = pi
    errs = []
    for n in (16, 32, 64):
        g = f2.DiskGrid(n, 4 * n)
        z = g.coords()
        fld = f2.DiskField(g, z / math.sqrt(2), z / math.sqrt(2), (1, 1), 0.5, 1.0)
        errs.append(abs(f2.energy(fld).dirichlet - math.pi))
    assert errs[2] < 1e-2
    assert errs[1] / errs[2] > 1.8


def test_potential_identity():
    g = f2.DiskGrid(20, 16)
    rng = np.random.default_rng(3)
    fld = f2.initial_field(g, (1, 0), 0.2, 0.6)
    fld.psi_plus[:-1] += 0.1 * rng.standard_normal((19, 16))
    fld.psi_minus[:-1] += 0.1j * rng.standard_normal((19, 16))
    e = f2.energy(fld)
    assert f2.identity_potential(fld) == pytest.approx(e.potential_iso + e.potential_spin, rel=1e-12)


@pytest.mark.parametrize("degrees,beta", [((1, 1), 0.5), ((1, 0), 2.0)])
def test_gradient_against_centred_differences(degrees, beta):
    g = f2.DiskGrid(12, 16)
    rng = np.random.default_rng(7)
    fld = f2.initial_field(g, degrees, 0.3, beta)
    fld.psi_plus[:-1] += 0.05 * rng.standard_normal((11, 16))
    gp, gm = f2.gradient(fld)
    dp = rng.standard_normal((12, 16)) + 1j * rng.standard_normal((12, 16))
    dm = rng.standard_normal((12, 16)) + 1j * rng.standard_normal((12, 16))
    dp[-1] = dm[-1] = 0
    exact = np.sum((gp.conj() * dp).real) + np.sum((gm.conj() * dm).real)
    h = 1e-5
    a, b = fld.copy(), fld.copy()
    a.psi_plus, a.psi_minus = fld.psi_plus + h * dp, fld.psi_minus + h * dm
    b.psi_plus, b.psi_minus = fld.psi_plus - h * dp, fld.psi_minus - h * dm
    fd = (f2.energy(a).total - f2.energy(b).total) / (2 * h)
    assert fd == pytest.approx(exact, rel=1e-7)


def test_discrete_symmetric_solution_is_critical():
    fld = f2.symmetric_solution(50.0, f2.DiskGrid(32, 32), 0.5, discrete=True)
    assert f2.residual_norm(fld) < 1e-9
    assert f2.spin_l2(fld) == 0.0


def test_minimize_monotone_and_keeps_boundary():
    g = f2.DiskGrid(32, 32)
    f0 = f2.initial_field(g, (1, 0), 0.15, 0.7)
    out = f2.minimize(f0, tol=1e-7)
    assert out.info["converged"]
    h = np.array(out.info["energy_history"])
    # increases only at the round-off level of E
    assert np.all(np.diff(h) <= 1e-11 * abs(h[0]))
    assert np.array_equal(out.psi_plus[-1], f0.psi_plus[-1])
    assert f2.residual_norm(out) <= 1e-7


def test_minimize_rejects_bad_boundary():
    g = f2.DiskGrid(8, 8)
    f0 = f2.initial_field(g, (1, 1), 0.3, 1.0)
    f0.psi_plus[-1] = 0
    with pytest.raises(f2.InvalidFieldError):
        f2.minimize(f0)


def test_gl_energy_against_radial_oracle():
    u, I, fld = f2.minimize_gl(0.1, tol=1e-7, grid=f2.DiskGrid(128, 128))
    ref = _gl_energy_1d(0.1)
    assert I == pytest.approx(ref, rel=2e-3)
    # the minimizer stays on the diagonal
    assert np.max(np.abs(fld.psi_plus - fld.psi_minus)) < 1e-12


def test_degree_one_zero_at_beta_one_is_half_gl():
    g = f2.DiskGrid(48, 48)
    _, I, _ = f2.minimize_gl(0.15, grid=g)
    f10 = f2.minimize_degrees((1, 0), 0.15, 1.0, g)
    assert f2.energy(f10).total == pytest.approx(0.5 * I, rel=1e-6)


def test_splitting_below_beta_one():
    g = f2.DiskGrid(64, 64)
    eps = 0.1
    fld = f2.minimize_degrees((1, 1), eps, 0.5, g)
    U = f2.symmetric_solution(eps**-2, g, 0.5)
    assert f2.energy(fld).total < f2.energy(U).total
    zp, zm = f2.find_zeros(fld)
    assert len(zp) == 1 and len(zm) == 1
    assert zp[0][1] == 1 and zm[0][1] == 1
    # antipodal pair away from the origin
    assert abs(zp[0][0] + zm[0][0]) < g.cell_diameter(zp[0][0])
    assert abs(zp[0][0]) > 2 * g.h


def test_find_zeros_on_synthetic_field():
    g = f2.DiskGrid(40, 48)
    z = g.coords()
    a, b = 0.31 + 0.12j, -0.2 - 0.4j
    pp = (z - a) / np.abs(z - a).max()
    pm = (z - b) * (z - a.conjugate()) / 4
    fld = f2.DiskField(g, pp, pm, (1, 1), 0.1, 1.0)
    zp, zm = f2.find_zeros(fld)
    # bilinear in (r, theta): exact only for fields bilinear on the cell
    tol = 0.05 * g.cell_diameter(a)
    assert len(zp) == 1 and abs(zp[0][0] - a) < tol
    assert len(zm) == 2
    assert all(min(abs(x[0] - b), abs(x[0] - a.conjugate())) < tol for x in zm)
    assert all(w == 1 for _, w in zm)


def test_find_zeros_at_origin_and_antivortex():
    g = f2.DiskGrid(30, 32)
    z = g.coords()
    fld = f2.DiskField(g, z, np.conj(z - 0.3), (1, 1), 0.1, 1.0)
    zp, zm = f2.find_zeros(fld)
    assert abs(zp[0][0]) < 1e-12 and zp[0][1] == 1
    assert abs(zm[0][0] - 0.3) < 0.05 * g.h and zm[0][1] == -1


def test_core_energy_guards():
    g = f2.DiskGrid(16, 16)
    with pytest.raises(f2.UnderResolvedError):
        f2.core_energy((1, 1), 2.0, [0.3, 0.2, 0.1], grid=g)
    with pytest.raises(ValueError):
        f2.core_energy((1, 1), 2.0, [0.1, 0.2, 0.3], grid=g)


def test_core_energy_fit_recovers_linear_model():
    g = f2.DiskGrid(48, 48)
    eps = [0.3, 0.25, 0.2]
    est = f2.core_energy((1, 0), 1.0, eps, grid=g)
    x = np.array([s[0] for s in est.samples])
    y = np.array([s[1] for s in est.samples]) - 0.5 * math.pi * np.abs(np.log(x))
    assert np.allclose(np.polyval([est.c1, est.Q_extrapolated], x), y, atol=3 * est.fit_residual + 1e-14)


def test_snapshot_csv_and_metadata(tmp_path):
    g = f2.DiskGrid(6, 8)
    fld = f2.initial_field(g, (1, 0), 0.3, 0.5)
    text = f2.field_to_csv(fld, tmp_path / "f.csv", tmp_path / "f.json")
    lines = text.splitlines()
    assert lines[0] == "r,theta,re_psi_plus,im_psi_plus,re_psi_minus,im_psi_minus"
    assert len(lines) == 1 + 6 * 8
    vals = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert np.array_equal(vals[:, 2] + 1j * vals[:, 3], fld.psi_plus.ravel())
    meta = f2.field_metadata(fld)
    assert meta["degrees"] == [1, 0] and "energy" in meta
    assert "f.csv" in f2.plot_script("f.csv")


def test_initial_field_shapes_and_perturbation():
    g = f2.DiskGrid(10, 12)
    a0 = np.linspace(1, 0, 10)
    a2 = np.linspace(0, 1, 10) * a0
    f = f2.initial_field(g, (1, 1), 0.2, 0.5, perturbation=(0.1, a0, a2))
    assert f.psi_plus.shape == (10, 12) and f.psi_minus.shape == (10, 12)
    assert f.boundary_ok()
    assert np.max(np.abs(f.psi_plus - f2.initial_field(g, (1, 1), 0.2, 0.5).psi_plus)) > 0.05
