import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glvortex import _kernels_py as py
from glvortex import kernels
from glvortex.field2d import DiskGrid

cy = pytest.importorskip("glvortex._kernels")


def _random(grid, seed):
    rng = np.random.default_rng(seed)
    shp = (grid.n_r, grid.n_theta)
    return (rng.standard_normal(shp) + 1j * rng.standard_normal(shp),
            rng.standard_normal(shp) + 1j * rng.standard_normal(shp))


def _coeffs(grid):
    return grid.radial_coupling, grid.angular_coupling, grid.ring_weights


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 20), st.integers(2, 12), st.integers(0, 10**6))
def test_stiffness_backends_agree(nr, half, seed):
    g = DiskGrid(nr, 2 * half)
    pp, _ = _random(g, seed)
    a, c, _ = _coeffs(g)
    assert np.allclose(cy.stiffness_apply(pp, a, c), py.stiffness_apply(pp, a, c), rtol=1e-13, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 20), st.integers(2, 12), st.integers(0, 10**6),
       st.floats(0.1, 1e4), st.floats(0.05, 5.0))
def test_energy_gradient_backends_agree(nr, half, seed, lam, beta):
    g = DiskGrid(nr, 2 * half)
    pp, pm = _random(g, seed)
    a, c, w = _coeffs(g)
    r1 = cy.energy_gradient(pp, pm, a, c, w, lam, beta)
    r2 = py.energy_gradient(pp, pm, a, c, w, lam, beta)
    for x, y in zip(r1[:3], r2[:3]):
        assert x == pytest.approx(y, rel=1e-12)
    for x, y in zip(r1[3:], r2[3:]):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-12 * np.max(np.abs(y)))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(2, 30), st.integers(0, 10**6))
def test_tridiagonal_solve(m, n, seed):
    rng = np.random.default_rng(seed)
    sub = rng.uniform(-1, 0, n - 1)
    diag = 2.5 + rng.uniform(0, 1, (m, n))
    rhs = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
    for impl in (cy, py):
        x = impl.tridiag_solve(sub, diag, rhs)
        Ax = diag * x
        Ax[:, 1:] += sub * x[:, :-1]
        Ax[:, :-1] += sub * x[:, 1:]
        assert np.allclose(Ax, rhs, atol=1e-12)


def test_stiffness_is_graph_laplacian():
    g = DiskGrid(9, 10)
    a, c, _ = _coeffs(g)
    const = np.ones((9, 10), dtype=complex)
    assert np.max(np.abs(kernels.stiffness_apply(const, a, c))) < 1e-13
    pp, pm = _random(g, 4)
    lhs = np.sum((pm.conj() * kernels.stiffness_apply(pp, a, c)).real)
    rhs = np.sum((kernels.stiffness_apply(pm, a, c).conj() * pp).real)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_wrappers_reject_bad_shapes():
    g = DiskGrid(6, 8)
    a, c, w = _coeffs(g)
    pp, pm = _random(g, 0)
    with pytest.raises(ValueError):
        kernels.stiffness_apply(pp[:-1], a, c)
    with pytest.raises(ValueError):
        kernels.energy_gradient(pp, pm[:, :-2], a, c, w, 1.0, 1.0)
    with pytest.raises(ValueError):
        kernels.tridiag_solve(np.ones(3), np.ones((2, 5)), np.ones((2, 5)))


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_environment_selects_numpy():
    import os
    import subprocess
    import sys

    env = dict(os.environ, GLVORTEX_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import glvortex.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
