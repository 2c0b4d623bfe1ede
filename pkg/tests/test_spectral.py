import json
import math

import numpy as np
import pytest

from glvortex import radial_profile as rp
from glvortex import spectral as spc

import oracles

# independent FD-profile + dense-eigensolver oracle, Richardson over 400/800 cells
ORACLE_LAMBDA_BETA_05 = 17.598234377438107


@pytest.fixture(scope="module")
def prof20():
    return rp.profile_f_lambda(20.0, n=200)


def test_mode1_matches_dense_oracle(prof20):
    x = prof20.grid.nodes
    H, W = oracles.mode1_dense(x, prof20.values, 20.0, 0.5)
    ref = oracles.lowest_generalized(H, W, 3)
    got = [r.eigenvalue_mu for r in spc.ground_eigenpair(spc.assemble_mode1(20.0, 0.5, prof20), k=3)]
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-9)


def test_operator_symmetric_and_weighted(prof20):
    op = spc.assemble_mode1(20.0, 0.5, prof20)
    assert abs(op.H - op.H.T).max() < 1e-12
    rng = np.random.default_rng(1)
    u, v = rng.standard_normal(op.size), rng.standard_normal(op.size)
    assert op.inner(op.apply(u), v) == pytest.approx(op.inner(u, op.apply(v)), rel=1e-12)


def test_eigenvector_normalized_and_signed(prof20):
    res = spc.mu1_of_lambda(20.0, 0.5, profile=prof20)
    vec = res.eigenvector
    assert vec.norm2() == pytest.approx(1.0, rel=1e-10)
    assert vec.a0[np.argmax(np.abs(vec.a0))] > 0
    assert vec.a2[0] == 0.0 and vec.a0[-1] == 0.0 and vec.a2[-1] == 0.0
    assert res.solver_residual < 1e-6


def test_mode_n_blocks_against_dense(prof20):
    for n in (0, 2, 3):
        op = spc.assemble_mode_n(n, 20.0, 0.5, prof20)
        ref = oracles.dense_spectrum(op.H, op.weights)[:2]
        got = [r.eigenvalue_mu for r in spc.ground_eigenpair(op, k=2)]
        assert np.allclose(got, ref, rtol=1e-8, atol=1e-8)


def test_mode1_block_of_mode_n_family(prof20):
    # the general assembly at n = 1 carries the same spectrum (each value twice)
    a = spc.ground_eigenpair(spc.assemble_mode_n(1, 20.0, 0.5, prof20), k=2)
    b = spc.mu1_of_lambda(20.0, 0.5, profile=prof20)
    assert a[0].eigenvalue_mu == pytest.approx(b.eigenvalue_mu, rel=1e-9)
    assert a[1].eigenvalue_mu == pytest.approx(b.eigenvalue_mu, rel=1e-9)


def test_other_modes_stay_positive():
    prof = rp.profile_f_lambda(30.0, n=400)
    for n in (0, 2, 3, 4):
        assert spc.ground_eigenpair(spc.assemble_mode_n(n, 30.0, 0.5, prof))[0].eigenvalue_mu > 0


@pytest.mark.parametrize("beta", [1.0, 2.0])
def test_positive_for_beta_at_least_one(beta):
    for lam in (1.0, 10.0, 100.0):
        assert spc.mu1_of_lambda(lam, beta, n=400).eigenvalue_mu > 0


def test_find_lambda_beta_against_oracle():
    cc = spc.find_lambda_beta(0.5)
    assert cc.lambda_beta == pytest.approx(ORACLE_LAMBDA_BETA_05, rel=5e-6)
    lo, hi = cc.bracket
    assert lo < cc.level_values[-1] < hi
    assert cc.eigenvalue_slope < 0
    d = json.loads(spc.critical_coupling_to_json(cc))
    assert set(d) >= {"beta", "lambda_beta", "bracket", "slope", "grid_levels"}


def test_no_crossing_for_beta_above_one():
    with pytest.raises(spc.NoCrossingError):
        spc.find_lambda_beta(1.5, levels=(200, 400))


def test_lambda_beta_increases_with_beta():
    a = spc.find_lambda_beta(0.25, levels=(200, 400)).lambda_beta
    b = spc.find_lambda_beta(0.75, levels=(200, 400)).lambda_beta
    assert a < ORACLE_LAMBDA_BETA_05 < b


def test_muhat_decreasing():
    seq = [v for _, v in spc.muhat_monotonicity(0.9, [1, 2, 4, 8], n=400)]
    assert all(a > b for a, b in zip(seq, seq[1:]))


def test_qbreve_identity():
    Finf = rp.entire_profile(40.0)
    for beta in (0.5, 1.5):
        direct, closed = spc.qbreve_infinity(beta, Finf)
        assert direct == pytest.approx(closed, rel=0.02)
    d1, c1 = spc.qbreve_infinity(1.0, Finf)
    assert c1 == 0.0
    # the far-field truncation leaves a residue well below the scale of either side
    assert abs(d1) < 0.02 * abs(spc.qbreve_infinity(2.0, Finf)[1])


def test_sweep_csv_header_and_rows(prof20):
    rows = spc.ground_eigenpair(spc.assemble_mode1(20.0, 0.5, prof20), k=2)
    text = spc.sweep_to_csv(rows)
    lines = text.splitlines()
    assert lines[0] == "beta,lambda,R,mode,index,mu,residual"
    assert len(lines) == 3
    parts = lines[1].split(",")
    assert float(parts[2]) == pytest.approx(math.sqrt(20.0))
    assert float(parts[5]) == rows[0].eigenvalue_mu


def test_invalid_parameters():
    with pytest.raises(ValueError):
        spc.mu1_of_lambda(-1.0, 0.5)
    with pytest.raises(ValueError):
        spc.find_lambda_beta(0.0)
