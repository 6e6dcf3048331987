import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from sylvgltr.errors import NotPositiveDefinite
from sylvgltr.oracle import trs_oracle
from sylvgltr.trs import TridiagonalSym, cholesky_bidiag, trs_objective, trs_solve


def _random_tridiag(rng, k, shift=0.0):
    return TridiagonalSym(rng.standard_normal(k) + shift, rng.standard_normal(k - 1))


def _check_result(t, gamma0, delta, res):
    k = t.size
    h, lam = res.h, res.lam
    nh = np.linalg.norm(h)
    assert nh <= delta * (1 + 1e-12)
    assert lam >= 0
    if res.boundary:
        assert abs(nh - delta) <= 1e-8 * delta
    e1 = np.zeros(k)
    e1[0] = 1
    stat = t.matvec(h) + lam * h + gamma0 * e1
    assert np.linalg.norm(stat) <= 1e-10 * (t.norm_bound() + lam + gamma0)
    assert abs(lam * (nh - delta)) <= 1e-8 * delta * (1 + lam)


def test_scalar_interior():
    res = trs_solve(TridiagonalSym([2.0], []), 1.0, 1.0)
    assert not res.boundary
    assert res.lam == 0.0
    assert_allclose(res.h, [-0.5])


def test_scalar_boundary():
    res = trs_solve(TridiagonalSym([2.0], []), 1.0, 0.25)
    assert res.boundary
    assert res.lam == pytest.approx(2.0, rel=1e-12)
    assert_allclose(res.h, [-0.25], rtol=1e-12)


def test_spd_6x6_against_eigen_oracle():
    rng = np.random.default_rng(0)
    for _ in range(10):
        t = _random_tridiag(rng, 6, shift=4.0)
        assert t.eigvalsh().min() > 0
        h_ls = np.linalg.solve(t.todense(), -np.eye(6)[0])
        delta = 0.3 * np.linalg.norm(h_ls)
        res = trs_solve(t, 1.0, delta)
        h, lam, _, boundary = trs_oracle(t.todense(), 1.0, delta)
        assert boundary and res.boundary
        assert abs(res.lam - lam) <= 1e-8 * (1 + lam)
        assert np.linalg.norm(res.h - h) <= 1e-8
        _check_result(t, 1.0, delta, res)


def test_cholesky_examples():
    assert_allclose(cholesky_bidiag(TridiagonalSym([4.0], []), 0.0).todense(), [[2.0]])
    L = cholesky_bidiag(TridiagonalSym([2.0, 2.0], [1.0]), 0.0).todense()
    assert_allclose(L, [[math.sqrt(2), 0], [1 / math.sqrt(2), math.sqrt(1.5)]], rtol=1e-15)
    with pytest.raises(NotPositiveDefinite):
        cholesky_bidiag(TridiagonalSym([1.0, 1.0], [1.0]), 0.0)


def test_cholesky_reconstruction():
    rng = np.random.default_rng(1)
    for k in range(1, 12):
        t = _random_tridiag(rng, k, shift=5.0)
        lam = rng.uniform(0, 2)
        L = cholesky_bidiag(t, lam).todense()
        target = t.todense() + lam * np.eye(k)
        assert np.linalg.norm(L @ L.T - target) <= 1e-12 * np.linalg.norm(target)


def test_indefinite_and_hard_case():
    # eigenvector of the smallest eigenvalue orthogonal to e1
    t = TridiagonalSym([1.0, -2.0], [0.0])
    res = trs_solve(t, 1.0, 3.0)
    assert res.hard_case and res.boundary
    assert res.lam == pytest.approx(2.0)
    h, lam, obj, _ = trs_oracle(t.todense(), 1.0, 3.0)
    assert lam == pytest.approx(2.0)
    assert trs_objective(t, 1.0, res.h) == pytest.approx(obj, rel=1e-10)
    _check_result(t, 1.0, 3.0, res)


def test_warm_start_reused():
    rng = np.random.default_rng(2)
    t = _random_tridiag(rng, 8, shift=3.0)
    cold = trs_solve(t, 1.0, 0.05)
    warm = trs_solve(t, 1.0, 0.05, lambda_warm=cold.lam)
    assert warm.newton_iters <= cold.newton_iters
    assert warm.lam == pytest.approx(cold.lam, rel=1e-12)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        trs_solve(TridiagonalSym([1.0], []), 0.0, 1.0)
    with pytest.raises(ValueError):
        TridiagonalSym([1.0, 2.0], [1.0, 2.0])


@settings(max_examples=80, deadline=None)
@given(k=st.integers(1, 12), seed=st.integers(0, 2**32 - 1),
       delta=st.floats(1e-3, 1e3), shift=st.floats(-3, 3))
def test_trs_properties(k, seed, delta, shift):
    rng = np.random.default_rng(seed)
    t = _random_tridiag(rng, k, shift)
    gamma0 = float(rng.uniform(0.1, 10))
    res = trs_solve(t, gamma0, delta)
    _check_result(t, gamma0, delta, res)
    assert res.newton_iters <= 25
    lam_min = t.eigvalsh().min()
    if res.boundary:
        assert res.lam >= max(0.0, -lam_min) - 1e-8
    _, lam_o, obj_o, _ = trs_oracle(t.todense(), gamma0, delta)
    obj = trs_objective(t, gamma0, res.h)
    assert abs(obj - obj_o) <= 1e-8 * max(abs(obj_o), gamma0 * delta)
    assert abs(res.lam - lam_o) <= 1e-8 * (1 + lam_o)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(2, 12), seed=st.integers(0, 2**32 - 1))
def test_secular_iteration_monotone_from_below(k, seed):
    rng = np.random.default_rng(seed)
    t = _random_tridiag(rng, k, shift=6.0)
    t = TridiagonalSym(t.diag + max(0.0, 1 - t.eigvalsh().min()), t.offdiag)
    h0 = np.linalg.solve(t.todense(), -np.eye(k)[0])
    res = trs_solve(t, 1.0, 0.2 * np.linalg.norm(h0))
    lams = res.lambdas
    assert all(b >= a - 1e-12 for a, b in zip(lams, lams[1:]))
