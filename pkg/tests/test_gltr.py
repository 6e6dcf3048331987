import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from _invariants import INVARIANT_TOLS, invariant_errors, well_conditioned_problem
from sylvgltr.errors import DimensionError, IterationLimitError, NumericalBreakdownError
from sylvgltr.gltr import (
    LanczosState,
    SolverConfig,
    assemble_boundary_solution,
    lanczos_step,
    solve,
)
from sylvgltr.matcore import frob_norm
from sylvgltr.operators import FunctionOperator, make_family
from sylvgltr.oracle import assemble, oracle_solve


def _identity(E):
    n, m = E.shape
    return make_family("axb", {"A": np.eye(n), "B": np.eye(m)}, E)


def _random_gen_sylvester(rng, n=4):
    return make_family("gen_sylvester", {k: rng.standard_normal((n, n)) for k in "ABCD"},
                       rng.standard_normal((n, n)))


def test_identity_interior_one_iteration():
    E = np.arange(12.0).reshape(3, 4) - 5
    out = solve(_identity(E), delta=2 * frob_norm(E))
    assert out.branch == "interior"
    assert out.iterations == 1
    assert out.lambda_star == 0
    assert_allclose(out.x_star, E, rtol=1e-14)


def test_identity_boundary_lambda_one():
    E = np.arange(12.0).reshape(3, 4) - 5
    delta = frob_norm(E) / 2
    out = solve(_identity(E), delta=delta)
    assert out.branch == "boundary"
    assert out.lambda_star == pytest.approx(1.0, rel=1e-12)
    assert_allclose(out.x_star, delta * E / frob_norm(E), rtol=1e-12)


def test_recover_known_solution():
    rng = np.random.default_rng(0)
    mats = {k: rng.standard_normal((5, 5)) for k in "ABCD"}
    X = np.floor(10 * rng.standard_normal((5, 5)))
    E = mats["A"] @ X @ mats["B"] + mats["C"] @ X @ mats["D"]
    spec = make_family("gen_sylvester", mats, E)
    out = solve(spec, delta=2 * frob_norm(X))
    assert frob_norm(out.x_star - X) <= 1e-10 * frob_norm(X)
    ref = oracle_solve(assemble(spec, delta=2 * frob_norm(X)))
    assert frob_norm(ref.x - X) <= 1e-10 * frob_norm(X)


def test_zero_rhs_returns_zero():
    out = solve(_identity(np.zeros((2, 3))), delta=1.0)
    assert out.iterations == 0
    assert_array_equal(out.x_star, np.zeros((2, 3)))


def test_lanczos_identity_terminates_in_one_step():
    E = np.array([[1.0, 2.0], [3.0, 4.0]])
    st_ = LanczosState(0, None, E / frob_norm(E), frob_norm(E))
    lanczos_step(_identity(E), st_)
    assert st_.diag == [pytest.approx(1.0, rel=1e-15)]
    assert st_.offdiag[0] <= 1e-15
    assert st_.terminated


def test_variants_agree_on_tridiagonal():
    rng = np.random.default_rng(1)
    for _ in range(5):
        spec = _random_gen_sylvester(rng)
        a = solve(spec, delta=1e-3, variant="basic31", keep_history=True)
        h = a.history
        for dc, dl in zip(h["delta_cg"], h["delta_lanczos"]):
            assert abs(dc - dl) <= 1e-10 * abs(dl)


def test_tridiagonal_spectrum_inside_operator_spectrum():
    rng = np.random.default_rng(2)
    for _ in range(5):
        spec = _random_gen_sylvester(rng)
        M = assemble(spec).m_mat
        lmax = np.linalg.eigvalsh(M.T @ M).max()
        out = solve(spec, delta=1e-2)
        ev = out.tridiag.eigvalsh()
        assert ev.min() >= -1e-10 * lmax
        assert ev.max() <= lmax * (1 + 1e-10)


def test_assemble_boundary_solution_examples():
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.standard_normal((9, 4)))
    basis = [q[:, i].reshape(3, 3) for i in range(4)]
    assert_array_equal(assemble_boundary_solution(basis, [1, 0, 0, 0]), basis[0])
    assert_array_equal(assemble_boundary_solution(basis, np.zeros(4)), np.zeros((3, 3)))
    h = rng.standard_normal(4)
    assert frob_norm(assemble_boundary_solution(basis, h)) == pytest.approx(np.linalg.norm(h), rel=1e-12)
    with pytest.raises(DimensionError):
        assemble_boundary_solution(basis, np.ones(3))


def test_iteration_limit_carries_best_iterate():
    spec = _random_gen_sylvester(np.random.default_rng(4))
    with pytest.raises(IterationLimitError) as info:
        solve(spec, delta=1e3, max_iter=2)
    out = info.value.outcome
    assert out is not None and not out.converged
    assert out.iterations == 2
    assert np.all(np.isfinite(out.x_star))


def test_iteration_limit_on_boundary():
    spec = _random_gen_sylvester(np.random.default_rng(5))
    with pytest.raises(IterationLimitError) as info:
        solve(spec, delta=1e-3, max_iter=3)
    assert frob_norm(info.value.outcome.x_star) <= 1e-3 * (1 + 1e-12)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_detected():
    op = FunctionOperator(lambda x: x * np.inf, lambda y: y, (2, 2), (2, 2))
    with pytest.raises(NumericalBreakdownError) as info:
        solve(op, np.ones((2, 2)), delta=10.0)
    assert info.value.iteration == 0


def test_rhs_shape_checked():
    with pytest.raises(DimensionError):
        solve(_identity(np.ones((2, 2))), np.ones((3, 2)))


@pytest.mark.parametrize("kw", [{"delta": 0}, {"eps": -1}, {"max_iter": 0}, {"variant": "x"},
                                {"reorthogonalize": True, "retain_basis": False}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_two_pass_matches_retained_basis():
    spec = _random_gen_sylvester(np.random.default_rng(6))
    a = solve(spec, delta=0.1)
    b = solve(spec, delta=0.1, retain_basis=False)
    assert a.branch == "boundary"
    assert frob_norm(a.x_star - b.x_star) <= 1e-10 * frob_norm(a.x_star)


def test_trace_records():
    spec = _random_gen_sylvester(np.random.default_rng(7))
    out = solve(spec, delta=0.1)
    assert [t.k for t in out.trace] == list(range(len(out.trace)))
    assert {t.branch for t in out.trace} <= {"interior", "boundary"}
    assert out.trace[-1].branch == "boundary"
    assert solve(spec, delta=0.1, trace=False).trace == []


@pytest.mark.parametrize("seed", range(3))
def test_recurrence_invariants(seed):
    spec = well_conditioned_problem(seed)
    nu = oracle_solve(assemble(spec)).unconstrained_norm
    for mult in (2.0, 0.5):
        out = solve(spec, delta=mult * nu, variant="basic31", keep_history=True, eps=1e-12)
        errs = invariant_errors(spec, out)
        for name, tol in INVARIANT_TOLS.items():
            assert errs[name] <= tol, name


def test_norm_increasing_with_reorthogonalization():
    spec = well_conditioned_problem(0, scale=0.3)
    out = solve(spec, delta=1e6, reorthogonalize=True)
    norms = [t.norm_X for t in out.trace]
    assert all(b > a for a, b in zip(norms, norms[1:]))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4),
       mult=st.sampled_from([0.1, 0.5, 1.0, 2.0]))
def test_solution_invariants(seed, n, mult):
    rng = np.random.default_rng(seed)
    spec = _random_gen_sylvester(rng, n)
    nu = oracle_solve(assemble(spec)).unconstrained_norm
    delta = max(mult * nu, 1e-6)
    out = solve(spec, delta=delta)
    assert out.norm_x <= delta * (1 + 1e-12)
    assert out.lambda_star >= 0
    if out.branch == "interior":
        assert out.lambda_star == 0
    assert out.iterations <= 4 * n * n
    assert out.kkt_residual <= 1e-6 * out.gamma0
    assert abs(out.comp_slack) <= 1e-6 * delta
