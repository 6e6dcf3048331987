import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from sylvgltr.errors import DimensionError
from sylvgltr.experiments import random_family_instance
from sylvgltr.matcore import CommutationPerm, frob_inner, frob_norm, kron, vec
from sylvgltr.operators import (
    FAMILIES,
    Circulant,
    Dense,
    Diagonal,
    Downsampler,
    EquationSpec,
    FunctionOperator,
    Identity,
    Product,
    Sparse,
    Transposed,
    apply_f,
    apply_fstar,
    make_family,
    structured_apply,
)
from sylvgltr.oracle import assemble


def _adjoint_gap(op, rng):
    x = rng.standard_normal(op.domain_shape)
    y = rng.standard_normal(op.codomain_shape)
    gap = abs(frob_inner(op.apply(x), y) - frob_inner(x, op.apply_adjoint(y)))
    return gap, frob_norm(x) * frob_norm(y)


# apply_f / apply_fstar ========================================================
def test_identity_apply():
    spec = make_family("axb", {"A": np.eye(2), "B": np.eye(2)})
    x = np.array([[1.0, 2], [3, 4]])
    assert_array_equal(apply_f(spec, x), x)
    assert_array_equal(apply_fstar(spec, x), x)


def test_x_plus_xt():
    spec = make_family("t_sylvester", {"A": np.eye(2), "D": np.eye(2)})
    assert_array_equal(apply_f(spec, np.array([[0.0, 1], [0, 0]])), [[0, 1], [1, 0]])


def test_t_term_adjoint_is_transpose():
    spec = EquationSpec([], [(np.eye(2), np.eye(2))])
    assert_array_equal(apply_fstar(spec, np.array([[0.0, 1], [0, 0]])), [[0, 0], [1, 0]])


def test_three_term_matches_vectorized():
    rng = np.random.default_rng(0)
    m, n, p, q = 4, 3, 5, 2
    A1, A2 = rng.standard_normal((2, p, m))
    B1, B2 = rng.standard_normal((2, n, q))
    C = rng.standard_normal((p, n))
    D = rng.standard_normal((m, q))
    spec = EquationSpec([(A1, B1), (A2, B2)], [(C, D)])
    x = rng.standard_normal((m, n))
    M = kron(B1.T, A1) + kron(B2.T, A2) + kron(D.T, C) @ CommutationPerm(m, n).todense()
    assert_allclose(vec(apply_f(spec, x)), M @ vec(x), rtol=1e-12, atol=1e-12)


def test_random_adjoint_5x4_to_6x3():
    rng = np.random.default_rng(1)
    spec = EquationSpec([(rng.standard_normal((6, 5)), rng.standard_normal((4, 3)))],
                        [(rng.standard_normal((6, 4)), rng.standard_normal((5, 3)))])
    gap, scale = _adjoint_gap(spec, rng)
    assert gap <= 1e-12 * scale


def test_shape_errors():
    spec = make_family("axb", {"A": np.ones((3, 2)), "B": np.ones((4, 5))})
    with pytest.raises(DimensionError):
        apply_f(spec, np.ones((3, 4)))
    with pytest.raises(DimensionError):
        apply_fstar(spec, np.ones((2, 4)))
    with pytest.raises(DimensionError):
        EquationSpec([(np.ones((3, 2)), np.ones((4, 5))), (np.ones((3, 3)), np.ones((4, 5)))])
    with pytest.raises(DimensionError):
        EquationSpec([])
    with pytest.raises(DimensionError):
        make_family("sylvester", {"A": np.ones((2, 3)), "D": np.eye(2)})
    with pytest.raises(DimensionError):
        spec.with_rhs(np.ones((2, 2)))


def test_unknown_family():
    with pytest.raises(ValueError, match="unknown"):
        make_family("nope", {})
    with pytest.raises(ValueError, match="needs"):
        make_family("axb", {"A": np.eye(2)})


# Families =====================================================================
def test_clyap_example():
    spec = make_family("clyap", {"A": np.array([[0.0, 1], [0, 0]])})
    assert_array_equal(apply_f(spec, np.eye(2)), [[0, 1], [1, 0]])


def test_dlyap_identity_is_zero():
    spec = make_family("dlyap", {"A": np.eye(2)})
    x = np.random.default_rng(2).standard_normal((2, 2))
    assert_array_equal(apply_f(spec, x), np.zeros((2, 2)))


def test_stein_zero_is_identity():
    spec = make_family("stein", {"A": np.zeros((3, 3)), "B": np.zeros((2, 2))})
    x = np.random.default_rng(3).standard_normal((3, 2))
    assert_array_equal(apply_f(spec, x), x)


def test_family_left_sides():
    rng = np.random.default_rng(4)
    A, B, C, D = rng.standard_normal((4, 3, 3))
    X = rng.standard_normal((3, 3))
    expect = {
        "axb": (("A", "B"), A @ X @ B),
        "sylvester": (("A", "D"), A @ X + X @ D),
        "gen_sylvester": (("A", "B", "C", "D"), A @ X @ B + C @ X @ D),
        "stein": (("A", "B"), A @ X @ B + X),
        "t_sylvester": (("A", "D"), A @ X + X.T @ D),
        "gen_t_sylvester": (("A", "B", "C", "D"), A @ X @ B + C @ X.T @ D),
        "stein_t": (("A", "B"), A @ X @ B + X.T),
        "dlyap": (("A",), A @ X @ A.T - X),
        "clyap": (("A",), A @ X + X @ A.T),
        "structured_sylvester": (("A", "D"), A @ X + X @ D),
    }
    assert set(expect) == set(FAMILIES)
    mats = dict(A=A, B=B, C=C, D=D)
    for name, (keys, lhs) in expect.items():
        spec = make_family(name, {k: mats[k] for k in keys})
        assert_allclose(apply_f(spec, X), lhs, rtol=1e-13, atol=1e-13, err_msg=name)


def test_sylvester_identity_factors_are_symbolic():
    spec = make_family("sylvester", {"A": np.eye(3), "D": np.eye(4)})
    assert isinstance(spec.sylvester_terms[0].b, Identity)
    assert isinstance(spec.sylvester_terms[1].a, Identity)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_family_adjoint_and_vectorization(name):
    rng = np.random.default_rng([13, sorted(FAMILIES).index(name)])
    for _ in range(100):
        spec = random_family_instance(name, rng, max_size=5)
        gap, scale = _adjoint_gap(spec, rng)
        assert gap <= 1e-12 * scale
    for _ in range(10):
        spec = random_family_instance(name, rng, max_size=5)
        M = assemble(spec).m_mat
        x = rng.standard_normal(spec.domain_shape)
        y = vec(apply_f(spec, x))
        assert np.linalg.norm(y - M @ vec(x)) <= 1e-12 * max(np.linalg.norm(y), 1e-300)


def test_t_term_vectorization_brute_force():
    rng = np.random.default_rng(5)
    C = rng.standard_normal((4, 2))
    D = rng.standard_normal((3, 5))
    X = rng.standard_normal((3, 2))
    P = CommutationPerm(3, 2).todense()
    assert_allclose(vec(C @ X.T @ D), kron(D.T, C) @ P @ vec(X), rtol=1e-13)


@settings(max_examples=50, deadline=None)
@given(name=st.sampled_from(sorted(FAMILIES)), seed=st.integers(0, 2**32 - 1))
def test_linearity(name, seed):
    rng = np.random.default_rng(seed)
    spec = random_family_instance(name, rng, max_size=5)
    x, z = rng.standard_normal((2,) + spec.domain_shape)
    a = rng.standard_normal()
    lhs = spec.apply(a * x + z)
    rhs = a * spec.apply(x) + spec.apply(z)
    assert frob_norm(lhs - rhs) <= 1e-12 * max(frob_norm(lhs), frob_norm(rhs), 1.0)


# Structured factors ===========================================================
def _check_factor(f, rng, rtol=1e-10):
    dense = f.todense()
    n, k = f.shape
    x = rng.standard_normal((k, 3))
    y = rng.standard_normal((3, n))
    assert_allclose(f.matmul(x), dense @ x, rtol=rtol, atol=rtol * np.abs(dense).max())
    assert_allclose(f.matmul(rng.standard_normal((n, 2)), True).shape, (k, 2))
    xt = rng.standard_normal((n, 2))
    assert_allclose(f.matmul(xt, True), dense.T @ xt, rtol=rtol, atol=rtol * np.abs(dense).max())
    assert_allclose(f.rmatmul(y), y @ dense, rtol=rtol, atol=rtol * np.abs(dense).max())
    yt = rng.standard_normal((3, k))
    assert_allclose(f.rmatmul(yt, True), yt @ dense.T, rtol=rtol, atol=rtol * np.abs(dense).max())
    assert_allclose(f.T.todense(), dense.T, atol=1e-12)


def test_structured_factors_match_dense():
    rng = np.random.default_rng(6)
    _check_factor(Dense(rng.standard_normal((5, 4))), rng)
    _check_factor(Sparse(sp.random(6, 5, density=0.3, random_state=1)), rng)
    _check_factor(Identity(4, 2.5), rng)
    _check_factor(Diagonal(rng.standard_normal(5)), rng)
    _check_factor(Circulant(rng.standard_normal(16)), rng)
    _check_factor(Circulant(rng.standard_normal(24), grid=(4, 6)), rng)
    _check_factor(Downsampler.grid(6, 8, 2), rng)
    _check_factor(Transposed(Dense(rng.standard_normal((3, 5)))), rng)
    blur = Circulant.from_kernel(rng.uniform(size=(3, 3)), (8, 8))
    down = Downsampler.grid(8, 8, 2)
    _check_factor(Product([blur, down]), rng)
    _check_factor(Product([blur, down, down.T, blur.T]), rng)


def test_structured_apply_examples():
    rng = np.random.default_rng(7)
    d = rng.standard_normal(4)
    x = rng.standard_normal((4, 3))
    assert_allclose(structured_apply(Diagonal(d), x), d[:, None] * x)
    c = rng.standard_normal(16)
    dense = np.column_stack([np.roll(c, j) for j in range(16)])
    xc = rng.standard_normal((16, 2))
    out = structured_apply(Circulant(c), xc)
    assert np.linalg.norm(out - dense @ xc) <= 1e-10 * np.linalg.norm(dense @ xc)
    with pytest.raises(ValueError):
        structured_apply(Diagonal(d), x, side="middle")
    with pytest.raises(DimensionError):
        structured_apply(Diagonal(d), rng.standard_normal((3, 3)))


def test_downsampler_left_inverse_and_idempotence():
    s = Downsampler.grid(6, 6, 3)
    sd = s.todense()
    assert_array_equal(sd.T @ sd, np.eye(s.shape[1]))
    x = np.random.default_rng(8).standard_normal((2, 36))
    once = structured_apply(s, x, side="right")
    thrice = s.rmatmul(s.rmatmul(once, transpose=True))
    assert_array_equal(thrice, once)
    with pytest.raises(DimensionError):
        Downsampler(4, [0, 0])
    with pytest.raises(DimensionError):
        Downsampler(4, [5])


def test_circulant_preserves_constants_and_symmetry():
    k = np.array([[0.0, 1, 0], [1, 4, 1], [0, 1, 0]]) / 8
    c = Circulant.from_kernel(k, (8, 8))
    assert_allclose(c.matmul(np.ones((64, 1))), np.ones((64, 1)), atol=1e-14)
    assert_allclose(c.todense(), c.todense().T, atol=1e-14)
    with pytest.raises(DimensionError):
        Circulant(np.ones(10), grid=(3, 3))


def test_composite_adjoints():
    rng = np.random.default_rng(9)
    blur = Circulant.from_kernel(rng.uniform(size=(3, 3)), (4, 8))
    down = Downsampler.grid(4, 8, 2)
    for f in (Product([blur, down]), Product([blur, down, down.T, blur.T]), Transposed(blur)):
        for _ in range(20):
            x = rng.standard_normal((f.shape[1], 3))
            y = rng.standard_normal((f.shape[0], 3))
            gap = abs(frob_inner(f.matmul(x), y) - frob_inner(x, f.matmul(y, True)))
            assert gap <= 1e-12 * frob_norm(x) * frob_norm(y)


def test_sparse_apply_cost_is_structural():
    A = np.eye(3)
    D = sp.random(100, 100, density=0.05, random_state=0) + sp.eye(100)
    sparse_spec = make_family("sylvester", {"A": A, "D": D})
    dense_spec = make_family("sylvester", {"A": A, "D": D.toarray()})
    assert sparse_spec.apply_cost() < 0.2 * dense_spec.apply_cost()
    x = np.random.default_rng(10).standard_normal((3, 100))
    assert_allclose(sparse_spec.apply(x), dense_spec.apply(x), rtol=1e-14, atol=1e-13)


def test_function_operator_wraps_callables():
    a = np.random.default_rng(11).standard_normal((3, 3))
    op = FunctionOperator(lambda x: a @ x, lambda y: a.T @ y, (3, 2), (3, 2))
    gap, scale = _adjoint_gap(op, np.random.default_rng(12))
    assert gap <= 1e-12 * scale
