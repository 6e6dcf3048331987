"""Linear matrix functions ``f(X) = sum A X B + sum C X^T D`` and their adjoints.

Coefficients are wrapped in :class:`Factor` objects so that dense, sparse,
diagonal, circulant (FFT-applied), downsampling and product structure can be
mixed freely inside one equation. Every factor knows how to multiply from the
left or right, optionally transposed, and how many scalar multiply-adds that
costs.
"""

import abc
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError
from .matcore import as_dense, as_sparse, frob_norm, is_sparse

__all__ = [
    "Factor",
    "Dense",
    "Sparse",
    "Identity",
    "Diagonal",
    "Circulant",
    "Downsampler",
    "Product",
    "Transposed",
    "as_factor",
    "structured_apply",
    "MatrixOperator",
    "FunctionOperator",
    "SylvesterTerm",
    "TTerm",
    "EquationSpec",
    "apply_f",
    "apply_fstar",
    "FAMILIES",
    "make_family",
]


# Factors =====================================================================
class Factor(abc.ABC):
    """A matrix ``F`` known only through products with dense blocks."""

    shape = (0, 0)

    @abc.abstractmethod
    def matmul(self, x, transpose=False):
        """``F @ x`` (or ``F.T @ x``)."""

    @abc.abstractmethod
    def rmatmul(self, x, transpose=False):
        """``x @ F`` (or ``x @ F.T``)."""

    @abc.abstractmethod
    def todense(self):
        pass

    @abc.abstractmethod
    def cost(self, k):
        """Scalar multiply-adds for one product with a k-column (or k-row) block."""

    @property
    def T(self):
        return Transposed(self)

    def _check(self, x, dim, transpose, side):
        rows, cols = self.shape
        want = (rows if transpose else cols) if side == "left" else (cols if transpose else rows)
        if x.shape[dim] != want:
            raise DimensionError(
                f"{type(self).__name__} of shape {self.shape} cannot multiply "
                f"operand of shape {x.shape} ({side}, transpose={transpose})"
            )

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape})"


class Dense(Factor):
    def __init__(self, a):
        self.a = as_dense(a)
        self.a.flags.writeable = False
        self.shape = self.a.shape

    def matmul(self, x, transpose=False):
        self._check(x, 0, transpose, "left")
        return (self.a.T if transpose else self.a) @ x

    def rmatmul(self, x, transpose=False):
        self._check(x, 1, transpose, "right")
        return x @ (self.a.T if transpose else self.a)

    def todense(self):
        return np.array(self.a)

    def cost(self, k):
        return self.shape[0] * self.shape[1] * k

    @property
    def T(self):
        return Dense(self.a.T)


class Sparse(Factor):
    def __init__(self, a):
        self.a = as_sparse(a)
        self.at = sp.csr_array(self.a.T)
        self.shape = self.a.shape

    def matmul(self, x, transpose=False):
        self._check(x, 0, transpose, "left")
        return (self.at if transpose else self.a) @ x

    def rmatmul(self, x, transpose=False):
        self._check(x, 1, transpose, "right")
        # x @ F == (F.T @ x.T).T keeps the sparse operand on the left
        return ((self.a if transpose else self.at) @ x.T).T

    def todense(self):
        return self.a.toarray()

    def cost(self, k):
        return self.a.nnz * k

    @property
    def nnz(self):
        return self.a.nnz


class Identity(Factor):
    """``scale * I_n`` without materialising the identity."""

    def __init__(self, n, scale=1.0):
        self.n = int(n)
        self.scale = float(scale)
        self.shape = (self.n, self.n)

    def matmul(self, x, transpose=False):
        self._check(x, 0, transpose, "left")
        return x if self.scale == 1.0 else self.scale * x

    def rmatmul(self, x, transpose=False):
        self._check(x, 1, transpose, "right")
        return x if self.scale == 1.0 else self.scale * x

    def todense(self):
        return self.scale * np.eye(self.n)

    def cost(self, k):
        return 0 if self.scale == 1.0 else self.n * k

    @property
    def T(self):
        return self

    def __repr__(self):
        return f"Identity(n={self.n}, scale={self.scale})"


class Diagonal(Factor):
    def __init__(self, d):
        self.d = np.asarray(as_dense(d), dtype=np.float64).reshape(-1)
        self.shape = (self.d.size, self.d.size)

    def matmul(self, x, transpose=False):
        self._check(x, 0, transpose, "left")
        return self.d[:, None] * x

    def rmatmul(self, x, transpose=False):
        self._check(x, 1, transpose, "right")
        return x * self.d[None, :]

    def todense(self):
        return np.diag(self.d)

    def cost(self, k):
        return self.d.size * k

    @property
    def T(self):
        return self


class Circulant(Factor):
    """Cyclic convolution, diagonalised by the real FFT.

    ``column`` is the first column of the matrix. With ``grid=(h, w)`` the
    vector index ``p = r*w + s`` is read as a pixel of an ``h x w`` image and
    the operator is the 2-D cyclic convolution with kernel
    ``column.reshape(h, w)`` (block circulant with circulant blocks).
    """

    def __init__(self, column, grid=None):
        c = np.asarray(as_dense(column)).reshape(-1)
        self.column = c
        n = c.size
        self.grid = (n,) if grid is None else tuple(int(g) for g in grid)
        if math.prod(self.grid) != n:
            raise DimensionError(f"grid {self.grid} does not match length {n}")
        self.shape = (n, n)
        self._eig = np.fft.rfftn(c.reshape(self.grid))

    @classmethod
    def from_kernel(cls, kernel, grid):
        """Centered convolution kernel (odd sizes) placed cyclically on ``grid``."""
        kernel = np.asarray(kernel, dtype=np.float64)
        if kernel.ndim == 1:
            kernel = kernel[:, None] if len(grid) == 2 else kernel
        base = np.zeros(grid)
        if len(grid) == 1:
            kh = kernel.shape[0]
            for i in range(kh):
                base[(i - kh // 2) % grid[0]] += kernel[i]
        else:
            kh, kw = kernel.shape
            for i in range(kh):
                for j in range(kw):
                    base[(i - kh // 2) % grid[0], (j - kw // 2) % grid[1]] += kernel[i, j]
        return cls(base.reshape(-1), grid=grid)

    @property
    def eigenvalues(self):
        """Transfer function on the real-FFT half spectrum."""
        return self._eig

    def _conv(self, x, axis0, transpose):
        nd = len(self.grid)
        lead, trail = x.shape[:axis0], x.shape[axis0 + 1:]
        imgs = x.reshape(lead + self.grid + trail)
        axes = tuple(range(axis0, axis0 + nd))
        eig = np.conj(self._eig) if transpose else self._eig
        eig = eig.reshape((1,) * len(lead) + eig.shape + (1,) * len(trail))
        out = np.fft.irfftn(np.fft.rfftn(imgs, axes=axes) * eig, s=self.grid, axes=axes)
        return out.reshape(x.shape)

    def matmul(self, x, transpose=False):
        self._check(x, 0, transpose, "left")
        return self._conv(np.asarray(x, dtype=np.float64), 0, transpose)

    def rmatmul(self, x, transpose=False):
        self._check(x, 1, transpose, "right")
        # x @ C == (C.T @ x.T).T
        return self._conv(np.asarray(x, dtype=np.float64), 1, not transpose)

    def todense(self):
        n = self.shape[0]
        return self.matmul(np.eye(n))

    def cost(self, k):
        n = self.shape[0]
        # two real transforms plus the pointwise product
        return int(k * (2 * 2.5 * n * math.log2(max(n, 2)) + n))

    @property
    def T(self):
        return _CirculantT(self)


class _CirculantT(Circulant):
    def __init__(self, base):
        self.base = base
        self.column = None
        self.grid = base.grid
        self.shape = base.shape
        self._eig = np.conj(base._eig)

    @property
    def T(self):
        return self.base


class Downsampler(Factor):
    """Column selector ``S`` (``n_full x n_kept``) with ``S.T @ S = I``.

    ``x @ S`` keeps the columns listed in ``keep``; ``y @ S.T`` scatters them
    back with zeros elsewhere.
    """

    def __init__(self, n_full, keep):
        keep = np.asarray(keep, dtype=np.int64).reshape(-1)
        if keep.size and (keep.min() < 0 or keep.max() >= n_full):
            raise DimensionError("downsampler index out of range")
        if np.unique(keep).size != keep.size:
            raise DimensionError("downsampler indices must be distinct")
        self.n_full = int(n_full)
        self.keep = keep
        self.shape = (self.n_full, keep.size)

    @classmethod
    def grid(cls, height, width, factor, offset=(0, 0)):
        """Keep every ``factor``-th pixel along both axes of a row-major image."""
        rows = np.arange(offset[0], height, factor)
        cols = np.arange(offset[1], width, factor)
        keep = (rows[:, None] * width + cols[None, :]).reshape(-1)
        return cls(height * width, keep)

    def matmul(self, x, transpose=False):
        self._check(x, 0, transpose, "left")
        if transpose:
            return x[self.keep]
        out = np.zeros((self.n_full,) + x.shape[1:])
        out[self.keep] = x
        return out

    def rmatmul(self, x, transpose=False):
        self._check(x, 1, transpose, "right")
        if not transpose:
            return x[:, self.keep]
        out = np.zeros(x.shape[:1] + (self.n_full,))
        out[:, self.keep] = x
        return out

    def todense(self):
        s = np.zeros(self.shape)
        s[self.keep, np.arange(self.keep.size)] = 1.0
        return s

    def cost(self, k):
        return 0


class Product(Factor):
    """``F_1 @ F_2 @ ... @ F_k`` applied factor by factor."""

    def __init__(self, factors):
        self.factors = [as_factor(f) for f in factors]
        if not self.factors:
            raise DimensionError("empty product")
        for left, right in zip(self.factors, self.factors[1:]):
            if left.shape[1] != right.shape[0]:
                raise DimensionError(f"cannot chain {left!r} with {right!r}")
        self.shape = (self.factors[0].shape[0], self.factors[-1].shape[1])

    def matmul(self, x, transpose=False):
        self._check(x, 0, transpose, "left")
        seq = self.factors if transpose else reversed(self.factors)
        for f in seq:
            x = f.matmul(x, transpose)
        return x

    def rmatmul(self, x, transpose=False):
        self._check(x, 1, transpose, "right")
        seq = reversed(self.factors) if transpose else self.factors
        for f in seq:
            x = f.rmatmul(x, transpose)
        return x

    def todense(self):
        out = self.factors[0].todense()
        for f in self.factors[1:]:
            out = f.rmatmul(out)
        return out

    def cost(self, k):
        return sum(f.cost(k) for f in self.factors)

    @property
    def T(self):
        return Product([f.T for f in reversed(self.factors)])


class Transposed(Factor):
    def __init__(self, base):
        self.base = base
        self.shape = base.shape[::-1]

    def matmul(self, x, transpose=False):
        return self.base.matmul(x, not transpose)

    def rmatmul(self, x, transpose=False):
        return self.base.rmatmul(x, not transpose)

    def todense(self):
        return self.base.todense().T

    def cost(self, k):
        return self.base.cost(k)

    @property
    def T(self):
        return self.base


def as_factor(a):
    if isinstance(a, Factor):
        return a
    if is_sparse(a):
        return Sparse(a)
    return Dense(a)


def structured_apply(factor, x, side="left", transposed=False):
    """Multiply ``x`` by ``factor`` from ``side`` ('left' or 'right')."""
    factor = as_factor(factor)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError("operand must be 2-D")
    if side == "left":
        return factor.matmul(x, transposed)
    if side == "right":
        return factor.rmatmul(x, transposed)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


# Operators ===================================================================
class MatrixOperator(abc.ABC):
    """Linear map between matrix spaces with an explicit adjoint."""

    domain_shape = (0, 0)
    codomain_shape = (0, 0)

    @abc.abstractmethod
    def apply(self, x):
        pass

    @abc.abstractmethod
    def apply_adjoint(self, y):
        pass

    def apply_cost(self):
        """Multiply-adds per :meth:`apply`, when known."""
        return None


class FunctionOperator(MatrixOperator):
    """Wrap a pair of callables ``(f, f_star)`` as a :class:`MatrixOperator`."""

    def __init__(self, apply, apply_adjoint, domain_shape, codomain_shape):
        self._apply = apply
        self._adjoint = apply_adjoint
        self.domain_shape = tuple(domain_shape)
        self.codomain_shape = tuple(codomain_shape)

    def apply(self, x):
        return self._apply(x)

    def apply_adjoint(self, y):
        return self._adjoint(y)


@dataclass(frozen=True)
class SylvesterTerm:
    """``a @ X @ b``"""

    a: Factor
    b: Factor

    def __post_init__(self):
        object.__setattr__(self, "a", as_factor(self.a))
        object.__setattr__(self, "b", as_factor(self.b))


@dataclass(frozen=True)
class TTerm:
    """``c @ X.T @ d``"""

    c: Factor
    d: Factor

    def __post_init__(self):
        object.__setattr__(self, "c", as_factor(self.c))
        object.__setattr__(self, "d", as_factor(self.d))


def _term(t, cls):
    if isinstance(t, cls):
        return t
    first, second = t
    return cls(as_factor(first), as_factor(second))


class EquationSpec(MatrixOperator):
    """The linear matrix function ``f`` together with a right-hand side ``E``.

    Parameters
    ----------
    sylvester_terms : list of ``(A, B)`` pairs, each contributing ``A X B``.
    t_terms : list of ``(C, D)`` pairs, each contributing ``C X^T D``.
    rhs : right-hand side ``E`` (may be None for a bare operator).
    name : optional family name for reporting.
    """

    def __init__(self, sylvester_terms=(), t_terms=(), rhs=None, name=None):
        self.sylvester_terms = tuple(_term(t, SylvesterTerm) for t in sylvester_terms)
        self.t_terms = tuple(_term(t, TTerm) for t in t_terms)
        if not self.sylvester_terms and not self.t_terms:
            raise DimensionError("an equation needs at least one term")
        self.name = name
        shapes = set()
        for t in self.sylvester_terms:
            (p, m), (n, q) = t.a.shape, t.b.shape
            shapes.add((m, n, p, q))
        for t in self.t_terms:
            (p, n), (m, q) = t.c.shape, t.d.shape
            shapes.add((m, n, p, q))
        if len(shapes) != 1:
            raise DimensionError(f"terms disagree on (m, n, p, q): {sorted(shapes)}")
        m, n, p, q = shapes.pop()
        self.domain_shape = (m, n)
        self.codomain_shape = (p, q)
        if rhs is not None:
            rhs = as_dense(rhs)
            if rhs.shape != self.codomain_shape:
                raise DimensionError(
                    f"rhs has shape {rhs.shape}, expected {self.codomain_shape}"
                )
            rhs.flags.writeable = False
        self.rhs = rhs

    def with_rhs(self, rhs):
        return EquationSpec(self.sylvester_terms, self.t_terms, rhs, self.name)

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.domain_shape:
            raise DimensionError(f"X has shape {x.shape}, expected {self.domain_shape}")
        out = np.zeros(self.codomain_shape)
        for t in self.sylvester_terms:
            out += t.a.matmul(t.b.rmatmul(x))
        if self.t_terms:
            xt = x.T
            for t in self.t_terms:
                out += t.c.matmul(t.d.rmatmul(xt))
        return out

    def apply_adjoint(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != self.codomain_shape:
            raise DimensionError(f"Y has shape {y.shape}, expected {self.codomain_shape}")
        out = np.zeros(self.domain_shape)
        for t in self.sylvester_terms:
            out += t.a.matmul(t.b.rmatmul(y, True), True)
        if self.t_terms:
            yt = y.T
            for t in self.t_terms:
                out += t.d.matmul(t.c.rmatmul(yt))
        return out

    def apply_cost(self):
        m, n = self.domain_shape
        p, q = self.codomain_shape
        total = 0
        for t in self.sylvester_terms:
            total += t.b.cost(m) + t.a.cost(q)
        for t in self.t_terms:
            total += t.d.cost(n) + t.c.cost(q)
        return total

    def residual_norm(self, x):
        return frob_norm(self.apply(x) - self.rhs)

    def __repr__(self):
        return (
            f"EquationSpec(name={self.name!r}, k0={len(self.sylvester_terms)}, "
            f"j0={len(self.t_terms)}, domain={self.domain_shape}, "
            f"codomain={self.codomain_shape})"
        )


def apply_f(spec, x):
    return spec.apply(x)


def apply_fstar(spec, y):
    return spec.apply_adjoint(y)


# Equation families ===========================================================
def _fac(a):
    return as_factor(a)


def _square(f, label):
    if f.shape[0] != f.shape[1]:
        raise DimensionError(f"{label} must be square, got {f.shape}")


def one_term(A, B, E=None):
    """``A X B = E``"""
    return EquationSpec([(A, B)], rhs=E, name="axb")


def sylvester(A, D, E=None):
    """Classical ``A X + X D = E``"""
    A, D = _fac(A), _fac(D)
    _square(A, "A")
    _square(D, "D")
    return EquationSpec(
        [(A, Identity(D.shape[0])), (Identity(A.shape[0]), D)], rhs=E, name="sylvester"
    )


def generalized_sylvester(A, B, C, D, E=None):
    """``A X B + C X D = E``"""
    return EquationSpec([(A, B), (C, D)], rhs=E, name="gen_sylvester")


def stein(A, B, E=None):
    """``A X B + X = E``"""
    A, B = _fac(A), _fac(B)
    return EquationSpec(
        [(A, B), (Identity(A.shape[1]), Identity(B.shape[0]))], rhs=E, name="stein"
    )


def t_sylvester(A, D, E=None):
    """``A X + X^T D = E``"""
    A, D = _fac(A), _fac(D)
    n = D.shape[1]
    return EquationSpec(
        [(A, Identity(n))], [(Identity(A.shape[0]), D)], rhs=E, name="t_sylvester"
    )


def generalized_t_sylvester(A, B, C, D, E=None):
    """``A X B + C X^T D = E``"""
    return EquationSpec([(A, B)], [(C, D)], rhs=E, name="gen_t_sylvester")


def stein_t(A, B, E=None):
    """``A X B + X^T = E``"""
    A, B = _fac(A), _fac(B)
    m, n = A.shape[1], B.shape[0]
    return EquationSpec([(A, B)], [(Identity(n), Identity(m))], rhs=E, name="stein_t")


def discrete_lyapunov(A, E=None):
    """``A X A^T - X = E``"""
    A = _fac(A)
    _square(A, "A")
    n = A.shape[0]
    return EquationSpec(
        [(A, A.T), (Identity(n, -1.0), Identity(n))], rhs=E, name="dlyap"
    )


def continuous_lyapunov(A, E=None):
    """``A X + X A^T = E``"""
    A = _fac(A)
    _square(A, "A")
    n = A.shape[0]
    return EquationSpec([(A, Identity(n)), (Identity(n), A.T)], rhs=E, name="clyap")


def structured_sylvester(A, D, E=None):
    """``A X + X D = E`` where ``D`` is typically a large structured factor."""
    spec = sylvester(A, D, E)
    spec.name = "structured_sylvester"
    return spec


# name -> (constructor, coefficient argument names)
FAMILIES = {
    "axb": (one_term, ("A", "B")),
    "sylvester": (sylvester, ("A", "D")),
    "gen_sylvester": (generalized_sylvester, ("A", "B", "C", "D")),
    "stein": (stein, ("A", "B")),
    "t_sylvester": (t_sylvester, ("A", "D")),
    "gen_t_sylvester": (generalized_t_sylvester, ("A", "B", "C", "D")),
    "stein_t": (stein_t, ("A", "B")),
    "dlyap": (discrete_lyapunov, ("A",)),
    "clyap": (continuous_lyapunov, ("A",)),
    "structured_sylvester": (structured_sylvester, ("A", "D")),
}


def make_family(name, matrices, E=None):
    """Build a family by name from a mapping of coefficient names to matrices."""
    try:
        ctor, names = FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown equation family {name!r}; known: {sorted(FAMILIES)}")
    missing = [k for k in names if k not in matrices]
    if missing:
        raise ValueError(f"family {name!r} needs matrices {missing}")
    return ctor(*(matrices[k] for k in names), E=E)
