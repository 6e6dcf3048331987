"""Matrix value helpers: validation, Frobenius geometry, vec/Kronecker tools.

Dense matrices are plain 2-D ``float64`` numpy arrays and sparse matrices are
canonical ``scipy.sparse.csr_array`` objects. The helpers here validate and
normalise inputs, and supply the handful of kernels the solver relies on.

``vec`` stacks columns (Fortran order) so that
``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.
"""

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, NonFiniteError

__all__ = [
    "as_dense",
    "as_sparse",
    "is_sparse",
    "densify",
    "sparse_triples",
    "frob_inner",
    "frob_norm",
    "kron",
    "vec",
    "unvec",
    "CommutationPerm",
]


def _check_finite(values):
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("matrix contains NaN or Inf entries")


def as_dense(a):
    """Return ``a`` as a finite 2-D float64 array (copying only when needed)."""
    if is_sparse(a):
        a = a.toarray()
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    _check_finite(arr)
    return arr


def is_sparse(a):
    return sp.issparse(a)


def as_sparse(a, shape=None):
    """Canonical CSR array: duplicates summed, indices sorted, finite values.

    ``a`` may be anything ``scipy.sparse`` understands, or a list of
    ``(row, col, value)`` triples together with ``shape``.
    """
    if isinstance(a, (list, tuple)) and (len(a) == 0 or len(a[0]) == 3):
        if shape is None:
            raise DimensionError("shape is required when building from triples")
        rows, cols, vals = (np.array(t) for t in zip(*a)) if a else ([], [], [])
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= shape[0]
                          or cols.min() < 0 or cols.max() >= shape[1]):
            raise DimensionError("sparse index out of range")
        a = sp.coo_array((np.asarray(vals, dtype=np.float64), (rows, cols)), shape=shape)
    m = sp.csr_array(a, dtype=np.float64)
    m.sum_duplicates()
    m.sort_indices()
    _check_finite(m.data)
    return m


def densify(a):
    return a.toarray() if is_sparse(a) else np.asarray(a, dtype=np.float64)


def sparse_triples(a):
    """Nonzeros of a sparse matrix as a row-major sorted list of ``(i, j, v)``."""
    coo = as_sparse(a).tocoo()
    order = np.lexsort((coo.col, coo.row))
    return [(int(coo.row[k]), int(coo.col[k]), float(coo.data[k])) for k in order]


def _shape_check(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")


def frob_inner(a, b):
    """Trace inner product ``tr(b.T @ a)``."""
    _shape_check(a, b)
    if is_sparse(a) or is_sparse(b):
        if is_sparse(a):
            return float(a.multiply(b).sum())
        return float(b.multiply(a).sum())
    return float(np.vdot(b, a))


def frob_norm(a):
    if is_sparse(a):
        return float(np.linalg.norm(a.data))
    return float(np.linalg.norm(a))


def kron(a, b):
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    if is_sparse(a) or is_sparse(b):
        return sp.csr_array(sp.kron(a, b))
    return np.kron(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64))


def vec(x):
    """Column-stacking vectorisation."""
    return densify(x).reshape(-1, order="F")


def unvec(v, shape):
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    rows, cols = shape
    if v.size != rows * cols:
        raise DimensionError(f"cannot reshape length {v.size} into {shape}")
    return v.reshape((rows, cols), order="F")


class CommutationPerm:
    """Permutation ``P`` with ``vec(X.T) == P @ vec(X)`` for ``X`` of shape (m, n)."""

    def __init__(self, m, n):
        self.m = int(m)
        self.n = int(n)
        # idx[i, j] is the position of X[i, j] inside vec(X)
        idx = np.arange(self.m * self.n).reshape((self.m, self.n), order="F")
        self.perm = idx.T.reshape(-1, order="F")
        self.inverse_perm = np.argsort(self.perm)

    @property
    def size(self):
        return self.m * self.n

    def apply(self, v):
        return np.asarray(v)[self.perm]

    def apply_inverse(self, v):
        return np.asarray(v)[self.inverse_perm]

    def todense(self):
        p = np.zeros((self.size, self.size))
        p[np.arange(self.size), self.perm] = 1.0
        return p

    def __repr__(self):
        return f"CommutationPerm(m={self.m}, n={self.n})"
