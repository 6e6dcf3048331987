"""Brute-force reference solutions used to check the iterative solver.

The linear matrix function is vectorised into an explicit matrix ``M`` with
``vec(f(X)) = M @ vec(X)``, and the norm-constrained least-squares problem is
solved from the SVD of ``M`` with a bisection on the Tikhonov multiplier.
Nothing here shares code with the Krylov path; that independence is the point.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SizeCapError
from .matcore import CommutationPerm, as_dense, kron, unvec, vec

__all__ = [
    "VectorizedProblem",
    "OracleSolution",
    "assemble",
    "oracle_solve",
    "oracle_objective",
    "trs_oracle",
    "DEFAULT_CAP",
]

DEFAULT_CAP = 4096 * 4096


@dataclass
class VectorizedProblem:
    m_mat: np.ndarray
    e_vec: np.ndarray
    delta: float
    domain_shape: tuple


@dataclass
class OracleSolution:
    x: np.ndarray
    lam: float
    x_vec: np.ndarray
    unconstrained_norm: float
    objective: float
    boundary: bool


def assemble(spec, delta=np.inf, cap=DEFAULT_CAP):
    """Vectorise ``spec`` into ``sum kron(B.T, A) + sum kron(D.T, C) @ P``."""
    m, n = spec.domain_shape
    p, q = spec.codomain_shape
    if (m * n) * (p * q) > cap:
        raise SizeCapError(f"dense operator would have {(m * n) * (p * q)} entries (cap {cap})")
    M = np.zeros((p * q, m * n))
    for t in spec.sylvester_terms:
        M += kron(t.b.todense().T, t.a.todense())
    if spec.t_terms:
        perm = CommutationPerm(m, n)
        for t in spec.t_terms:
            # K @ P == K[:, P^{-1}] for the permutation P
            M += kron(t.d.todense().T, t.c.todense())[:, perm.inverse_perm]
    e = vec(spec.rhs) if spec.rhs is not None else np.zeros(p * q)
    return VectorizedProblem(M, e, float(delta), (m, n))


def _x_of_lambda(s, beta, lam):
    return s * beta / (s**2 + lam)


def oracle_solve(vp, rtol=1e-13, max_bisect=500):
    """Minimise ``0.5 ||M x - e||^2`` over ``||x|| <= delta`` via the SVD of ``M``."""
    M, e, delta = vp.m_mat, vp.e_vec, vp.delta
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    beta = U.T @ e
    rank_tol = s.max() * max(M.shape) * np.finfo(float).eps if s.size else 0.0
    keep = s > rank_tol
    s, beta, Vt = s[keep], beta[keep], Vt[keep]
    coef_ls = beta / s
    norm_ls = float(np.linalg.norm(coef_ls))
    if norm_ls <= delta:
        lam = 0.0
        coef = coef_ls
    else:
        lo, hi = 0.0, float(np.linalg.norm(s * beta)) / delta
        for _ in range(max_bisect):
            mid = 0.5 * (lo + hi)
            if np.linalg.norm(_x_of_lambda(s, beta, mid)) > delta:
                lo = mid
            else:
                hi = mid
            if hi - lo <= rtol * hi:
                break
        lam = 0.5 * (lo + hi)
        coef = _x_of_lambda(s, beta, lam)
    x_vec = Vt.T @ coef
    r = M @ x_vec - e
    return OracleSolution(
        x=unvec(x_vec, vp.domain_shape),
        lam=lam,
        x_vec=x_vec,
        unconstrained_norm=norm_ls,
        objective=0.5 * float(r @ r),
        boundary=lam > 0,
    )


def oracle_objective(spec, x):
    """``0.5 ||f(X) - E||_F^2`` evaluated through the assembled matrix."""
    vp = assemble(spec)
    r = vp.m_mat @ vec(as_dense(x)) - vp.e_vec
    return 0.5 * float(r @ r)


def trs_oracle(T, gamma0, delta, rtol=1e-15, max_bisect=400):
    """Tridiagonal (or any symmetric) trust-region subproblem by eigendecomposition.

    Returns ``(h, lam, objective, boundary)``. The multiplier is found by
    bisection on ``||h(lam)|| = delta`` above ``max(0, -lambda_min)``; in the
    hard case the null-space direction is added to reach the boundary.
    """
    T = np.asarray(T, dtype=np.float64)
    k = T.shape[0]
    w, V = np.linalg.eigh(T)
    g = V.T @ (gamma0 * np.eye(k)[0])
    scale = max(np.abs(w).max(), 1.0)

    def h_of(lam):
        return -V @ (g / (w + lam))

    def objective(h):
        return 0.5 * float(h @ T @ h) + gamma0 * float(h[0])

    if w[0] > 1e-14 * scale:
        h = h_of(0.0)
        if np.linalg.norm(h) <= delta:
            return h, 0.0, objective(h), False
    lo = max(0.0, -w[0])
    null = (w + lo) <= 1e-12 * scale
    if np.all(np.abs(g[null]) <= 1e-12 * gamma0):
        coef = np.zeros(k)
        coef[~null] = -g[~null] / (w[~null] + lo)
        nh = np.linalg.norm(coef)
        if nh <= delta:
            coef[np.flatnonzero(null)[0]] = np.sqrt(delta**2 - nh**2)
            h = V @ coef
            return h, lo, objective(h), True
    hi = lo + gamma0 / delta + 1.0
    while np.linalg.norm(h_of(hi)) > delta:
        hi = lo + 2 * (hi - lo)
    a = lo
    for _ in range(max_bisect):
        mid = 0.5 * (a + hi)
        if mid == a or mid == hi:
            break
        if np.linalg.norm(h_of(mid)) > delta:
            a = mid
        else:
            hi = mid
        if hi - a <= rtol * max(hi, 1.0):
            break
    lam = 0.5 * (a + hi)
    coef = -g / (w + lam)
    # the component of the smallest eigenvalue sits next to the pole and is
    # not resolved by lam; fix it from the constraint ||h|| = delta instead
    rest = float(np.linalg.norm(coef[1:]))
    if rest < delta:
        coef[0] = -np.copysign(np.sqrt((delta - rest) * (delta + rest)), g[0])
    h = V @ coef
    return h, lam, objective(h), True
