"""Tridiagonal trust-region subproblem via the Moré–Sorensen secular iteration.

Solves::

    min  0.5 h^T T h + gamma0 * h[0]    subject to  ||h||_2 <= delta

for a symmetric tridiagonal ``T``. Each secular step factors ``T + lam I``
into a lower bidiagonal Cholesky factor, so the work per step is linear in
the order of ``T``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, eigvalsh_tridiagonal

from .errors import NotPositiveDefinite, TrsConvergenceError

__all__ = [
    "TridiagonalSym",
    "BidiagCholesky",
    "TrsResult",
    "cholesky_bidiag",
    "trs_solve",
    "trs_objective",
]

# relative pivot threshold below which T + lam I is treated as not positive definite
PIVOT_RTOL = 1e-14
# |v_min[0]| below this makes the minimal eigenvector count as orthogonal to e1
HARD_CASE_TOL = 1e-12
# a converged boundary solution further than this from the sphere is finished by a null-vector step
SPHERE_RTOL = 1e-12
# a multiplier this close (relative to ||T||) to -lambda_min is handed to the eigenbasis solve
NEAR_HARD_RTOL = 1e-12


@dataclass(frozen=True)
class TridiagonalSym:
    """Symmetric tridiagonal matrix stored as diagonal and off-diagonal."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=np.float64).reshape(-1)
        e = np.asarray(self.offdiag, dtype=np.float64).reshape(-1)
        if e.size != max(d.size - 1, 0):
            raise ValueError(f"offdiag length {e.size} does not match diag length {d.size}")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def size(self):
        return self.diag.size

    def todense(self):
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, h):
        out = self.diag * h
        out[:-1] += self.offdiag * h[1:]
        out[1:] += self.offdiag * h[:-1]
        return out

    def norm_bound(self):
        """Gershgorin bound on the spectral norm."""
        a = np.abs(self.offdiag)
        r = np.abs(self.diag).copy()
        r[:-1] += a
        r[1:] += a
        return float(r.max()) if r.size else 0.0

    def gershgorin_lower(self):
        a = np.abs(self.offdiag)
        r = np.zeros_like(self.diag)
        r[:-1] += a
        r[1:] += a
        return float((self.diag - r).min())

    def eigvalsh(self):
        return eigvalsh_tridiagonal(self.diag, self.offdiag)


@dataclass(frozen=True)
class BidiagCholesky:
    """Lower bidiagonal ``L`` with ``L L^T = T + lam I``."""

    diag: np.ndarray
    subdiag: np.ndarray

    def todense(self):
        return np.diag(self.diag) + np.diag(self.subdiag, -1)

    def solve_lower(self, b):
        """Solve ``L y = b``."""
        d, s = self.diag, self.subdiag
        y = np.empty_like(b)
        prev = 0.0
        for i in range(d.size):
            prev = (b[i] - (s[i - 1] * prev if i else 0.0)) / d[i]
            y[i] = prev
        return y

    def solve_upper(self, y):
        """Solve ``L^T h = y``."""
        d, s = self.diag, self.subdiag
        h = np.empty_like(y)
        nxt = 0.0
        for i in range(d.size - 1, -1, -1):
            nxt = (y[i] - (s[i] * nxt if i < d.size - 1 else 0.0)) / d[i]
            h[i] = nxt
        return h

    def solve(self, b):
        return self.solve_upper(self.solve_lower(b))


@dataclass
class TrsResult:
    h: np.ndarray
    lam: float
    boundary: bool
    newton_iters: int
    hard_case: bool = False
    lambdas: list = field(default_factory=list)

    @property
    def lambda_(self):
        return self.lam


def cholesky_bidiag(t, lam=0.0, tol=None):
    """Factor ``t + lam I = L L^T``; raise :class:`NotPositiveDefinite` on a bad pivot."""
    if tol is None:
        tol = PIVOT_RTOL * (t.norm_bound() + abs(lam))
    d = t.diag + lam
    e = t.offdiag
    ld = np.empty_like(d)
    ls = np.empty_like(e)
    piv = d[0]
    for i in range(d.size):
        if i:
            ls[i - 1] = e[i - 1] / ld[i - 1]
            piv = d[i] - ls[i - 1] ** 2
        if not piv > tol:
            raise NotPositiveDefinite(i, piv)
        ld[i] = math.sqrt(piv)
    return BidiagCholesky(ld, ls)


def trs_objective(t, gamma0, h):
    return 0.5 * float(h @ t.matvec(h)) + gamma0 * float(h[0])


def _finish(t, gamma0, delta, lam, h, it, lambdas):
    """Boundary result from a converged secular iteration.

    Close to the hard case ``||h(lam)||`` varies faster than ``lam`` can
    resolve, so the iteration may stop with ``||h||`` visibly off ``delta``.
    ``h`` then has a large component along the eigenvector ``z`` of the
    smallest eigenvalue, and the shortest step ``h + tau z`` onto the sphere
    adds only ``tau * (lambda_min + lam)`` to the residual.
    """
    nh = float(np.linalg.norm(h))
    if abs(nh - delta) > SPHERE_RTOL * delta and t.size > 1:
        _, z = eigh_tridiagonal(t.diag, t.offdiag, select="i", select_range=(0, 0))
        z = z[:, 0]
        b = float(h @ z)
        c = (nh - delta) * (nh + delta)
        disc = b * b - c
        if disc >= 0:
            root = math.sqrt(disc)
            # smaller-magnitude root of tau^2 + 2 b tau + c = 0, cancellation-free
            tau = -c / (b + math.copysign(root, b)) if b else root
            h = h + tau * z
            nh = float(np.linalg.norm(h))
    if nh > delta:
        h = h * (delta / nh)
    return TrsResult(h, lam, True, it, lambdas=lambdas)


def _near_hard(t, gamma0, delta, it, lambdas):
    """Boundary solution when the root lies within round-off of ``-lambda_min``.

    No Cholesky factorisation resolves such a multiplier, so solve in the
    eigenbasis: the components away from the pole are exact, the pole
    component is fixed by ``||h|| = delta`` and the offset ``d`` of the
    multiplier above ``-lambda_min`` follows from a short fixed-point
    iteration on ``d = |g_1| / sqrt(delta^2 - rho(d))``.
    """
    w, v = eigh_tridiagonal(t.diag, t.offdiag)
    g = gamma0 * v[0]
    gaps = w[1:] - w[0]
    if gaps.size and gaps[0] <= 0:
        return None
    d = 0.0
    for _ in range(4):
        rest = -g[1:] / (gaps + d)
        rho = float(rest @ rest)
        if rho >= delta * delta:
            return None
        c0 = math.sqrt((delta - math.sqrt(rho)) * (delta + math.sqrt(rho)))
        d = abs(g[0]) / c0
    coef = np.concatenate(([-math.copysign(c0, g[0]) if g[0] else c0], rest))
    h = v @ coef
    return TrsResult(h, float(-w[0] + d), True, it, hard_case=True, lambdas=lambdas)


def _pole_step(h, nh, z, gamma0, delta, lam_min):
    """Root of the secular equation keeping only the pole at ``-lambda_min`` exact.

    ``||h(lam)||^2 = (gamma0 z_1)^2 / (lam + lambda_min)^2 + rho(lam)`` with
    ``rho`` slowly varying; freezing ``rho`` at the current point gives a
    multiplier just below the root when the current one is above it. Used
    where the plain update would leave the bracket, i.e. near the hard case.
    """
    along = float(h @ z)
    rho = max(nh * nh - along * along, 0.0)
    if rho >= delta * delta:
        return -math.inf
    return -lam_min + abs(gamma0 * z[0]) / math.sqrt(delta * delta - rho)


def _safeguard(lo, hi):
    return max(math.sqrt(lo * hi), lo + 1e-3 * (hi - lo)) if hi > lo else hi


def _hard_case(t, gamma0, delta, lo):
    """Return ``(h, is_hard)`` for the regime lam == lo == -lambda_min(T).

    Only entered when ``T + lo I`` is singular; uses a dense tridiagonal
    eigendecomposition, which is cheap at the orders produced by Lanczos.
    """
    w, v = eigh_tridiagonal(t.diag, t.offdiag)
    scale = max(t.norm_bound(), 1.0)
    null = (w + lo) <= 1e-12 * scale
    if np.any(np.abs(v[0, null]) > HARD_CASE_TOL):
        return None, False
    shifted = w[~null] + lo
    coef = -gamma0 * v[0, ~null] / shifted
    h_p = v[:, ~null] @ coef
    nh = float(np.linalg.norm(h_p))
    if nh > delta:
        return None, False
    z = v[:, np.flatnonzero(null)[0]]
    tau = math.sqrt(max(delta**2 - nh**2, 0.0))
    cands = [h_p + tau * z, h_p - tau * z]
    objs = [trs_objective(t, gamma0, c) for c in cands]
    return cands[int(np.argmin(objs))], True


def trs_solve(t, gamma0, delta, eps=1e-14, lambda_warm=None, max_iter=100):
    """Solve the tridiagonal trust-region subproblem.

    Parameters
    ----------
    t : TridiagonalSym
    gamma0 : float
        Magnitude of the linear term; the gradient is ``gamma0 * e_1``.
    delta : float
        Trust radius.
    eps : float
        Stop once the secular update satisfies ``|step| <= eps * max(1, lam)``.
    lambda_warm : float, optional
        Starting multiplier, typically the one from the previous Lanczos step.

    Returns
    -------
    TrsResult
    """
    if not (gamma0 > 0 and delta > 0 and eps > 0):
        raise ValueError("gamma0, delta and eps must be positive")
    k = t.size
    rhs = np.zeros(k)
    rhs[0] = -gamma0

    pd_at_zero = True
    try:
        chol = cholesky_bidiag(t, 0.0)
    except NotPositiveDefinite:
        pd_at_zero = False
    if pd_at_zero:
        h = chol.solve(rhs)
        if np.linalg.norm(h) < delta:
            return TrsResult(h, 0.0, False, 0, lambdas=[0.0])
        lo = 0.0
        lam_min = None
    else:
        lam_min = float(eigvalsh_tridiagonal(t.diag, t.offdiag, select="i", select_range=(0, 0))[0])
        lo = max(0.0, -lam_min)
        h, hard = _hard_case(t, gamma0, delta, lo)
        if hard:
            return TrsResult(h, lo, True, 0, hard_case=True, lambdas=[lo])
    shift = -lam_min if lam_min is not None and lam_min < 0 else 0.0
    lmin_pos = lam_min if lam_min is not None and lam_min > 0 else 0.0
    hi = max(gamma0 / delta + shift - lmin_pos, lo) * (1 + 1e-12) + 1e-300

    if lambda_warm is not None and lo <= lambda_warm < hi:
        lam = float(lambda_warm)
    elif pd_at_zero:
        lam = 0.0
    else:
        lam = _safeguard(lo, hi)

    lambdas = []
    h = None
    z_min = None
    for it in range(1, max_iter + 1):
        lambdas.append(lam)
        try:
            chol = cholesky_bidiag(t, lam)
        except NotPositiveDefinite:
            lo = max(lo, lam)
            lam = _safeguard(lo, hi)
            continue
        h = chol.solve(rhs)
        nh = float(np.linalg.norm(h))
        if nh > delta:
            lo = max(lo, lam)
        else:
            hi = min(hi, lam)
        if nh == delta:
            return _finish(t, gamma0, delta, lam, h, it, lambdas)
        w = chol.solve_lower(h)
        step = ((nh - delta) / delta) * (nh / float(np.linalg.norm(w))) ** 2
        if abs(step) <= eps * max(1.0, lam):
            return _finish(t, gamma0, delta, lam, h, it, lambdas)
        lam_new = lam + step
        if not lo < lam_new < hi and lam_min is not None and lam_min < 0:
            if z_min is None:
                z_min = eigh_tridiagonal(t.diag, t.offdiag, select="i", select_range=(0, 0))[1][:, 0]
            lam_new = _pole_step(h, nh, z_min, gamma0, delta, lam_min)
            if lam_new + lam_min <= NEAR_HARD_RTOL * (t.norm_bound() + abs(lam_min)):
                res = _near_hard(t, gamma0, delta, it, lambdas)
                if res is not None:
                    return res
        if not lo < lam_new < hi:
            lam_new = _safeguard(lo, hi)
        if hi - lo <= eps * max(1.0, hi):
            return _finish(t, gamma0, delta, lam, h, it, lambdas)
        lam = lam_new
    raise TrsConvergenceError(
        f"secular iteration did not converge in {max_iter} steps (lam={lam:.6g}, "
        f"bracket=[{lo:.6g}, {hi:.6g}])",
        lam=lam,
        iterations=max_iter,
    )
