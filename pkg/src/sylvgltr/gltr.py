"""Norm-constrained least squares for linear matrix equations.

Minimises ``0.5 ||f(X) - E||_F^2`` subject to ``||X||_F <= delta`` using only
products with ``f`` and its adjoint. Conjugate gradients on the normal
equations run while the iterates stay inside the ball; once an iterate leaves
it (or CG stalls), the iteration continues as a Lanczos process whose
tridiagonal matrix feeds a Moré–Sorensen subproblem solve at every step.

Two variants are available:

``"simplified41"`` (default)
    The Lanczos quantities of the CG phase are read off the CG scalars,
    ``delta_k = 1/alpha_k + beta_{k-1}/alpha_{k-1}``,
    ``gamma_{k+1} = sqrt(beta_k)/alpha_k`` and
    ``Q_k = (-1)^k R_k / ||R_k||``.
``"basic31"``
    Runs an explicit Lanczos recurrence alongside CG. Twice the operator
    applications; kept as a reference for the identities above.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, IterationLimitError, NumericalBreakdownError, SolverError
from .matcore import as_dense, frob_inner, frob_norm
from .operators import MatrixOperator
from .trs import TridiagonalSym, trs_solve

__all__ = [
    "SolverConfig",
    "SolveOutcome",
    "TraceRecord",
    "CGState",
    "LanczosState",
    "cg_step",
    "lanczos_step",
    "assemble_boundary_solution",
    "solve",
    "kkt_diagnostics",
]

log = logging.getLogger(__name__)

VARIANTS = ("simplified41", "basic31")
INTERIOR, BOUNDARY = "interior", "boundary"
# gamma_{k+1} below this times (|delta_k| + gamma_k) ends the Lanczos recurrence
BREAKDOWN_RTOL = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    """Solver parameters.

    ``eps`` is relative: CG stops once ``||R_k|| < eps * ||f*(E)||`` and the
    Lanczos phase once ``gamma_{k+1} |h_k[-1]| < eps * ||f*(E)||``.
    ``max_iter=None`` means ``4 * m * n``.
    """

    delta: float = 200.0
    eps: float = 1e-14
    max_iter: int | None = None
    variant: str = "simplified41"
    trace: bool = True
    reorthogonalize: bool = False
    retain_basis: bool = True
    keep_history: bool = False

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.reorthogonalize and not self.retain_basis:
            raise ValueError("reorthogonalization needs the retained basis")


@dataclass(frozen=True)
class TraceRecord:
    k: int
    branch: str
    norm_R: float
    norm_X: float
    delta_k: float
    gamma_k: float

    FIELDS = ("k", "branch", "norm_R", "norm_X", "delta_k", "gamma_k")


@dataclass
class SolveOutcome:
    x_star: np.ndarray
    branch: str
    iterations: int
    lambda_star: float
    residual: float
    kkt_residual: float
    comp_slack: float
    delta: float
    gamma0: float
    objective: float
    converged: bool = True
    trace: list = field(default_factory=list)
    tridiag: TridiagonalSym | None = None
    h: np.ndarray | None = None
    trs_iterations: list = field(default_factory=list)
    history: dict | None = None

    @property
    def norm_x(self):
        return frob_norm(self.x_star)

    def summary(self):
        """Scalar fields as a JSON-friendly dict."""
        return {
            "branch": self.branch,
            "iterations": self.iterations,
            "lambda_star": self.lambda_star,
            "residual": self.residual,
            "kkt_residual": self.kkt_residual,
            "comp_slack": self.comp_slack,
            "delta": self.delta,
            "gamma0": self.gamma0,
            "objective": self.objective,
            "norm_x": self.norm_x,
            "converged": self.converged,
        }


# Recurrences =================================================================
@dataclass
class CGState:
    """CG on the normal equations ``f*(f(X)) = f*(E)``."""

    k: int
    x: np.ndarray
    r: np.ndarray
    p: np.ndarray
    r_norm2: float
    alpha: float | None = None  # scalars of the step that produced this state
    beta: float | None = None
    fp: np.ndarray | None = None
    x_norm: float = 0.0


def _orthogonalize(t, basis):
    for _ in range(2):
        for b in basis:
            t -= frob_inner(t, b) * b
    return t


def cg_step(op, state, fp_tol=0.0, basis=None):
    """Advance CG by one step; return None when ``||f(P_k)|| <= fp_tol``.

    With ``basis`` (orthonormal matrices spanning the previous residuals)
    the new residual is re-orthogonalised against it, which restores the
    finite termination and norm growth of exact arithmetic.
    """
    fp = op.apply(state.p)
    fp_norm2 = frob_inner(fp, fp)
    if not math.sqrt(fp_norm2) > fp_tol:
        return None
    alpha = state.r_norm2 / fp_norm2
    x = state.x + alpha * state.p
    r = state.r + alpha * op.apply_adjoint(fp)
    if basis:
        r = _orthogonalize(r, basis)
    r_norm2 = frob_inner(r, r)
    beta = r_norm2 / state.r_norm2
    p = -r + beta * state.p
    return CGState(state.k + 1, x, r, p, r_norm2, alpha, beta, fp, frob_norm(x))


@dataclass
class LanczosState:
    """Lanczos recurrence on ``f* o f``.

    ``q_curr`` is ``Q_k`` (unit norm) and ``gamma`` the ``gamma_k`` that
    normalised it. ``diag`` collects ``delta_0..delta_{k-1}`` and ``offdiag``
    ``gamma_1..gamma_k``.
    """

    k: int
    q_prev: np.ndarray | None
    q_curr: np.ndarray | None
    gamma: float
    diag: list = field(default_factory=list)
    offdiag: list = field(default_factory=list)
    basis: list | None = field(default_factory=list)
    terminated: bool = False
    t_next: np.ndarray | None = None

    def tridiag(self, k=None):
        """``T_k`` (default: through the last appended diagonal entry)."""
        k = len(self.diag) - 1 if k is None else k
        return TridiagonalSym(np.array(self.diag[: k + 1]), np.array(self.offdiag[:k]))


def _breakdown(gamma_next, delta_k, gamma_k):
    return gamma_next <= BREAKDOWN_RTOL * (abs(delta_k) + abs(gamma_k))


def lanczos_step(op, state, reorthogonalize=False, gamma_tol=None):
    """One Lanczos advance: append ``delta_k`` and ``gamma_{k+1}``, move to ``Q_{k+1}``.

    ``terminated`` is set when ``gamma_{k+1}`` is negligible (below
    ``gamma_tol`` if given): the Krylov space is exhausted and no further
    vector exists.
    """
    if state.terminated:
        raise SolverError("Lanczos recurrence already terminated")
    q = state.q_curr
    fq = op.apply(q)
    delta = frob_inner(fq, fq)
    t = op.apply_adjoint(fq) - delta * q
    if state.q_prev is not None:
        t -= state.gamma * state.q_prev
    if reorthogonalize and state.basis is not None:
        t = _orthogonalize(t, state.basis + [q])
    gamma_next = frob_norm(t)
    if state.basis is not None:
        state.basis.append(q)
    state.diag.append(delta)
    state.offdiag.append(gamma_next)
    state.t_next = t
    gamma_k = state.gamma if state.k else 0.0
    state.k += 1
    state.q_prev = q
    state.gamma = gamma_next
    small = gamma_next <= gamma_tol if gamma_tol is not None else _breakdown(
        gamma_next, delta, gamma_k)
    if small:
        state.terminated = True
        state.q_curr = None
    else:
        state.q_curr = t / gamma_next
    return state


def assemble_boundary_solution(basis, h):
    """``sum_i h[i] * Q_i``"""
    h = np.asarray(h, dtype=np.float64).reshape(-1)
    if len(basis) != h.size:
        raise DimensionError(f"{len(basis)} basis matrices but {h.size} coefficients")
    out = np.zeros_like(basis[0])
    for coef, q in zip(h, basis):
        out += coef * q
    return out


def _regenerate(op, r0, gamma0, h, gamma_tol):
    """Second pass: rebuild the Lanczos vectors and accumulate ``sum h_i Q_i``."""
    st = LanczosState(0, None, r0 / gamma0, gamma0, basis=None)
    x = np.zeros_like(r0)
    for coef in h:
        x += coef * st.q_curr
        if st.k < h.size - 1:
            lanczos_step(op, st, gamma_tol=gamma_tol)
    return x


def kkt_diagnostics(op, e, x, lam, delta):
    """Residual, KKT stationarity and complementary slackness at ``x``."""
    fx = op.apply(x)
    res = fx - e
    stat = op.apply_adjoint(res) + lam * x
    return {
        "residual": frob_norm(res),
        "kkt_residual": frob_norm(stat),
        "comp_slack": lam * (frob_norm(x) - delta),
        "objective": 0.5 * frob_inner(res, res),
    }


# Driver ======================================================================
class _Run:
    """Mutable per-solve bookkeeping."""

    def __init__(self, op, e, cfg):
        self.op = op
        self.e = e
        self.cfg = cfg
        m, n = op.domain_shape
        self.max_iter = cfg.max_iter or 4 * m * n
        self.trace = []
        self.history = None
        if cfg.keep_history:
            self.history = {k: [] for k in (
                "X", "R", "P", "fP", "alpha", "beta", "Q", "delta_cg", "gamma_cg",
                "delta_lanczos", "gamma_lanczos", "h", "lam",
            )}

    def record(self, k, branch, norm_r, norm_x, delta_k, gamma_k):
        if not (math.isfinite(norm_r) and math.isfinite(norm_x)):
            raise NumericalBreakdownError(f"non-finite value at iteration {k}", k)
        if self.cfg.trace:
            self.trace.append(TraceRecord(k, branch, norm_r, norm_x, delta_k, gamma_k))

    def keep(self, **items):
        if self.history is not None:
            for key, val in items.items():
                self.history[key].append(np.array(val) if isinstance(val, np.ndarray) else val)


def _outcome(run, x, branch, iterations, lam, gamma0, tridiag=None, h=None,
             trs_iters=(), converged=True, basis=None):
    diag = kkt_diagnostics(run.op, run.e, x, lam, run.cfg.delta)
    if run.history is not None and basis is not None:
        run.history["basis"] = [np.array(q) for q in basis]
    return SolveOutcome(
        x_star=x,
        branch=branch,
        iterations=iterations,
        lambda_star=lam,
        residual=diag["residual"],
        kkt_residual=diag["kkt_residual"],
        comp_slack=diag["comp_slack"],
        delta=run.cfg.delta,
        gamma0=gamma0,
        objective=diag["objective"],
        converged=converged,
        trace=run.trace,
        tridiag=tridiag,
        h=h,
        trs_iterations=list(trs_iters),
        history=run.history,
    )


def solve(op, e=None, cfg=None, **overrides):
    """Solve ``min 0.5 ||f(X) - E||^2`` s.t. ``||X|| <= delta``.

    Parameters
    ----------
    op : MatrixOperator
        The linear matrix function; an :class:`~sylvgltr.operators.EquationSpec`
        supplies its own right-hand side.
    e : array_like, optional
        Right-hand side ``E``; defaults to ``op.rhs``.
    cfg : SolverConfig, optional
    **overrides
        Individual :class:`SolverConfig` fields, e.g. ``delta=10.0``.

    Returns
    -------
    SolveOutcome

    Raises
    ------
    IterationLimitError
        ``max_iter`` reached first; ``err.outcome`` holds the best iterate.
    NumericalBreakdownError
        A NaN or Inf appeared in the recurrences.
    """
    if not isinstance(op, MatrixOperator):
        raise TypeError("op must be a MatrixOperator (e.g. an EquationSpec)")
    cfg = replace(cfg or SolverConfig(), **overrides)
    if e is None:
        e = getattr(op, "rhs", None)
        if e is None:
            raise ValueError("no right-hand side given")
    e = as_dense(e)
    if e.shape != tuple(op.codomain_shape):
        raise DimensionError(f"E has shape {e.shape}, expected {tuple(op.codomain_shape)}")

    run = _Run(op, e, cfg)
    fstar_e = op.apply_adjoint(e)
    gamma0 = frob_norm(fstar_e)
    if gamma0 == 0.0 or gamma0 <= cfg.eps * frob_norm(e):
        return _outcome(run, np.zeros(op.domain_shape), INTERIOR, 0, 0.0, gamma0)

    tol = cfg.eps * gamma0
    basic = cfg.variant == "basic31"
    r0 = -fstar_e
    cg = CGState(0, np.zeros(op.domain_shape), r0, fstar_e.copy(), gamma0**2)
    lz = LanczosState(0, None, r0 / gamma0, gamma0,
                      basis=[] if cfg.retain_basis else None)
    alpha_prev = beta_prev = None

    # interior branch ---------------------------------------------------------
    while True:
        k = cg.k
        if k >= run.max_iter:
            out = _outcome(run, cg.x, INTERIOR, k, 0.0, gamma0, converged=False)
            raise IterationLimitError(f"no convergence in {run.max_iter} iterations", out)
        if basic and not lz.terminated:
            lanczos_step(run.op, lz, cfg.reorthogonalize)
            run.keep(delta_lanczos=lz.diag[-1], gamma_lanczos=lz.offdiag[-1])
        run.keep(X=cg.x, R=cg.r, P=cg.p)
        sign = -1.0 if k % 2 else 1.0
        q_cg = sign * cg.r / math.sqrt(cg.r_norm2)
        ortho = None
        if cfg.reorthogonalize:
            ortho = lz.basis if basic else lz.basis + [q_cg]
        nxt = cg_step(op, cg, fp_tol=tol, basis=ortho)
        if nxt is None:
            log.debug("f(P_%d) vanished; switching to the Lanczos branch", k)
            break
        if not (math.isfinite(nxt.r_norm2) and math.isfinite(nxt.beta) and 0 < nxt.alpha < math.inf):
            raise NumericalBreakdownError(f"non-finite CG scalars at iteration {k}", k)
        run.keep(fP=nxt.fp, alpha=nxt.alpha, beta=nxt.beta)
        delta_k = 1.0 / nxt.alpha + (beta_prev / alpha_prev if k else 0.0)
        gamma_k1 = math.sqrt(nxt.beta) / nxt.alpha
        run.keep(Q=q_cg, delta_cg=delta_k, gamma_cg=gamma_k1)
        if not basic:
            if lz.basis is not None:
                lz.basis.append(q_cg)
            lz.diag.append(delta_k)
            lz.offdiag.append(gamma_k1)
            lz.terminated = _breakdown(gamma_k1, delta_k, lz.gamma if k else 0.0)
            lz.q_prev = q_cg
            lz.gamma = gamma_k1
            lz.k += 1
        norm_r = math.sqrt(nxt.r_norm2)
        run.record(k, INTERIOR, norm_r, nxt.x_norm, lz.diag[-1], lz.offdiag[-1])
        alpha_prev, beta_prev = nxt.alpha, nxt.beta
        if nxt.x_norm <= cfg.delta:
            if norm_r < tol:
                run.keep(X=nxt.x, R=nxt.r)
                return _outcome(run, nxt.x, INTERIOR, k + 1, 0.0, gamma0,
                                tridiag=lz.tridiag(), basis=lz.basis)
            cg = nxt
            continue
        # left the ball: keep the new residual for the first Lanczos vector
        cg = CGState(nxt.k, cg.x, nxt.r, nxt.p, nxt.r_norm2)
        break

    # boundary branch ---------------------------------------------------------
    if not basic and not lz.terminated:
        sign = -1.0 if lz.k % 2 else 1.0
        lz.q_curr = sign * cg.r / math.sqrt(cg.r_norm2)
    lam_prev, prev_on_boundary = None, False
    trs_iters = []
    while True:
        if not lz.terminated:
            if lz.k >= run.max_iter:
                break
            lanczos_step(op, lz, cfg.reorthogonalize)
            run.keep(delta_lanczos=lz.diag[-1], gamma_lanczos=lz.offdiag[-1])
        j = lz.k - 1
        if not (math.isfinite(lz.diag[-1]) and math.isfinite(lz.offdiag[-1])):
            raise NumericalBreakdownError(f"non-finite Lanczos coefficients at iteration {j}", j)
        tk = lz.tridiag()
        res = trs_solve(tk, gamma0, cfg.delta, cfg.eps,
                        lambda_warm=lam_prev if prev_on_boundary else None)
        trs_iters.append(res.newton_iters)
        lam_prev, prev_on_boundary = res.lam, bool(np.linalg.norm(res.h) >= cfg.delta * (1 - 1e-12))
        gamma_next = lz.offdiag[-1]
        crit = gamma_next * abs(res.h[-1])
        run.keep(h=res.h, lam=res.lam)
        run.record(j, BOUNDARY, crit, float(np.linalg.norm(res.h)), lz.diag[-1], gamma_next)
        if crit < tol or lz.terminated:
            if lz.basis is not None:
                x = assemble_boundary_solution(lz.basis, res.h)
            else:
                x = _regenerate(op, r0, gamma0, res.h, 0.0)
            branch = BOUNDARY if res.boundary else INTERIOR
            return _outcome(run, x, branch, j + 1, res.lam, gamma0, tridiag=tk,
                            h=res.h, trs_iters=trs_iters, basis=lz.basis)

    tk = lz.tridiag()
    res = trs_solve(tk, gamma0, cfg.delta, cfg.eps, lambda_warm=lam_prev)
    if lz.basis is not None:
        x = assemble_boundary_solution(lz.basis, res.h)
    else:
        x = _regenerate(op, r0, gamma0, res.h, 0.0)
    out = _outcome(run, x, BOUNDARY, run.max_iter, res.lam, gamma0, tridiag=tk,
                   h=res.h, trs_iters=trs_iters, converged=False)
    raise IterationLimitError(f"no convergence in {run.max_iter} iterations", out)
