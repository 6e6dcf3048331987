"""Recurrence invariants checked on a solve run with ``keep_history``."""

import itertools

import numpy as np

from sylvgltr.matcore import frob_inner, frob_norm
from sylvgltr.operators import make_family


def well_conditioned_problem(seed, n=6, scale=0.03):
    """``A X B + C X D = E`` close to the identity map."""
    rng = np.random.default_rng([seed, 6])
    eye = np.eye(n)
    mats = {"A": eye + scale * rng.standard_normal((n, n)),
            "B": eye + scale * rng.standard_normal((n, n)),
            "C": scale * rng.standard_normal((n, n)),
            "D": scale * rng.standard_normal((n, n))}
    return make_family("gen_sylvester", mats, rng.standard_normal((n, n)))


def _max_offdiag(mats):
    worst = 0.0
    for (i, a), (j, b) in itertools.combinations(enumerate(mats), 2):
        worst = max(worst, abs(frob_inner(a, b)) / (frob_norm(a) * frob_norm(b)))
    return worst


def invariant_errors(spec, out):
    """Worst violation of each recurrence identity, as a dict of floats."""
    h = out.history
    e = spec.rhs
    fstar_e = spec.apply_adjoint(e)
    errs = {}
    rs = [r for r in h["R"] if frob_norm(r) > 0]
    errs["residual_orthogonality"] = _max_offdiag(rs)
    errs["fp_conjugacy"] = _max_offdiag(h["fP"])
    ps, worst = h["P"], 0.0
    for i, j in itertools.combinations(range(min(len(ps), len(h["R"]))), 2):
        num = abs(frob_inner(ps[i], h["R"][j]))
        worst = max(worst, num / (frob_norm(ps[i]) * frob_norm(h["R"][j])))
    errs["p_r_orthogonality"] = worst

    basis = h.get("basis") or []
    gram = np.array([[frob_inner(a, b) for b in basis] for a in basis])
    errs["q_orthonormality"] = float(np.max(np.abs(gram - np.eye(len(basis))))) if basis else 0.0

    drift = 0.0
    for k in range(0, len(h["X"]), 5):
        direct = spec.apply_adjoint(spec.apply(h["X"][k])) - fstar_e
        drift = max(drift, frob_norm(direct - h["R"][k]) / frob_norm(fstar_e))
    errs["residual_drift"] = drift

    rel = 0.0
    for dc, dl in zip(h["delta_cg"], h["delta_lanczos"]):
        rel = max(rel, abs(dc - dl) / abs(dl))
    scale = max(h["delta_lanczos"]) if h["delta_lanczos"] else 1.0
    for gc, gl in zip(h["gamma_cg"], h["gamma_lanczos"]):
        rel = max(rel, abs(gc - gl) / scale)
    for qc, ql in zip(h["Q"], basis):
        rel = max(rel, frob_norm(qc - ql))
    errs["cg_lanczos_identity"] = rel

    errs["objective_identity"] = 0.0
    if out.h is not None:
        fx = spec.apply(out.x_star)
        lhs = 0.5 * frob_inner(fx, fx) - frob_inner(fx, e)
        t = out.tridiag
        rhs = 0.5 * out.h @ t.matvec(out.h) + out.gamma0 * out.h[0]
        errs["objective_identity"] = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    return errs


INVARIANT_TOLS = {
    "residual_orthogonality": 1e-8,
    "fp_conjugacy": 1e-8,
    "p_r_orthogonality": 1e-8,
    "q_orthonormality": 1e-8,
    "residual_drift": 1e-8,
    "cg_lanczos_identity": 1e-10,
    "objective_identity": 1e-8,
}
