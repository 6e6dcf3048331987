"""
The tridiagonal trust-region subproblem
=======================================

``min 0.5 h^T T h + gamma0 h_1`` over ``||h|| <= delta`` for symmetric
tridiagonal ``T``. The secular iteration is compared with an eigenvalue
reference, including a hard case where the eigenvector of the smallest
eigenvalue is orthogonal to ``e_1``.
"""

import numpy as np

from sylvgltr.oracle import trs_oracle
from sylvgltr.trs import TridiagonalSym, trs_objective, trs_solve

rng = np.random.default_rng(0)
t = TridiagonalSym(rng.standard_normal(8), rng.standard_normal(7))
print("eigenvalues of T:", np.round(t.eigvalsh(), 3))

for delta in (0.1, 1.0, 10.0):
    res = trs_solve(t, 1.0, delta)
    _, lam, obj, _ = trs_oracle(t.todense(), 1.0, delta)
    print(f"delta={delta:5.1f} lambda={res.lam:.10f} (reference {lam:.10f}) "
          f"objective gap {abs(trs_objective(t, 1.0, res.h) - obj):.1e} iters={res.newton_iters}")

###############################################################################
# Hard case: T decouples after the first entry and the negative eigenvalue
# lives in the decoupled block.

hard = TridiagonalSym([1.0, -2.0], [0.0])
res = trs_solve(hard, 1.0, 3.0)
print(f"\nhard case: lambda={res.lam}, h={res.h}, ||h||={np.linalg.norm(res.h):.12f}")
