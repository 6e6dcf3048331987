"""
Boundary and interior solutions
===============================

A singular Sylvester equation ``A X + X B = E`` with ``B = -Q A Q^T`` has no
exact solution for a generic ``E``. Sweeping the radius across the norm of
the least-squares minimiser shows the solver switching once from the
boundary of the ball to its interior. The sweep is written to CSV for
plotting elsewhere.
"""

import csv

import numpy as np

import sylvgltr as sg
from sylvgltr.experiments import inconsistent_sylvester

spec = inconsistent_sylvester(seed=0, size=12)
ref = sg.oracle_solve(sg.assemble(spec))
print(f"least-squares minimiser norm {ref.unconstrained_norm:.4f}")

rows = []
for mult in np.linspace(0.1, 2.0, 20):
    out = sg.solve(spec, delta=mult * ref.unconstrained_norm)
    rows.append((mult, out.branch, out.iterations, out.norm_x, out.residual, out.lambda_star))
    print(f"{mult:5.2f} {out.branch:>9} iters={out.iterations:4d} lambda={out.lambda_star:.3e}")

with open("boundary_sweep.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(("multiple", "branch", "iterations", "norm_x", "residual", "lambda"))
    w.writerows(rows)
