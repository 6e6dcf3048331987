"""Norm-constrained least-squares solutions of linear matrix equations.

Solves ``min ||f(X) - E||`` subject to ``||X|| <= delta`` for
``f(X) = sum_k A_k X B_k + sum_j C_j X^T D_j`` without forming Kronecker
products, using conjugate gradients inside the ball and a Lanczos
trust-region iteration on its boundary.
"""

from .errors import (
    DimensionError,
    FormatError,
    IllPosedError,
    IterationLimitError,
    MetricError,
    NonFiniteError,
    NotPositiveDefinite,
    NumericalBreakdownError,
    PipelineError,
    SizeCapError,
    SolverError,
    TrsConvergenceError,
)
from .fusion import (
    DegradationModel,
    ImageStack,
    build_fusion_problem,
    default_model,
    degrade,
    fuse,
    run_pipeline,
    synthetic_image,
)
from .gltr import SolveOutcome, SolverConfig, TraceRecord, kkt_diagnostics, solve
from .metrics import ergas, psnr, q_index, quality_report, sam
from .operators import (
    FAMILIES,
    Circulant,
    Dense,
    Diagonal,
    Downsampler,
    EquationSpec,
    Identity,
    Product,
    Sparse,
    SylvesterTerm,
    TTerm,
    apply_f,
    apply_fstar,
    make_family,
)
from .oracle import assemble, oracle_solve, trs_oracle
from .trs import TridiagonalSym, trs_solve

__version__ = "0.1.0"
