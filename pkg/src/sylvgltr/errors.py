"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class NonFiniteError(ValueError):
    """A constructor was handed NaN or Inf entries."""


class SizeCapError(ValueError):
    """A dense reference computation would exceed the configured size cap."""


class NotPositiveDefinite(ArithmeticError):
    """Nonpositive pivot met while factoring a shifted tridiagonal matrix."""

    def __init__(self, index, pivot):
        super().__init__(f"nonpositive pivot {pivot!r} at row {index}")
        self.index = index
        self.pivot = pivot


class TrsConvergenceError(ArithmeticError):
    """The secular iteration of the trust-region subproblem did not converge."""

    def __init__(self, message, lam=None, iterations=None):
        super().__init__(message)
        self.lam = lam
        self.iterations = iterations


class SolverError(RuntimeError):
    """Base class for failures of the matrix-equation solver.

    ``outcome`` carries the best iterate and its diagnostics when available.
    """

    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


class IterationLimitError(SolverError):
    pass


class NumericalBreakdownError(SolverError):
    def __init__(self, message, iteration, outcome=None):
        super().__init__(message, outcome)
        self.iteration = iteration


class MetricError(ValueError):
    """A quality metric is undefined for the given data."""


class IllPosedError(ValueError):
    """A fusion problem cannot be assembled (e.g. rank-deficient subspace)."""


class PipelineError(RuntimeError):
    """A fusion pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage} stage failed: {cause}")
        self.stage = stage
        self.cause = cause


class FormatError(ValueError):
    """Malformed input file; carries the path and, when known, the line."""

    def __init__(self, path, message, line=None):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line
