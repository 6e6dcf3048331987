"""Multiband image fusion as a Sylvester equation.

A high-resolution image ``X`` (bands x pixels) is observed twice: through a
spectral response ``L`` that keeps full spatial resolution but few bands,
``Y_M = L X``, and through a blur ``B`` followed by downsampling ``S`` that
keeps every band at low resolution, ``Y_H = X B S``. Writing ``X = H U`` with
``H`` a basis of the leading principal directions of ``Y_H``, the
least-squares fit of both observations gives

    C1 U + U C2 = C3,
    C1 = (H^T H)^{-1} (L H)^T (L H)
    C2 = (B S)(B S)^T
    C3 = (H^T H)^{-1} (H^T Y_H (B S)^T + (L H)^T Y_M)

``C2`` is pixels x pixels and is only ever applied as the chain
``U -> U B -> (U B) S -> ... S^T B^T`` with FFT convolutions.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, IllPosedError, NonFiniteError, PipelineError
from .gltr import solve
from .metrics import quality_report
from .operators import (
    Circulant,
    Dense,
    Downsampler,
    EquationSpec,
    Identity,
    Product,
    SylvesterTerm,
)

__all__ = [
    "ImageStack",
    "DegradationModel",
    "FusionProblem",
    "FusionResult",
    "gaussian_kernel",
    "synthetic_image",
    "default_model",
    "degrade",
    "build_fusion_problem",
    "fuse",
    "fusion_residual",
    "run_pipeline",
]


@dataclass
class ImageStack:
    """Multiband image stored as ``bands x (height*width)``, pixels row-major."""

    data: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DimensionError("image data must be bands x pixels")
        if self.data.shape[1] != self.height * self.width:
            raise DimensionError(
                f"{self.data.shape[1]} pixels do not match {self.height}x{self.width}"
            )
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError("image contains NaN or Inf")

    @property
    def bands(self):
        return self.data.shape[0]

    @property
    def pixels(self):
        return self.data.shape[1]

    def band(self, i):
        return self.data[i].reshape(self.height, self.width)

    def cube(self):
        """``bands x height x width`` view."""
        return self.data.reshape(self.bands, self.height, self.width)

    @classmethod
    def from_cube(cls, cube):
        cube = np.asarray(cube, dtype=np.float64)
        b, h, w = cube.shape
        return cls(cube.reshape(b, h * w), h, w)


@dataclass
class DegradationModel:
    l_spec: np.ndarray
    blur: object  # Circulant or Identity over the pixel grid
    downsample: Downsampler
    height: int
    width: int
    factor: int = 1
    noise_m: float = 0.0
    noise_h: float = 0.0

    def __post_init__(self):
        self.l_spec = np.atleast_2d(np.asarray(self.l_spec, dtype=np.float64))
        p = self.height * self.width
        if self.blur.shape != (p, p) or self.downsample.shape[0] != p:
            raise DimensionError("blur and downsampler must act on the pixel grid")

    @property
    def bs(self):
        """``B S`` as a structured factor."""
        return Product([self.blur, self.downsample])


@dataclass
class FusionProblem:
    c1: np.ndarray
    c2: Product
    c3: np.ndarray
    h_basis: np.ndarray
    height: int
    width: int

    @property
    def r(self):
        return self.c1.shape[0]

    def spec(self):
        """The equation ``C1 U + U C2 = C3`` as an :class:`EquationSpec`."""
        p = self.c2.shape[0]
        return EquationSpec(
            [SylvesterTerm(Dense(self.c1), Identity(p)),
             SylvesterTerm(Identity(self.r), self.c2)],
            [],
            rhs=self.c3,
            name="fusion",
        )


@dataclass
class FusionResult:
    image: ImageStack
    u: np.ndarray
    outcome: object
    residual: float
    problem: FusionProblem = field(repr=False)


def gaussian_kernel(sigma, radius=None):
    """Normalised 2-D Gaussian with odd side ``2*radius + 1``."""
    radius = int(np.ceil(3 * sigma)) if radius is None else int(radius)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (t / sigma) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def synthetic_image(bands=8, height=32, width=32, seed=0, n_regions=4):
    """Seeded smooth multiband scene: low-frequency sinusoids plus flat patches.

    Every pixel spectrum is a positive combination of ``bands`` endmember
    spectra with geometrically decaying weights, so the data has full band
    rank but a dominant low-dimensional subspace, and all bands have
    positive mean.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width] / np.array([height, width])[:, None, None]
    n_end = bands
    abund = []
    for i in range(n_end):
        fy, fx = rng.integers(1, 4, size=2)
        ph = rng.uniform(0, 2 * np.pi, size=2)
        field_ = 1.0 + 0.5 * np.sin(2 * np.pi * fy * yy + ph[0]) * np.cos(2 * np.pi * fx * xx + ph[1])
        abund.append(field_ * 0.6**i)
    abund = np.stack(abund)
    for _ in range(n_regions):
        r0, c0 = rng.integers(0, height // 2), rng.integers(0, width // 2)
        dh, dw = rng.integers(height // 8 + 1, height // 2), rng.integers(width // 8 + 1, width // 2)
        abund[rng.integers(min(n_end, 4)), r0:r0 + dh, c0:c0 + dw] += rng.uniform(0.3, 1.0)
    wl = np.linspace(0, 1, bands)
    centers = rng.uniform(0, 1, n_end)
    spectra = 0.2 + np.exp(-((wl[None, :] - centers[:, None]) ** 2) / 0.08)
    cube = np.einsum("eb,ehw->bhw", spectra, abund)
    return ImageStack.from_cube(cube)


def spectral_response(bands, n_ms, overlap=1.5):
    """Broad, overlapping, row-normalised band-pass responses (``n_ms x bands``)."""
    wl = np.linspace(0, 1, bands)
    centers = (np.arange(n_ms) + 0.5) / n_ms
    width = overlap / n_ms
    l_spec = np.exp(-((wl[None, :] - centers[:, None]) ** 2) / (2 * (width / 2) ** 2))
    return l_spec / l_spec.sum(axis=1, keepdims=True)


def default_model(height, width, bands, n_ms=3, sigma=1.0, factor=2):
    """Gaussian blur, ``factor`` x ``factor`` decimation, ``n_ms`` broad bands."""
    grid = (height, width)
    blur = Circulant.from_kernel(gaussian_kernel(sigma), grid) if sigma > 0 else Identity(height * width)
    down = Downsampler.grid(height, width, factor)
    return DegradationModel(spectral_response(bands, n_ms), blur, down, height, width, factor)


def degrade(x, model, seed=None):
    """Observe ``x`` through the model: ``(Y_M, Y_H)``."""
    if x.height != model.height or x.width != model.width:
        raise DimensionError(
            f"image {x.height}x{x.width} does not match model {model.height}x{model.width}"
        )
    if model.l_spec.shape[1] != x.bands:
        raise DimensionError(
            f"spectral response has {model.l_spec.shape[1]} columns for {x.bands} bands"
        )
    y_m = model.l_spec @ x.data
    y_h = model.bs.rmatmul(x.data)
    if model.noise_m or model.noise_h:
        rng = np.random.default_rng(seed)
        y_m = y_m + np.sqrt(model.noise_m) * rng.standard_normal(y_m.shape)
        y_h = y_h + np.sqrt(model.noise_h) * rng.standard_normal(y_h.shape)
    return y_m, y_h


def build_fusion_problem(y_m, y_h, model, r=None):
    """Assemble ``C1``, structured ``C2`` and ``C3``; ``r`` defaults to ``bands // 2``."""
    y_m = np.asarray(y_m, dtype=np.float64)
    y_h = np.asarray(y_h, dtype=np.float64)
    bands = y_h.shape[0]
    r = max(1, bands // 2) if r is None else int(r)
    if not 1 <= r <= bands:
        raise DimensionError(f"subspace dimension {r} outside [1, {bands}]")
    if y_m.shape != (model.l_spec.shape[0], model.height * model.width):
        raise DimensionError(f"Y_M has shape {y_m.shape}")
    if y_h.shape[1] != model.downsample.shape[1]:
        raise DimensionError(f"Y_H has {y_h.shape[1]} pixels, expected {model.downsample.shape[1]}")
    u_svd, s, _ = np.linalg.svd(y_h, full_matrices=False)
    h = u_svd[:, :r]
    hth = h.T @ h
    if s.size < r or s[r - 1] <= s[0] * bands * np.finfo(float).eps:
        raise IllPosedError(f"low-resolution data has rank below {r}")
    lh = model.l_spec @ h
    bs = model.bs
    c1 = np.linalg.solve(hth, lh.T @ lh)
    c3 = np.linalg.solve(hth, h.T @ bs.rmatmul(y_h, transpose=True) + lh.T @ y_m)
    c2 = Product([model.blur, model.downsample, model.downsample.T, model.blur.T])
    return FusionProblem(c1, c2, c3, h, model.height, model.width)


def fusion_residual(problem, u):
    """``||C1 U + U C2 - C3|| / ||U||``"""
    res = problem.c1 @ u + problem.c2.rmatmul(u) - problem.c3
    return float(np.linalg.norm(res) / np.linalg.norm(u))


def fuse(problem, cfg=None, **overrides):
    """Solve the fusion equation and lift the result back: ``X = H U``."""
    outcome = solve(problem.spec(), cfg=cfg, **overrides)
    u = outcome.x_star
    image = ImageStack(problem.h_basis @ u, problem.height, problem.width)
    return FusionResult(image, u, outcome, fusion_residual(problem, u), problem)


def run_pipeline(x, model, r=None, cfg=None, seed=None):
    """Degrade, build, fuse and score; returns ``(FusionResult, QualityReport)``."""
    stage = "degrade"
    try:
        y_m, y_h = degrade(x, model, seed)
        stage = "build"
        problem = build_fusion_problem(y_m, y_h, model, r)
        stage = "fuse"
        result = fuse(problem, cfg)
        stage = "metrics"
        report = quality_report(x, result.image, d=1.0 / model.factor)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        raise PipelineError(stage, exc) from exc
    return result, report
