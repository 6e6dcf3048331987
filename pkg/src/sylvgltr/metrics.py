"""Quality scores for a multiband image estimate against a reference.

Images are ``bands x pixels`` matrices (one row per band, pixels row-major
within each band) or :class:`~sylvgltr.fusion.ImageStack` objects.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, MetricError

__all__ = ["psnr", "sam", "ergas", "q_index", "QualityReport", "quality_report"]


def _pair(reference, estimate):
    ref = np.asarray(getattr(reference, "data", reference), dtype=np.float64)
    est = np.asarray(getattr(estimate, "data", estimate), dtype=np.float64)
    if ref.shape != est.shape:
        raise DimensionError(f"reference {ref.shape} and estimate {est.shape} differ")
    if ref.ndim != 2:
        raise DimensionError("images must be bands x pixels")
    return ref, est


def psnr(reference, estimate):
    """Per-band peak SNR in dB; ``inf`` where a band is reproduced exactly.

    ``10 log10(max(x_i)^2 / (||x_i - xhat_i||^2 / P))``
    """
    ref, est = _pair(reference, estimate)
    mse = np.sum((ref - est) ** 2, axis=1) / ref.shape[1]
    peak = ref.max(axis=1) ** 2
    out = np.full(ref.shape[0], np.inf)
    nz = mse > 0
    with np.errstate(divide="ignore"):
        out[nz] = 10.0 * np.log10(peak[nz] / mse[nz])
    return out


def sam(reference, estimate, return_skipped=False):
    """Mean spectral angle over pixels, in radians.

    Pixels where either spectrum is the zero vector have no angle; they are
    left out of the mean and counted in the second return value when
    ``return_skipped`` is set. Multiply by ``180/pi`` for degrees.
    """
    ref, est = _pair(reference, estimate)
    nr = np.linalg.norm(ref, axis=0)
    ne = np.linalg.norm(est, axis=0)
    ok = (nr > 0) & (ne > 0)
    skipped = int(ok.size - ok.sum())
    if not ok.any():
        raise MetricError("every pixel spectrum is zero; spectral angle undefined")
    # half-angle form: accurate near 0 and pi, unlike arccos of the cosine
    u = ref[:, ok] / nr[ok]
    v = est[:, ok] / ne[ok]
    angle = float(np.mean(2.0 * np.arctan2(np.linalg.norm(u - v, axis=0),
                                           np.linalg.norm(u + v, axis=0))))
    return (angle, skipped) if return_skipped else angle


def ergas(reference, estimate, d=1.0):
    """Relative dimensionless global error.

    ``100 d sqrt(mean_i ||x_i - xhat_i||^2 / mean(x_i)^2)`` with the band
    error taken as the plain squared norm over all pixels. ``d`` is the
    resolution ratio between the two sensors.
    """
    ref, est = _pair(reference, estimate)
    means = ref.mean(axis=1)
    if np.any(means == 0):
        bad = np.flatnonzero(means == 0).tolist()
        raise MetricError(f"zero-mean reference band(s) {bad}; ERGAS undefined")
    err = np.sum((ref - est) ** 2, axis=1)
    return float(100.0 * d * math.sqrt(np.mean(err / means**2)))


def _uiqi(x, y):
    """Universal image quality index of matching windows (last two axes)."""
    mx = x.mean(axis=(-2, -1))
    my = y.mean(axis=(-2, -1))
    dx = x - mx[..., None, None]
    dy = y - my[..., None, None]
    vx = (dx**2).mean(axis=(-2, -1))
    vy = (dy**2).mean(axis=(-2, -1))
    cxy = (dx * dy).mean(axis=(-2, -1))
    num = 4.0 * cxy * mx * my
    den_v = vx + vy
    den_m = mx**2 + my**2
    den = den_v * den_m
    q = np.empty_like(mx)
    full = den > 0
    q[full] = num[full] / den[full]
    # flat windows: only the luminance term survives
    flat = (den_v == 0) & (den_m > 0)
    q[flat] = 2.0 * mx[flat] * my[flat] / den_m[flat]
    # zero-mean windows: only the structure term survives
    dark = (den_m == 0) & (den_v > 0)
    q[dark] = 2.0 * cxy[dark] / den_v[dark]
    q[(den_v == 0) & (den_m == 0)] = 1.0
    return q


def q_index(reference, estimate, height, width, window=8, stride=4):
    """Band-averaged quality index over sliding ``window x window`` blocks.

    ``Q = 4 s_xy xbar ybar / ((s_x^2 + s_y^2)(xbar^2 + ybar^2))`` per window,
    averaged over windows and then bands. Windows larger than the image are
    clipped to the image.
    """
    ref, est = _pair(reference, estimate)
    if height * width != ref.shape[1]:
        raise DimensionError(f"{height}x{width} does not match {ref.shape[1]} pixels")
    wh, ww = min(window, height), min(window, width)
    r = ref.reshape(-1, height, width)
    e = est.reshape(-1, height, width)
    rw = sliding_window_view(r, (wh, ww), axis=(1, 2))[:, ::stride, ::stride]
    ew = sliding_window_view(e, (wh, ww), axis=(1, 2))[:, ::stride, ::stride]
    return float(_uiqi(rw, ew).mean())


@dataclass
class QualityReport:
    psnr_per_band: np.ndarray
    sam: float
    sam_skipped: int
    ergas: float
    q_index: float

    def to_dict(self):
        return {
            "psnr_per_band": [None if not np.isfinite(v) else float(v) for v in self.psnr_per_band],
            "psnr_mean": float(np.mean(self.psnr_per_band)) if np.all(np.isfinite(self.psnr_per_band)) else None,
            "sam": self.sam,
            "sam_skipped": self.sam_skipped,
            "ergas": self.ergas,
            "q_index": self.q_index,
        }


def quality_report(reference, estimate, height=None, width=None, d=1.0, window=8, stride=4):
    """All four scores at once; ``height``/``width`` default to the stack's own."""
    height = height if height is not None else getattr(reference, "height", None)
    width = width if width is not None else getattr(reference, "width", None)
    if height is None or width is None:
        raise DimensionError("image height and width are required for the Q index")
    angle, skipped = sam(reference, estimate, return_skipped=True)
    return QualityReport(
        psnr_per_band=psnr(reference, estimate),
        sam=angle,
        sam_skipped=skipped,
        ergas=ergas(reference, estimate, d),
        q_index=q_index(reference, estimate, height, width, window, stride),
    )
