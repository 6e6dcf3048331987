"""File formats: CSV and Matrix Market matrices, JSON equation manifests,
solver traces, and raw image stacks with PNG previews."""

import csv
import json
import math
from pathlib import Path

import numpy as np
import scipy.io

from .errors import FormatError
from .matcore import as_sparse, is_sparse
from .operators import make_family

__all__ = [
    "read_csv",
    "write_csv",
    "read_mtx",
    "write_mtx",
    "read_matrix",
    "write_matrix",
    "load_manifest",
    "write_manifest",
    "write_trace_csv",
    "read_trace_csv",
    "write_stack",
    "read_stack",
    "export_png",
]


# Matrices ====================================================================
def read_csv(path):
    """Dense matrix from a comma-separated file, one row per line."""
    path = Path(path)
    if not path.exists():
        raise FormatError(path, "no such file")
    rows = []
    with path.open(newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                row = [float(c) for c in rec]
            except ValueError as exc:
                raise FormatError(path, f"not a number ({exc})", lineno) from None
            if not all(math.isfinite(v) for v in row):
                raise FormatError(path, "non-finite entry", lineno)
            if rows and len(row) != len(rows[0]):
                raise FormatError(path, f"expected {len(rows[0])} columns, got {len(row)}", lineno)
            rows.append(row)
    if not rows:
        raise FormatError(path, "empty matrix")
    return np.array(rows, dtype=np.float64)


def write_csv(path, a):
    """Write with ``%.17g`` so every double round-trips exactly."""
    a = np.atleast_2d(np.asarray(a.toarray() if is_sparse(a) else a, dtype=np.float64))
    np.savetxt(path, a, fmt="%.17g", delimiter=",")


def read_mtx(path):
    path = Path(path)
    if not path.exists():
        raise FormatError(path, "no such file")
    try:
        m = scipy.io.mmread(str(path))
    except (ValueError, IndexError, OSError) as exc:
        raise FormatError(path, f"bad Matrix Market data ({exc})") from None
    if is_sparse(m):
        return as_sparse(m)
    return np.asarray(m, dtype=np.float64)


def write_mtx(path, a):
    """Coordinate format for sparse input, array format for dense."""
    scipy.io.mmwrite(str(path), as_sparse(a) if is_sparse(a) else np.asarray(a), precision=17)


def read_matrix(path):
    """Dispatch on the extension: ``.mtx`` is Matrix Market, anything else CSV."""
    return read_mtx(path) if Path(path).suffix.lower() == ".mtx" else read_csv(path)


def write_matrix(path, a):
    if Path(path).suffix.lower() == ".mtx":
        write_mtx(path, a)
    else:
        write_csv(path, a)


# Manifests ===================================================================
def load_manifest(path):
    """Read a JSON manifest and build its equation.

    ``{"family": "gen_sylvester", "matrices": {"A": "a.csv", ...},
    "rhs": "e.csv"}``; paths are relative to the manifest. Any other keys
    (``delta``, ``eps``, ``seed``, ...) are returned untouched.
    Returns ``(spec, manifest_dict)``.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(path, "no such file")
    try:
        man = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(path, f"invalid JSON: {exc.msg}", exc.lineno) from None
    for key in ("family", "matrices"):
        if key not in man:
            raise FormatError(path, f"missing key {key!r}")
    base = path.parent
    mats = {}
    for name, rel in man["matrices"].items():
        mats[name] = read_matrix(base / rel)
    rhs = read_matrix(base / man["rhs"]) if man.get("rhs") else None
    if rhs is not None and is_sparse(rhs):
        rhs = rhs.toarray()
    try:
        spec = make_family(man["family"], mats, rhs)
    except ValueError as exc:
        raise FormatError(path, str(exc)) from None
    return spec, man


def write_manifest(path, family, matrices, rhs=None, ext=".csv", **extra):
    """Write each matrix next to the manifest and a JSON file naming them."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    files = {}
    for name, a in matrices.items():
        fname = f"{stem}_{name}{'.mtx' if is_sparse(a) else ext}"
        write_matrix(path.parent / fname, a)
        files[name] = fname
    man = {"family": family, "matrices": files}
    if rhs is not None:
        fname = f"{stem}_E{ext}"
        write_matrix(path.parent / fname, rhs)
        man["rhs"] = fname
    man.update(extra)
    path.write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    return man


# Traces ======================================================================
TRACE_FIELDS = ("k", "branch", "norm_R", "norm_X", "delta_k", "gamma_k")


def write_trace_csv(path, trace, runs=None):
    """Write ``trace`` records; with ``runs`` (a list of ``(label, trace)``)
    every row is prefixed by its run label."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        groups = [(None, trace)] if runs is None else runs
        w.writerow((("run",) if runs is not None else ()) + TRACE_FIELDS)
        for label, tr in groups:
            for rec in tr:
                row = [rec.k, rec.branch] + [repr(float(getattr(rec, f))) for f in TRACE_FIELDS[2:]]
                w.writerow(([label] if runs is not None else []) + row)


def read_trace_csv(path):
    """Trace rows as dicts with numeric fields converted."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            row["k"] = int(row["k"])
            for f in TRACE_FIELDS[2:]:
                row[f] = float(row[f])
            out.append(row)
    return out


# Image stacks ================================================================
def write_stack(path, stack):
    """``<path>.bin`` (little-endian float64, band-major) plus ``<path>.json``."""
    path = Path(path)
    base = path.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    stack.data.astype("<f8").tofile(base.with_suffix(".bin"))
    meta = {"bands": stack.bands, "height": stack.height, "width": stack.width, "dtype": "<f8"}
    base.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
    return base.with_suffix(".bin")


def read_stack(path):
    from .fusion import ImageStack

    base = Path(path).with_suffix("")
    side = base.with_suffix(".json")
    raw = base.with_suffix(".bin")
    for p in (side, raw):
        if not p.exists():
            raise FormatError(p, "no such file")
    try:
        meta = json.loads(side.read_text())
        bands, h, w = int(meta["bands"]), int(meta["height"]), int(meta["width"])
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise FormatError(side, f"bad sidecar ({exc})") from None
    data = np.fromfile(raw, dtype="<f8")
    if data.size != bands * h * w:
        raise FormatError(raw, f"{data.size} values, expected {bands}x{h}x{w}")
    return ImageStack(data.reshape(bands, h * w).astype(np.float64), h, w)


def export_png(path, stack, bands=(0,), lo=None, hi=None):
    """Save one band as greyscale or three bands as RGB, linearly scaled to 8 bits."""
    from PIL import Image

    bands = tuple(bands)
    if len(bands) not in (1, 3):
        raise ValueError("export one band or an RGB triple")
    img = np.stack([stack.band(b) for b in bands], axis=-1)
    lo = img.min() if lo is None else lo
    hi = img.max() if hi is None else hi
    scaled = np.zeros_like(img) if hi <= lo else (img - lo) / (hi - lo)
    u8 = np.round(255 * np.clip(scaled, 0, 1)).astype(np.uint8)
    Image.fromarray(u8[..., 0] if len(bands) == 1 else u8).save(path)
    return path
