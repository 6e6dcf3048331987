"""Command-line driver: single solves, seeded experiment protocols, fusion
runs and image metrics.

Every command prints a JSON-lines report (or CSV records with
``--format csv``) and exits 0 exactly when all checked bounds hold, 1 when a
bound fails or the solver errors, and 2 on bad input files or arguments.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import FormatError, PipelineError, SolverError
from .gltr import VARIANTS, SolverConfig
from .io import (
    export_png,
    load_manifest,
    read_matrix,
    read_stack,
    write_matrix,
    write_stack,
    write_trace_csv,
)
from .metrics import quality_report

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _solver_flags(p, delta_default=None, reorth_default=False):
    g = p.add_argument_group("solver")
    g.add_argument("--delta", type=float, default=delta_default,
                   help="trust-region radius (experiments scale it themselves)")
    g.add_argument("--eps", type=float, default=1e-14, help="relative stopping tolerance")
    g.add_argument("--max-iter", type=int, default=None, help="iteration cap (default 4*m*n)")
    g.add_argument("--variant", choices=VARIANTS, default="simplified41")
    g.add_argument("--reorthogonalize", action=argparse.BooleanOptionalAction,
                   default=reorth_default,
                   help="reorthogonalize CG residuals against the Lanczos basis")


def _output_flags(p):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")
    p.add_argument("--trace", type=Path, default=None, help="per-iteration trace CSV")


def build_parser():
    ap = argparse.ArgumentParser(prog="sylvgltr", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the equation described by a JSON manifest")
    p.add_argument("manifest", type=Path)
    _solver_flags(p)
    _output_flags(p)
    p.add_argument("--auto-retry-delta", action="store_true",
                   help="re-solve at 2x and 3x the radius while the solution is on the boundary")
    p.add_argument("--solution", type=Path, default=None, help="write X* (.csv or .mtx)")

    p = sub.add_parser("recover", help="construct-and-recover protocol")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--multiples", type=_floats, default=(0.5, 0.9, 0.99, 1.0, 1.5, 2.0, 3.0))
    p.add_argument("--shape", type=int, nargs=4, default=(5, 5, 7, 6), metavar=("M", "N", "P", "Q"))
    _solver_flags(p)
    _output_flags(p)

    p = sub.add_parser("perturb", help="perturbed right-hand side protocol")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb-scale", type=float, default=0.1)
    p.add_argument("--multiples", type=_floats, default=(1.5, 2.0, 3.0))
    p.add_argument("--shape", type=int, nargs=4, default=(5, 5, 7, 6), metavar=("M", "N", "P", "Q"))
    _solver_flags(p, reorth_default=True)
    _output_flags(p)

    p = sub.add_parser("boundary-sweep", help="radius sweep on an inconsistent Sylvester equation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=12)
    p.add_argument("--grid", type=float, nargs=3, default=(0.1, 2.0, 20),
                   metavar=("LO", "HI", "POINTS"), help="multiples of the unconstrained norm")
    _solver_flags(p)
    _output_flags(p)

    p = sub.add_parser("oracle-check", help="solver objective against the dense oracle")
    p.add_argument("--families", default=None, help="comma-separated family names (default all)")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--multiples", type=_floats, default=(0.5, 1.0, 2.0))
    p.add_argument("--max-size", type=int, default=5)
    p.add_argument("--rtol", type=float, default=1e-8)
    _solver_flags(p)
    _output_flags(p)

    p = sub.add_parser("fuse", help="degrade, fuse and score a multiband image")
    p.add_argument("--input", type=Path, default=None, help="image stack (.bin + .json); synthetic if absent")
    p.add_argument("--bands", type=int, default=8)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--n-ms", type=int, default=3)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--factor", type=int, default=2)
    p.add_argument("--r", type=int, default=None, help="subspace dimension (default bands//2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--identity-model", action="store_true")
    p.add_argument("--output-dir", type=Path, default=None,
                   help="write fused stack, metrics.json and per-band PNGs here")
    _solver_flags(p, delta_default=1e6)
    _output_flags(p)

    p = sub.add_parser("metrics", help="PSNR, SAM, ERGAS and Q of an estimate against a reference")
    p.add_argument("reference", type=Path)
    p.add_argument("estimate", type=Path)
    p.add_argument("--d", type=float, default=1.0, help="resolution ratio for ERGAS")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path, default=None)
    return ap


def _config(args, **extra):
    kw = dict(eps=args.eps, max_iter=args.max_iter, variant=args.variant,
              reorthogonalize=args.reorthogonalize)
    if args.delta is not None:
        kw["delta"] = args.delta
    kw.update(extra)
    return SolverConfig(**kw)


def _emit(args, text):
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)


def _emit_report(args, rep):
    _emit(args, rep.to_csv() if args.format == "csv" else rep.to_jsonl())
    if getattr(args, "trace", None) is not None and rep.traces:
        if len(rep.traces) == 1:
            write_trace_csv(args.trace, rep.traces[0][1])
        else:
            write_trace_csv(args.trace, None, runs=rep.traces)


def cmd_solve(args):
    spec, man = load_manifest(args.manifest)
    if spec.rhs is None:
        raise FormatError(args.manifest, "manifest has no right-hand side")
    x_true = None
    if man.get("x_true"):
        x_true = read_matrix(args.manifest.parent / man["x_true"])
    delta = args.delta if args.delta is not None else man.get("delta", SolverConfig.delta)
    cfg = _config(args, delta=float(delta))
    rep, outcome = ex.run_solve(spec, cfg, args.auto_retry_delta, x_true)
    rep.params["manifest"] = args.manifest.name
    if outcome is not None:
        rep.summary.update(outcome.summary())
        if args.solution is not None:
            write_matrix(args.solution, outcome.x_star)
    _emit_report(args, rep)
    return rep


def cmd_recover(args):
    rep = ex.recover(args.seed, args.multiples, _config(args), tuple(args.shape))
    _emit_report(args, rep)
    return rep


def cmd_perturb(args):
    rep = ex.perturb(args.seed, args.perturb_scale, args.multiples, _config(args), tuple(args.shape))
    _emit_report(args, rep)
    return rep


def cmd_boundary_sweep(args):
    lo, hi, n = args.grid
    rep = ex.boundary_sweep(args.seed, args.size, np.linspace(lo, hi, int(n)), _config(args))
    _emit_report(args, rep)
    return rep


def cmd_oracle_check(args):
    fams = None if args.families is None else [f.strip() for f in args.families.split(",") if f.strip()]
    rep = ex.oracle_check(fams, args.trials, args.seed, args.multiples, _config(args),
                          args.max_size, args.rtol)
    _emit_report(args, rep)
    return rep


def cmd_fuse(args):
    image = read_stack(args.input) if args.input is not None else None
    rep, result = ex.fuse_experiment(args.bands, args.height, args.width, args.n_ms, args.sigma,
                                     args.factor, args.r, args.seed, _config(args), image,
                                     args.identity_model)
    if args.output_dir is not None:
        d = args.output_dir
        d.mkdir(parents=True, exist_ok=True)
        write_stack(d / "fused.bin", result.image)
        (d / "metrics.json").write_text(json.dumps(rep.records[0], indent=2, sort_keys=True) + "\n")
        lo, hi = result.image.data.min(), result.image.data.max()
        for b in range(result.image.bands):
            export_png(d / f"band_{b:02d}.png", result.image, (b,), lo, hi)
    _emit_report(args, rep)
    return rep


def cmd_metrics(args):
    ref, est = read_stack(args.reference), read_stack(args.estimate)
    q = quality_report(ref, est, d=args.d)
    rep = ex.ExperimentReport("metrics", {"reference": args.reference.name,
                                          "estimate": args.estimate.name, "d": args.d})
    rep.add(**q.to_dict())
    _emit(args, rep.to_csv() if args.format == "csv" else rep.to_jsonl())
    return rep


COMMANDS = {
    "solve": cmd_solve,
    "recover": cmd_recover,
    "perturb": cmd_perturb,
    "boundary-sweep": cmd_boundary_sweep,
    "oracle-check": cmd_oracle_check,
    "fuse": cmd_fuse,
    "metrics": cmd_metrics,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        rep = COMMANDS[args.command](args)
    except FormatError as exc:
        print(f"sylvgltr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, OSError) as exc:
        print(f"sylvgltr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, PipelineError) as exc:
        print(f"sylvgltr: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for msg in rep.failures:
        print(f"sylvgltr: FAIL {msg}", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
