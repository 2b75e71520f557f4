"""Command-line interface.

Exit codes::

    0  success
    1  invalid arguments (bad gamma, n < 4k, unknown flag values)
    2  input/output error or malformed CSV
    3  degenerate sample (every candidate subset is singular)
    4  exact enumeration too large
    5  unknown density model
    6  singular derivative (plug-in map not invertible)
"""

import argparse
import csv
import io
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .core import TangentVector, coord_labels, tangent_to_coords
from .elliptical import elliptical_constants, influence
from .errors import (BadBandwidth, BadFraction, BoundaryUndefined, DegenerateMatrix,
                     DegenerateSample, SingularDerivative, TooLarge, UnknownModel)
from .estimator import as_samples, load_csv, mcd_cstep, mcd_exact
from .functional import invert_map, plug_in_lambda_prime, sandwich_covariance
from .models import get_model, get_radial

log = logging.getLogger("mcdtheory")

EXIT_OK = 0
EXIT_ARGS = 1
EXIT_IO = 2
EXIT_DEGENERATE = 3
EXIT_TOO_LARGE = 4
EXIT_MODEL = 5
EXIT_SINGULAR = 6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


# -- JSON with 17 significant digits ------------------------------------------

def _encode(obj):
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        s = "%.17g" % x
        if "." not in s and "e" not in s and "inf" not in s:
            s += ".0"
        return s
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj):
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj) + "\n"


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", newline="") as fh:
        fh.write(text)


# -- helpers -------------------------------------------------------------------

def _gamma(value):
    try:
        g = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gamma must be a number, got {value!r}")
    if not 0 < g < 1:
        raise argparse.ArgumentTypeError(f"gamma must lie in (0, 1), got {g}")
    return g


def _positive_int(value):
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _bandwidth(value):
    if value == "auto":
        return value
    try:
        parts = [float(p) for p in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bandwidth must be 'auto' or positive numbers, got {value!r}")
    if not all(p > 0 for p in parts):
        raise argparse.ArgumentTypeError(f"bandwidth must be positive, got {value!r}")
    return parts[0] if len(parts) == 1 else parts


def _ladder(value):
    try:
        rungs = tuple(int(v) for v in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"ladder must be comma-separated integers, got {value!r}")
    if len(rungs) < 2:
        raise argparse.ArgumentTypeError("ladder needs at least two sample sizes")
    return rungs


def _read_samples(args):
    try:
        X = load_csv(args.input, header=args.header)
    except OSError as exc:
        raise _IOFailure(f"cannot read {args.input}: {exc.strerror or exc}")
    except ValueError as exc:
        raise _IOFailure(f"{args.input}: {exc}")
    return as_samples(X)


class _IOFailure(Exception):
    pass


def _fit(X, args):
    n, k = X.shape
    if n < 4 * k:
        raise UsageError(f"need at least 4k = {4 * k} observations, got n = {n}")
    if args.exact:
        return mcd_exact(X, args.gamma)
    return mcd_cstep(X, args.gamma, restarts=args.restarts, seed=args.seed)


# -- subcommands -----------------------------------------------------------------

def cmd_estimate(args):
    X = _read_samples(args)
    fit = _fit(X, args)
    out = fit.to_dict()
    out["k"] = fit.k
    out["seed"] = args.seed
    _emit(dumps(out), args.out)
    return EXIT_OK


def cmd_theory(args):
    radial = get_radial(args.model, args.k, nu=args.nu)
    c = elliptical_constants(radial, args.gamma)
    out = {"model": radial.name}
    out.update(c.to_json_dict())
    _emit(dumps(out), args.out)
    return EXIT_OK


def cmd_variance(args):
    X = _read_samples(args)
    fit = _fit(X, args)
    density = None
    if args.density is not None:
        density = get_model(args.density, fit.k, nu=args.nu)
    lp = plug_in_lambda_prime(X, fit, bandwidth=args.bandwidth, density=density)
    invert_map(lp)
    cov = sandwich_covariance(X, fit, lp)
    theta = fit.theta()
    out = {
        "theta_hat": {"m": theta.m, "G": theta.G, "r": theta.r},
        "theta_hat_coords": tangent_to_coords(TangentVector(theta.m, theta.G, theta.r)),
        "keys": coord_labels(fit.k),
        "density": "kde" if density is None else density.name,
        "bandwidth": args.bandwidth,
        "lambda_prime": lp.matrix,
        "condition": lp.condition(),
        "covariance": cov,
        "n": fit.n,
        "gamma": fit.gamma,
        "method": "exact" if fit.exact else "cstep",
    }
    _emit(dumps(out), args.out)
    return EXIT_OK


def _grid(spec, r):
    if spec is None:
        return np.linspace(0.0, 3 * r, 61)
    try:
        lo, hi, num = spec.split(",")
        return np.linspace(float(lo), float(hi), int(num))
    except ValueError:
        raise UsageError(f"grid must be 'start,stop,count', got {spec!r}")


def cmd_influence(args):
    radial = get_radial(args.model, args.k, nu=args.nu)
    c = elliptical_constants(radial, args.gamma)
    k = args.k
    iu = np.triu_indices(k)
    e1 = np.zeros(k)
    e1[0] = 1.0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["norm", "if_mu_norm"] + [f"if_sigma_{i + 1}{j + 1}" for i, j in zip(*iu)]
               + ["if_rho"])
    for t in _grid(args.grid, c.r):
        try:
            v = influence(t * e1, c)
        except BoundaryUndefined:
            log.warning("skipping grid point %.17g on the trimming boundary", t)
            continue
        row = [t, np.linalg.norm(v.mu)] + list(v.sigma[iu]) + [v.rho]
        w.writerow(["%.17g" % x for x in row])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_simulate(args):
    from .montecarlo import (SimConfig, clt_check, expansion_remainder, plugin_check,
                             write_reps_csv)
    get_radial(args.model, args.k, nu=args.nu)
    config = SimConfig(model=args.model, k=args.k, n=args.n, reps=args.reps, gamma=args.gamma,
                       seed=args.seed, estimator="exact" if args.exact else "cstep",
                       restarts=args.restarts, nu=args.nu, ladder=args.ladder,
                       density=args.density, bandwidth=args.bandwidth, workers=args.workers)
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    run = {"clt": clt_check, "expansion": expansion_remainder, "plugin": plugin_check}[args.check]
    report = run(config)
    _emit(dumps(report.to_dict()), args.out)
    if args.dump_reps:
        if args.check != "clt":
            raise UsageError("--dump-reps is only available with --check clt")
        try:
            write_reps_csv(args.dump_reps, report, args.k)
        except OSError as exc:
            raise _IOFailure(f"cannot write {args.dump_reps}: {exc.strerror or exc}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _common(p, gamma_default):
    p.add_argument("--gamma", type=_gamma, default=gamma_default,
                   help=f"coverage fraction in (0, 1) (default {gamma_default})")
    p.add_argument("--out", default=None, help="output file (default stdout)")


def _data_args(p):
    p.add_argument("input", help="CSV file, one observation per row")
    p.add_argument("--header", action="store_true", help="skip the first line")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="enumerate all subsets")
    p.add_argument("--restarts", type=_positive_int, default=50)


def _model_args(p, default="gaussian"):
    p.add_argument("--model", default=default,
                   help="gaussian, student_t(nu), uniform_ball(radius)")
    p.add_argument("--nu", type=float, default=None, help="Student-t degrees of freedom")
    p.add_argument("--k", "--dim", dest="k", type=_positive_int, default=2, help="dimension")


def build_parser():
    parser = _Parser(prog="mcdtheory", description="MCD estimation and asymptotic theory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="fit the MCD to a CSV sample")
    _data_args(p)
    _common(p, 0.5)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("theory", help="closed-form constants at a spherical model")
    _model_args(p)
    _common(p, 0.5)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("variance", help="plug-in sandwich covariance for a CSV sample")
    _data_args(p)
    _common(p, 0.5)
    p.add_argument("--bandwidth", type=_bandwidth, default="auto",
                   help="kernel bandwidth(s) or 'auto'")
    p.add_argument("--density", default=None,
                   help="use this standard model density instead of a kernel estimate")
    p.add_argument("--nu", type=float, default=None)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("influence", help="tabulate influence functions along a ray")
    _model_args(p)
    _common(p, 0.5)
    p.add_argument("--grid", default=None, help="radial grid 'start,stop,count' (default 0,3r,61)")
    p.set_defaults(func=cmd_influence)

    p = sub.add_parser("simulate", help="Monte-Carlo checks of the limit theory")
    _model_args(p)
    _common(p, 0.75)
    p.add_argument("--check", choices=("clt", "expansion", "plugin"), default="clt")
    p.add_argument("--n", type=_positive_int, default=2000)
    p.add_argument("--reps", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="use exact enumeration")
    p.add_argument("--restarts", type=_positive_int, default=10)
    p.add_argument("--ladder", type=_ladder, default=(200, 800, 3200))
    p.add_argument("--density", choices=("kde", "oracle"), default="kde")
    p.add_argument("--bandwidth", type=_bandwidth, default="auto")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--dump-reps", default=None, help="write per-replication estimates as CSV")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return args.func(args)
    except _IOFailure as exc:
        code, msg = EXIT_IO, str(exc)
    except OSError as exc:
        code, msg = EXIT_IO, str(exc)
    except DegenerateSample as exc:
        code, msg = EXIT_DEGENERATE, str(exc)
    except TooLarge as exc:
        code, msg = EXIT_TOO_LARGE, str(exc)
    except UnknownModel as exc:
        code, msg = EXIT_MODEL, str(exc)
    except (SingularDerivative, DegenerateMatrix) as exc:
        code, msg = EXIT_SINGULAR, str(exc)
    except (UsageError, BadFraction, BadBandwidth, ValueError) as exc:
        code, msg = EXIT_ARGS, str(exc)
    print(f"mcdtheory: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
