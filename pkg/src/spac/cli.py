"""Command-line entry point: ``spac {fit,simulate,check,gencov,precision}``.

Primary output goes to standard output as JSON unless ``--out-csv`` is given.
A run manifest (command line, seed, versions, timestamps, input digests) is
written to a sidecar file so the primary output stays byte-identical across
reruns.

Exit codes: 0 success, 1 usage error, 2 computation error.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import os
import platform
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, conditions, simulation, solver
from .data import load_csv
from .errors import SpacError
from .penalty import Family, lasso, scad
from .precision import PrecisionDiag, estimate_precision_diag

log = logging.getLogger("spac")

EXIT_OK, EXIT_USAGE, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; 2 is reserved for computation errors
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text, length=None):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if length is not None and len(vals) != length:
        raise argparse.ArgumentTypeError(f"expected {length} values, got {len(vals)}")
    return tuple(vals)


def _alpha(text):
    return _float_list(text, 3)


def _default_workers():
    env = os.environ.get("SPAC_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer SPAC_WORKERS=%r", env)
    return os.cpu_count() or 1


def _common():
    p = _Parser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=0, help="master random seed")
    g.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $SPAC_WORKERS, else CPU count)")
    g.add_argument("--out-csv", metavar="PATH", default=None,
                   help="write the primary table as CSV here instead of JSON to stdout")
    g.add_argument("--manifest", metavar="PATH", default=None,
                   help="run-manifest path (default: <out-csv>.manifest.json when --out-csv is set)")
    g.add_argument("--quiet", action="store_true", help="suppress progress and info messages")
    return p


def build_parser():
    common = _common()
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="spac", formatter_class=fmt,
                     description="SPAC penalized regression, condition audits and simulations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    f = sub.add_parser("fit", parents=[common], formatter_class=fmt,
                       help="fit a (SPAC-)penalized regression to a CSV file")
    f.add_argument("data", help="numeric CSV file")
    f.add_argument("--response", default="-1", help="response column name or 0-based index")
    f.add_argument("--penalty", choices=[fam.value for fam in Family], default="lasso")
    f.add_argument("--spac", action=argparse.BooleanOptionalAction, default=True,
                   help="penalize the SPAC vector (--no-spac fits the plain beta-space estimator)")
    how = f.add_mutually_exclusive_group()
    how.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="fit at this penalty level")
    how.add_argument("--bic-path", action="store_true",
                     help="fit a lambda path and select by BIC (the default without --lambda)")
    f.add_argument("--a", type=float, default=3.7, help="SCAD shape parameter")
    f.add_argument("--mu", type=float, default=1.0, help="adaptive-Lasso weight exponent")
    f.add_argument("--precision", choices=["auto", "sample", "ols", "sqrtlasso"], default="auto",
                   help="precision-diagonal estimator for SPAC fits")
    f.add_argument("--lambda-d", type=float, default=None,
                   help="square-root-Lasso tuning (default sqrt(2 log p / n))")
    f.add_argument("--tol", type=float, default=solver.DEFAULT_TOL)
    f.add_argument("--max-iter", type=int, default=solver.DEFAULT_MAX_ITER)
    f.add_argument("--path-count", type=int, default=100, help="lambda grid size")
    f.add_argument("--decades", type=float, default=3.0, help="lambda grid span in decades")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", parents=[common], formatter_class=fmt,
                       help="run a Monte-Carlo setting and report FNR/FPR")
    s.add_argument("--setting", default="1", help="built-in setting 1-4 or a TOML config file")
    s.add_argument("--alpha", type=_alpha, default=None,
                   help="block correlations a1,a2,a3 (default 0.5,0.7,0.9 for built-ins)")
    bs = s.add_mutually_exclusive_group()
    bs.add_argument("--beta-s", type=_float_list, default=None,
                    help="comma-separated signal values")
    bs.add_argument("--beta-triple", type=_alpha, action="append", default=None,
                    help="grouped signal triple b1,b2,b3 (repeatable)")
    s.add_argument("--reps", type=int, default=None, help="replications (default 100)")
    s.add_argument("--methods", default=None,
                   help="comma-separated subset of " + ",".join(m.value for m in simulation.Method))
    s.add_argument("--per-rep-out", metavar="PATH", default=None,
                   help="write per-replication scores as CSV")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check", parents=[common], formatter_class=fmt,
                       help="audit irrepresentable conditions for a covariance")
    c.add_argument("--cov", default="exchangeable",
                   help="exchangeable, ar1, or a CSV file holding the matrix")
    c.add_argument("--alpha", type=_alpha, default=(0.5, 0.7, 0.9))
    c.add_argument("--q", type=int, default=10, help="number of relevant covariates")
    c.add_argument("--p", type=int, default=150, help="total covariates (ignored for CSV)")
    c.add_argument("--signs", default="all-plus",
                   help="all-plus or comma-separated signs of the relevant coefficients")
    c.add_argument("--corollary", type=int, choices=[1, 2, 3], default=None,
                   help="also evaluate a sufficient condition")
    c.add_argument("--eta", type=float, default=0.01)
    c.add_argument("--L", dest="L", type=float, default=1.0,
                   help="lower bound used by the exchangeable sufficient condition")
    c.set_defaults(func=cmd_check)

    g = sub.add_parser("gencov", parents=[common], formatter_class=fmt,
                       help="emit a correlation matrix as CSV")
    g.add_argument("--kind", choices=["exchangeable", "ar1", "random"], default="exchangeable")
    g.add_argument("--alpha", type=_alpha, default=(0.5, 0.7, 0.9))
    g.add_argument("--q", type=int, default=10)
    g.add_argument("--p", type=int, default=150)
    g.add_argument("--low", type=float, default=1.0, help="lower shift for --kind random")
    g.add_argument("--high", type=float, default=2.0, help="upper shift for --kind random")
    g.set_defaults(func=cmd_gencov)

    pr = sub.add_parser("precision", parents=[common], formatter_class=fmt,
                        help="estimate the precision-matrix diagonal of a design")
    pr.add_argument("data", help="numeric CSV file")
    pr.add_argument("--response", default=None,
                    help="column to drop before estimation (default: use every column)")
    pr.add_argument("--method", choices=["auto", "sample", "ols", "sqrtlasso"], default="auto")
    pr.add_argument("--lambda-d", type=float, default=None,
                    help="square-root-Lasso tuning (default sqrt(2 log p / n))")
    pr.set_defaults(func=cmd_precision)
    return parser


# ---------------------------------------------------------------- commands


def _fit_record(fit):
    return {"gamma": fit.gamma.tolist(), "beta": fit.beta.tolist(), "lambda": fit.lam,
            "converged": bool(fit.converged), "iterations": int(fit.iterations),
            "objective": fit.objective, "support": fit.support.tolist(), "df": fit.df}


def cmd_fit(args, out):
    data = load_csv(args.data, args.response)
    path_kw = dict(count=args.path_count, decades=args.decades, tol=args.tol,
                   max_iter=args.max_iter)
    if args.spac:
        d = estimate_precision_diag(data, args.precision, args.lambda_d)
        space = solver.Space.SPAC
    else:
        d = PrecisionDiag.ones(data.p)
        space = solver.Space.BETA
    family = Family(args.penalty)
    if family is Family.LASSO:
        pen = lasso()
    elif family is Family.SCAD:
        pen = scad(a=args.a)
    elif args.spac:
        pen = solver.spac_alasso_penalty(data, d, args.mu, **path_kw)
    else:
        pen = solver.baseline_alasso_penalty(data, args.mu, **path_kw)

    result = {"penalty": family.value, "space": space.value, "n": data.n, "p": data.p,
              "precision_method": d.method.value if args.spac else None,
              "d": d.d.tolist()}
    if args.lam is not None:
        fit = solver.coordinate_descent_fit(data, d, pen.with_lambda(args.lam), tol=args.tol,
                                            max_iter=args.max_iter, space=space, strict=False)
        result.update(_fit_record(fit), bic=solver.bic(fit, data.n))
        rows = None
    else:
        path = solver.lambda_path(data, d, pen, space=space, **path_kw)
        fit = solver.bic_select(path)
        k = next(i for i, f in enumerate(path.fits) if f is fit)
        result.update(_fit_record(fit), bic=float(path.bic[k]))
        rows = [(float(lam), float(b), f.df, bool(f.converged), int(f.iterations))
                for lam, b, f in zip(path.lambdas, path.bic, path.fits)]
    if args.out_csv:
        buf = io.StringIO()
        if rows is None:
            buf.write("lambda,bic,df,converged,iterations\n")
            buf.write(f"{fit.lam!r},{solver.bic(fit, data.n)!r},{fit.df},{fit.converged},"
                      f"{fit.iterations}\n")
        else:
            buf.write("lambda,bic,df,converged,iterations\n")
            for lam, b, df, conv, it in rows:
                buf.write(f"{lam!r},{b!r},{df},{conv},{it}\n")
        out.csv(buf.getvalue())
    out.json(result)
    return [args.data]


def _simulation_config(args):
    if args.setting.endswith(".toml") or os.path.isfile(args.setting):
        cfg = simulation.load_config(args.setting)
        if args.alpha is not None:
            cfg = simulation.with_overrides(cfg, alpha=args.alpha)
        inputs = [args.setting]
    else:
        cfg = simulation.builtin_setting(args.setting, args.alpha or (0.5, 0.7, 0.9))
        inputs = []
    beta = None
    if args.beta_s is not None:
        beta = tuple(args.beta_s)
    elif args.beta_triple is not None:
        beta = tuple(args.beta_triple)
    methods = None
    if args.methods:
        methods = tuple(simulation.Method(m.strip()) for m in args.methods.split(",") if m.strip())
    cfg = simulation.with_overrides(cfg, beta_values=beta, replications=args.reps,
                                    seed=args.seed, methods=methods)
    return cfg, inputs


def cmd_simulate(args, out):
    try:
        cfg, inputs = _simulation_config(args)
    except ValueError as exc:
        if isinstance(exc, SpacError):
            raise
        raise UsageError(str(exc)) from None
    workers = args.workers if args.workers is not None else _default_workers()
    table = simulation.run_setting(cfg, workers=workers, progress=not args.quiet)
    if args.per_rep_out:
        with open(args.per_rep_out, "w", encoding="utf-8", newline="") as fh:
            fh.write(table.per_rep_csv())
    if args.out_csv:
        out.csv(table.to_csv())
    else:
        out.json(table.to_dict())
    return inputs


def _signs(text, q):
    if text == "all-plus":
        return np.ones(q)
    try:
        s = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"--signs must be all-plus or comma-separated numbers, got {text!r}") from None
    if s.shape != (q,):
        raise UsageError(f"--signs needs {q} values, got {s.size}")
    return np.sign(s)


def _covariance(args):
    if args.cov == "exchangeable":
        return conditions.block_exchangeable_cov(args.q, args.p, args.alpha), []
    if args.cov == "ar1":
        return conditions.block_ar1_cov(args.q, args.p, args.alpha), []
    if not os.path.isfile(args.cov):
        raise UsageError(f"--cov must be exchangeable, ar1 or an existing CSV file: {args.cov!r}")
    M = np.loadtxt(args.cov, delimiter=",", ndmin=2)
    return conditions.explicit_cov(M), [args.cov]


def cmd_check(args, out):
    C, inputs = _covariance(args)
    report = conditions.check_irrepresentable(C, args.q, _signs(args.signs, args.q))
    result = {"kind": C.kind, "p": C.p, "q": args.q, **report.to_dict()}
    if args.corollary == 1:
        result["corollary"] = {"which": 1, "eta": args.eta, "L": args.L,
                               "holds": conditions.exchangeable_sufficient_check(
                                   args.alpha, args.L, args.eta)}
    elif args.corollary == 2:
        result["corollary"] = {"which": 2, "eta": args.eta,
                               "lhs": conditions.ar1_lhs(args.alpha),
                               "holds": conditions.ar1_sufficient_check(args.alpha, args.eta)}
    elif args.corollary == 3:
        result["corollary"] = {"which": 3, "eta": args.eta,
                               "holds": conditions.general_sufficient_check(C, args.q, args.eta)}
    if args.out_csv:
        buf = io.StringIO()
        buf.write("index,original,transformed\n")
        for i, (o, t) in enumerate(zip(report.original_vector, report.transformed_vector)):
            buf.write(f"{i + args.q},{o!r},{t!r}\n")
        out.csv(buf.getvalue())
    out.json(result)
    return inputs


def cmd_gencov(args, out):
    if args.kind == "exchangeable":
        C = conditions.block_exchangeable_cov(args.q, args.p, args.alpha)
    elif args.kind == "ar1":
        C = conditions.block_ar1_cov(args.q, args.p, args.alpha)
    else:
        C = conditions.random_c1_covariance(args.p, args.q, (args.low, args.high), seed=args.seed)
    buf = io.StringIO()
    np.savetxt(buf, C.realized, delimiter=",", fmt="%.17g")
    out.csv(buf.getvalue(), always=True)
    return []


def cmd_precision(args, out):
    data = load_csv(args.data, args.response)
    est = estimate_precision_diag(data, args.method, args.lambda_d)
    if args.out_csv:
        out.csv("".join(f"{v!r}\n" for v in est.d))
    out.json(est.d.tolist())
    return [args.data]


# ---------------------------------------------------------------- plumbing


class _Output:
    """Routes the primary result to stdout (JSON) or to ``--out-csv``."""

    def __init__(self, args):
        self.out_csv = getattr(args, "out_csv", None)
        self.wrote_csv = False

    def csv(self, text, always=False):
        if self.out_csv:
            with open(self.out_csv, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            self.wrote_csv = True
        elif always:
            sys.stdout.write(text)

    def json(self, obj):
        if not self.wrote_csv:
            json.dump(obj, sys.stdout, indent=2, allow_nan=True)
            sys.stdout.write("\n")


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    import numba
    return {"spac": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "numba": numba.__version__}


def write_manifest(path, argv, seed, started, inputs):
    manifest = {
        "command_line": ["spac", *argv],
        "seed": seed,
        "versions": _versions(),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "input_digests": {p: _digest(p) for p in inputs},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    started = datetime.now(timezone.utc).isoformat()
    out = _Output(args)
    try:
        inputs = args.func(args, out)
    except UsageError as exc:
        print(f"spac {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpacError as exc:
        print(f"spac {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"spac {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR

    manifest = args.manifest or (f"{args.out_csv}.manifest.json" if args.out_csv else None)
    if manifest:
        write_manifest(manifest, argv, args.seed, started, inputs)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
