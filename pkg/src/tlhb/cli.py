"""Command-line front end: ``tlhb analyze|solve|optimal-p|verify|gen``.

Exit codes: 0 success, 1 a checked property failed, 2 bad input or a
violated invariant, 3 the solve did not converge.
"""
import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import numpy as np

from . import analysis, verify
from .errors import NotConverged, TlhbError
from .mmio import read_matrix, read_vector, write_matrix
from .operators import CoarseSolver, build_smoother, galerkin_coarse
from .problems import TwoLevelDecomposition, gallery, rng
from .spectral import numerical_rank, sym_eigenvalues
from .twolevel import (TlhbOperator, norm_from_preconditioner, preconditioned_spectrum, solve,
                       worst_start)

EXIT_OK, EXIT_PROPERTY, EXIT_INPUT, EXIT_DIVERGED = 0, 1, 2, 3

TOLERANCES = {
    "exact": 0.0,
    "identity": 1e-10,
    "value": 1e-10,
    "spectrum": 1e-8,
    "bounds": analysis.BOUND_SLACK,
    "energy_split": 1e-10,
}

log = logging.getLogger("tlhb")


class InputError(TlhbError):
    """Inconsistent command-line input (missing files, conflicting flags)."""


# ---------------------------------------------------------------- report helpers

def _num(x):
    if x is None:
        return None
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    return x if math.isfinite(x) else None


def field(value, tol):
    """A report entry: the value and the tolerance it was validated under."""
    if isinstance(value, (list, tuple, np.ndarray)):
        value = [_num(v) for v in np.ravel(value)]
    else:
        value = _num(value)
    return {"value": value, "tolerance": tol}


def dump_json(obj):
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _flatten(obj, prefix=""):
    if isinstance(obj, dict) and set(obj) == {"value", "tolerance"}:
        v = obj["value"]
        yield prefix, " ".join(repr(x) for x in v) if isinstance(v, list) else v, obj["tolerance"]
    elif isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else k)
    else:
        yield prefix, obj, ""


def dump_csv(obj):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["field", "value", "tolerance"])
    for row in _flatten(obj):
        w.writerow(row)
    return buf.getvalue()


def emit(report, args, name):
    text = dump_csv(report) if getattr(args, "format", "json") == "csv" else dump_json(report)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        ext = "csv" if getattr(args, "format", "json") == "csv" else "json"
        with open(os.path.join(args.out, f"{name}.{ext}"), "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


# ---------------------------------------------------------------- configuration

def load_decomposition(args, need_p=True):
    if args.gallery:
        if args.a or args.s or args.p:
            raise InputError("--gallery cannot be combined with --a/--s/--p")
        return gallery(args.gallery, seed=args.seed)
    if not (args.a and args.s and (args.p or not need_p)):
        raise InputError("give --gallery or all of --a, --s" + (", --p" if need_p else ""))
    A, S = read_matrix(args.a), read_matrix(args.s)
    if args.p:
        return TwoLevelDecomposition(A, S, read_matrix(args.p))
    return A, S


def load_smoother(spec, A, S):
    kind, _, path = spec.partition(":")
    if kind == "custom":
        if not path:
            raise InputError("custom smoother needs custom:<path to M_s>")
        return build_smoother(A, S, "custom", M_s=read_matrix(path))
    try:
        return build_smoother(A, S, kind)
    except ValueError as exc:
        if isinstance(exc, TlhbError):
            raise
        raise InputError(f"unknown smoother {spec!r}") from exc


def load_coarse(args, dec):
    """B_c as an array, or None for the exact coarse solver."""
    spec = args.coarse
    if args.bc:
        if spec not in ("exact", None):
            raise InputError("--bc conflicts with --coarse " + spec)
        spec = "file:" + args.bc
    kind, _, arg = (spec or "exact").partition(":")
    if kind == "exact":
        return None
    if kind == "file":
        return read_matrix(arg)
    if kind == "scaled":
        try:
            c = float(arg)
        except ValueError as exc:
            raise InputError(f"bad scale in --coarse {spec!r}") from exc
        return c * galerkin_coarse(dec)
    if kind == "jacobi":
        return np.diag(np.diag(galerkin_coarse(dec)))
    raise InputError(f"unknown coarse solver {spec!r}")


def _config(args):
    cfg = {"smoother": args.smoother, "coarse": getattr(args, "coarse", None), "seed": args.seed}
    cfg["instance"] = args.gallery or {"A": args.a, "S": args.s, "P": args.p,
                                       "B_c": getattr(args, "bc", None)}
    return cfg


# ---------------------------------------------------------------- verbs

def cmd_analyze(args):
    dec = load_decomposition(args)
    sm = load_smoother(args.smoother, dec.A, dec.S)
    B_c = load_coarse(args, dec)
    T = TOLERANCES
    ex = analysis.exact_analysis(dec, sm)
    lem = analysis.energy_split_eigenvalues(dec, sm)
    A_s_spec = sym_eigenvalues(sm.A_s)
    report = {
        "config": _config(args),
        "n": field(dec.n, T["exact"]),
        "n_s": field(dec.n_s, T["exact"]),
        "n_c": field(dec.n_c, T["exact"]),
        "square": dec.is_square,
        "ranks": {
            "S": field(numerical_rank(dec.S), T["exact"]),
            "P": field(numerical_rank(dec.P), T["exact"]),
            "SP": field(numerical_rank(np.hstack([dec.S, dec.P])), T["exact"]),
            "StAP": field(lem.rank_stap, T["exact"]),
        },
        "gamma": field(ex.gamma, T["value"]),
        "cond_A_s": field(A_s_spec.max / A_s_spec.min, T["value"]),
        "smoother_certificate": field(sm.certificate, T["value"]),
        "sigma_tl": field(ex.sigma_tl, T["value"]),
        "norm_etl": field(ex.norm_etl, T["identity"]),
        "identity_residual": field(ex.identity_residual, T["identity"]),
        "spectrum_etl": field(ex.spectrum_etl.eigenvalues, T["spectrum"]),
        "k_tl": field(ex.k_tl, T["value"]),
        "k_tl_upper_bound": field(analysis.k_tl_upper_bound(dec, sm) if dec.is_square else None,
                                  T["value"]),
        "energy_split": {
            "lmin_complement": field(lem.lmin_complement, T["energy_split"]),
            "lmax_complement": field(lem.lmax_complement, T["energy_split"]),
            "lmin_proj": field(lem.lmin_proj, T["energy_split"]),
            "lmax_proj": field(lem.lmax_proj, T["energy_split"]),
            "theta": field(lem.theta, T["energy_split"]),
        },
        "tolerances": dict(TOLERANCES),
    }
    failures = []
    if ex.identity_residual > T["identity"]:
        failures.append("identity")
    B_fvz = galerkin_coarse(dec) if B_c is None else B_c
    report["fvz_bound"] = field(analysis.fvz_inexact_bound(dec, sm, B_fvz), T["value"])
    if B_c is None:
        report["coarse"] = {"variant": "exact"}
    else:
        b = analysis.inexact_bounds(dec, sm, B_c, check=False)
        report["coarse"] = {
            "variant": "approximate",
            "alpha": field(b.alpha, T["value"]),
            "beta": field(b.beta, T["value"]),
            "rank_case": b.rank_case.value,
            "regime": b.regime.value,
            "lower": field(b.lower, T["bounds"]),
            "upper": field(b.upper, T["bounds"]),
            "norm_inexact": field(b.observed, T["bounds"]),
            "bounds_hold": b.holds,
        }
        if not b.holds:
            failures.append("bounds")
    report["failures"] = failures
    emit(report, args, "analysis")
    return EXIT_PROPERTY if failures else EXIT_OK


def _rhs(args, n):
    if args.rhs == "zero":
        return np.zeros(n)
    if args.rhs == "random":
        return rng(args.seed, 21).standard_normal(n)
    if args.rhs == "ones":
        return np.ones(n)
    return read_vector(args.rhs)


def _write_history(path, hist):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "residual", "a_norm_error", "ratio"])
        for k, r in enumerate(hist.residual_norms):
            err = hist.iterates[k] if k < len(hist.iterates) else ""
            ratio = hist.contraction_ratios[k - 1] if 0 < k <= len(hist.contraction_ratios) else ""
            w.writerow([k, repr(r), repr(err) if err != "" else "", repr(ratio) if ratio != "" else ""])


def cmd_solve(args):
    dec = load_decomposition(args)
    sm = load_smoother(args.smoother, dec.A, dec.S)
    B_c = load_coarse(args, dec)
    coarse = CoarseSolver() if B_c is None else CoarseSolver.approximate(dec, B_c)
    op = TlhbOperator(dec, sm, coarse)
    f = _rhs(args, dec.n)
    if f.shape != (dec.n,):
        raise InputError(f"right-hand side has shape {f.shape}, expected ({dec.n},)")
    if args.start == "zero":
        u0 = np.zeros(dec.n)
    elif args.start == "random":
        u0 = rng(args.seed, 22).standard_normal(dec.n)
    else:
        # u* - u0 along the slowest-contracting error direction
        u0 = np.linalg.solve(dec.A, f) - worst_start(op)
    converged = True
    try:
        u, hist = solve(op, f, u0, tol=args.tol, max_sweeps=args.max_sweeps)
    except NotConverged as exc:
        converged, u, hist = False, exc.u, exc.history
    theory = norm_from_preconditioner(op)
    spec = preconditioned_spectrum(op)
    summary = {
        "config": _config(args),
        "converged": converged,
        "sweeps": field(hist.sweeps, TOLERANCES["exact"]),
        "final_residual": field(hist.residual_norms[-1], args.tol),
        "observed_rate": field(hist.asymptotic_rate(), 0.01),
        "theoretical_norm": field(theory, TOLERANCES["value"]),
        "preconditioned_spectrum": field([spec.min, spec.max], TOLERANCES["value"]),
        "tolerances": {"solve": args.tol, "rate_slack": 0.01},
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_history(os.path.join(args.out, "history.csv"), hist)
        write_matrix(os.path.join(args.out, "solution.mtx"), u)
    args.format = "json"
    emit(summary, args, "solve")
    return EXIT_OK if converged else EXIT_DIVERGED


def cmd_optimal_p(args):
    loaded = load_decomposition(args, need_p=False)
    A, S = (loaded.A, loaded.S) if isinstance(loaded, TwoLevelDecomposition) else loaded
    sm = load_smoother(args.smoother, A, S)
    n_c = args.nc
    if n_c is None:
        n_c = loaded.n_c if isinstance(loaded, TwoLevelDecomposition) else A.shape[0] - S.shape[1]
    P_star, bound = analysis.optimal_interpolation(A, S, sm, n_c)
    mu, _ = analysis.interpolation_eigenpairs(A, S, sm)
    achieved = analysis.norm_etl_exact(TwoLevelDecomposition(A, S, P_star), sm)
    report = {
        "config": _config(args),
        "n_c": field(n_c, TOLERANCES["exact"]),
        "mu": field(mu, TOLERANCES["spectrum"]),
        "bound": field(bound, TOLERANCES["value"]),
        "achieved": field(achieved, TOLERANCES["value"]),
        "tolerances": dict(TOLERANCES),
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_matrix(os.path.join(args.out, "P_star.mtx"), P_star, comment="optimal interpolation")
    emit(report, args, "optimal_p")
    return EXIT_OK if abs(achieved - bound) <= TOLERANCES["value"] else EXIT_PROPERTY


def cmd_verify(args):
    results = verify.run(args.suite, seed=args.seed, count=args.count, fault=args.inject)
    report = {"seed": args.seed, "count": args.count, "fault": args.inject,
              "suites": [r.to_dict() for r in results]}
    ok = all(r.ok for r in results)
    report["ok"] = ok
    failing = next((r for r in results if r.first_failure is not None), None)
    if failing is not None:
        target = os.path.join(args.out or ".", f"failure-{failing.suite}")
        failing.first_failure.dump(target)
        report["dumped_to"] = target
    for r in results:
        log.info("%s: %d passed, %d failed", r.suite, r.passed, r.failed)
    args.format = "json"
    emit(report, args, "verify")
    return EXIT_OK if ok else EXIT_PROPERTY


def cmd_gen(args):
    if not args.gallery:
        raise InputError("gen needs --gallery")
    dec = load_decomposition(args)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    written = []
    mats = {"A": dec.A, "S": dec.S, "P": dec.P}
    for name, M in mats.items():
        path = os.path.join(out, f"{name}.mtx")
        write_matrix(path, M, fmt=args.format, comment=f"{args.gallery} seed={args.seed}")
        written.append(path)
    sys.stdout.write(dump_json({"written": written}))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_instance_args(p, coarse=True, fmt=("json", "csv")):
    p.add_argument("--gallery", help="d7 | d7plus | lap1d:N | lap2d:NX,NY | random:N,NS,NC")
    p.add_argument("--a", help="Matrix Market file with A")
    p.add_argument("--s", help="Matrix Market file with S")
    p.add_argument("--p", help="Matrix Market file with P")
    p.add_argument("--smoother", default="jacobi", help="exact-as | jacobi | gs | sgs | custom:PATH")
    if coarse:
        p.add_argument("--bc", help="Matrix Market file with an SPD coarse solver B_c")
        p.add_argument("--coarse", default="exact", help="exact | file:PATH | scaled:C | jacobi")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=fmt, default=fmt[0])


def build_parser():
    parser = argparse.ArgumentParser(prog="tlhb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("analyze", help="convergence analysis of one instance")
    _add_instance_args(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("solve", help="run TLHB sweeps and record the history")
    _add_instance_args(p)
    p.add_argument("--rhs", default="random", help="random | zero | ones | PATH")
    p.add_argument("--start", choices=("zero", "random", "worst"), default="zero")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-sweeps", type=int, default=200)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("optimal-p", help="interpolation minimizing the exact convergence factor")
    _add_instance_args(p, coarse=False)
    p.add_argument("--nc", type=int, help="number of coarse columns (default n - n_s)")
    p.set_defaults(func=cmd_optimal_p)

    p = sub.add_parser("verify", help="seeded property suites")
    p.add_argument("suite", nargs="?", default="all", choices=verify.SUITES + ("all",))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--out", help="directory for the report and failure dumps")
    p.add_argument("--inject", choices=verify.FAULTS, help="deliberately break the build (self-test)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="export a gallery instance as Matrix Market files")
    _add_instance_args(p, coarse=False, fmt=("array", "coordinate"))
    p.set_defaults(func=cmd_gen)
    return parser


def _configure_logging():
    level = os.environ.get("TLHB_LOG", "WARNING").upper()
    level = int(level) if level.isdigit() else getattr(logging, level, logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TlhbError, FileNotFoundError) as exc:
        name = exc.name if isinstance(exc, TlhbError) else "FileNotFound"
        sys.stderr.write(dump_json({"error": name, "message": str(exc)}))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
