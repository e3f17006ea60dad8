"""Seeded property suites over random instances.

Each suite draws ``count`` instances from deterministic seeds, checks one
family of identities or bounds, and returns a :class:`SuiteResult` holding
pass/fail counts, the worst residual per check and the first failing
instance.  ``inject_fault`` deliberately breaks the implementation so the
harness can demonstrate that it is not vacuous.
"""
from contextlib import ExitStack, contextmanager
from dataclasses import dataclass, field
import logging
import os
from unittest import mock

import numpy as np
import scipy.linalg as sla

from . import analysis, operators
from .errors import NotConvergent, TlhbError
from .mmio import write_matrix
from .operators import CoarseSolver, build_smoother, galerkin_coarse
from .problems import (TwoLevelDecomposition, classical_hb_splitting, classical_hb_splitting_2d,
                       laplacian_1d, laplacian_2d, overlapping_splitting, random_spd, rng,
                       square_splitting)
from .spectral import numerical_rank, spd_sqrt, spd_sqrt_inv, sym_eigenvalues, symmetrize
from .twolevel import (TlhbOperator, a_norm, build_iteration_matrix,
                       hierarchical_preconditioner_matrix, norm_from_preconditioner,
                       preconditioner_matrix, tlhb_sweep)

log = logging.getLogger(__name__)

FAMILIES = ("lap1d", "lap2d", "random")
SMOOTHERS = ("jacobi", "gs", "sgs", "exact-as")
SPLITS = ("square", "overlap")
SUITES = ("identity", "spectrum", "optimal", "monotonicity", "bounds", "energy-split", "preconditioner")
FAULTS = ("mtilde-sign", "sigma-perturb")

TOL = {
    "identity": 1e-10,
    "spectrum": 1e-8,
    "nu_in_unit_interval": 1e-8,
    "optimal": 1e-10,
    "optimal_attained": 1e-10,
    "optimal_lower_bound": 1e-10,
    "optimal_exact_as_zero": 1e-10,
    "monotonicity": 1e-12,
    "range_invariance": 1e-10,
    "energy-split": 1e-10,
    "sum_relation": 1e-12,
    "bounds": 1e-10,
    "collapse": 1e-10,
    "fvz": 1e-10,
    "sweep": 1e-12,
    "preconditioner": 1e-10,
    "norm_formula": 1e-10,
    "spsd": 1e-10,
}
MIN_PER_CELL = 10


@dataclass
class Instance:
    label: str
    seed: int
    dec: TwoLevelDecomposition
    smoother: object
    B_c: np.ndarray = None

    def dump(self, directory):
        os.makedirs(directory, exist_ok=True)
        mats = {"A": self.dec.A, "S": self.dec.S, "P": self.dec.P, "M_s": self.smoother.M_s}
        if self.B_c is not None:
            mats["B_c"] = self.B_c
        for name, M in mats.items():
            write_matrix(os.path.join(directory, f"{name}.mtx"), M,
                         comment=f"{self.label} seed={self.seed}")
        with open(os.path.join(directory, "instance.txt"), "w") as fh:
            fh.write(f"label={self.label}\nseed={self.seed}\nsmoother={self.smoother.kind.value}\n")


@dataclass
class SuiteResult:
    suite: str
    passed: int = 0
    failed: int = 0
    worst: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    cells: dict = field(default_factory=dict)
    first_failure: Instance = None
    first_failure_index: int = None
    first_failure_reason: str = ""
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        return self.failed == 0 and self.passed > 0

    def record(self, name, value, tol):
        value = float(value)
        self.tolerances[name] = tol
        if not np.isfinite(value) or value > self.worst.get(name, -np.inf):
            self.worst[name] = value
        return bool(value <= tol)

    def to_dict(self):
        d = {
            "suite": self.suite,
            "passed": self.passed,
            "failed": self.failed,
            "ok": self.ok,
            "worst": dict(sorted(self.worst.items())),
            "tolerances": dict(sorted(self.tolerances.items())),
        }
        if self.cells:
            d["cells"] = dict(sorted(self.cells.items()))
        if self.first_failure is not None:
            d["first_failure"] = {"index": self.first_failure_index, "seed": self.first_failure.seed,
                                  "label": self.first_failure.label,
                                  "reason": self.first_failure_reason}
        if self.notes:
            d["notes"] = self.notes
        return d


# ---------------------------------------------------------------- instances

def _splitting(family, split, seed, g):
    """(A, S, P, tag) for one family/splitting combination."""
    if family == "lap1d":
        n = int(g.choice([5, 7, 9, 11, 15, 21, 31]))
        A = laplacian_1d(n)
    elif family == "lap2d":
        nx, ny = (int(v) for v in g.choice([3, 5, 7], size=2))
        n = nx * ny
        A = laplacian_2d(nx, ny)
    else:
        n = int(g.integers(4, 41))
        A = None
    if split == "square":
        if family == "lap1d" and g.random() < 0.5:
            hs = classical_hb_splitting(n)
            return hs.permute(A), hs.S, hs.P, f"lap1d:{n}/classical"
        if family == "lap2d" and g.random() < 0.5:
            hs = classical_hb_splitting_2d(nx, ny)
            return hs.permute(A), hs.S, hs.P, f"lap2d:{nx},{ny}/classical"
        n_s = int(g.integers(max(1, n // 3), n))
        S, P = square_splitting(n, n_s, seed)
        tag = f"square n_s={n_s}"
    else:
        n_s = int(g.integers(max(2, n // 3), n))
        n_c = int(g.integers(n - n_s + 1, n)) if n - n_s + 1 < n else None
        if n_c is None:
            n_s -= 1
            n_c = n - n_s + 1
        S, P = overlapping_splitting(n, n_s, n_c, seed)
        tag = f"overlap n_s={n_s} n_c={n_c}"
    return A, S, P, f"{family}:{n}/{tag}"


def make_instance(seed, family, smoother, split, max_tries=60):
    """Deterministic instance for ``seed``; Jacobi draws are retried until certified."""
    for attempt in range(max_tries):
        g = rng(seed, 100, attempt)
        A, S, P, tag = _splitting(family, split, seed * 1000 + attempt, g)
        if A is None:
            cond = float(np.exp(g.uniform(np.log(2), np.log(8 if smoother == "jacobi" else 1e3))))
            A = random_spd(S.shape[0], seed * 1000 + attempt, cond)
            tag += f" cond={cond:.3g}"
        try:
            sm = build_smoother(A, S, smoother)
        except NotConvergent:
            continue
        dec = TwoLevelDecomposition(A, S, P)
        return Instance(f"{tag} smoother={smoother}", seed, dec, sm)
    raise NotConvergent(f"no certified {smoother} instance for seed {seed}")


def instance_stream(seed, count):
    """Cycle through every (family, smoother, splitting) combination."""
    combos = [(f, m, s) for s in SPLITS for m in SMOOTHERS for f in FAMILIES]
    for i in range(count):
        f, m, s = combos[i % len(combos)]
        yield i, make_instance(seed * 100003 + i, f, m, s)


def random_valid_interpolation(A, S, n_c, g, tries=50):
    n = A.shape[0]
    for _ in range(tries):
        P = g.standard_normal((n, n_c))
        if numerical_rank(P) == n_c and numerical_rank(np.hstack([S, P])) == n:
            return P
    raise RuntimeError("could not draw a valid interpolation")


def coarse_with_spectrum(A_c, lam, g):
    """SPD B_c whose B_c^{-1} A_c has eigenvalues ``lam``."""
    n_c = A_c.shape[0]
    Q = np.linalg.qr(g.standard_normal((n_c, n_c)))[0]
    R = spd_sqrt(A_c)
    return symmetrize(R @ (Q / np.asarray(lam)) @ Q.T @ R)


def a_orthogonalize_column(A, S, P, j=0):
    """Replace column j of P by its A-orthogonal projection away from Range(S)."""
    A_s = S.T @ A @ S
    p = P[:, j].copy()
    for _ in range(2):
        p = p - S @ sla.solve(A_s, S.T @ A @ p, assume_a="pos")
    P = P.copy()
    P[:, j] = p / np.linalg.norm(p)
    return P


# ---------------------------------------------------------------- suites

def _run(result, index, inst, checks):
    """Apply ``checks`` (callable returning [(name, residual)]) and book-keep the outcome."""
    try:
        bad = [name for name, value in checks(inst)
               if not result.record(name, value, TOL.get(name, TOL.get(result.suite)))]
        reason = ", ".join(bad)
    except (TlhbError, np.linalg.LinAlgError) as exc:
        bad, reason = [type(exc).__name__], f"{type(exc).__name__}: {exc}"
    if bad:
        result.failed += 1
        if result.first_failure is None:
            result.first_failure, result.first_failure_index = inst, index
            result.first_failure_reason = reason
    else:
        result.passed += 1


def suite_identity(seed, count):
    res = SuiteResult("identity")

    def checks(inst):
        norm = analysis.norm_etl_exact(inst.dec, inst.smoother)
        sig = analysis.sigma_tl(inst.dec, inst.smoother)
        return [("identity", abs(norm - (1.0 - sig)))]

    for i, inst in instance_stream(seed, count):
        _run(res, i, inst, checks)
    return res


def suite_spectrum(seed, count):
    res = SuiteResult("spectrum")

    def checks(inst):
        structural = analysis.spectrum_etl(inst.dec, inst.smoother).eigenvalues
        direct = analysis.spectrum_etl_direct(inst.dec, inst.smoother).eigenvalues
        nu = analysis.nu_values(inst.dec, inst.smoother)
        nu_range = max(0.0, -nu.min(), nu.max() - 1.0)
        return [("spectrum", np.max(np.abs(structural - direct))),
                ("nu_in_unit_interval", nu_range)]

    for i, inst in instance_stream(seed, count):
        _run(res, i, inst, checks)
    return res


def suite_optimal(seed, count, trials=50):
    res = SuiteResult("optimal")

    def checks(inst):
        A, S, sm = inst.dec.A, inst.dec.S, inst.smoother
        n, n_s = S.shape
        g = rng(inst.seed, 7)
        n_c = int(g.integers(n - n_s, n))
        P_star, bound = analysis.optimal_interpolation(A, S, sm, n_c)
        dec_star = TwoLevelDecomposition(A, S, P_star)
        out = [("optimal_attained", abs(analysis.norm_etl_exact(dec_star, sm) - bound))]
        beaten = 0.0
        for _ in range(trials):
            P = random_valid_interpolation(A, S, n_c, g)
            beaten = max(beaten, bound - analysis.norm_etl_exact(TwoLevelDecomposition(A, S, P), sm))
        out.append(("optimal_lower_bound", beaten))
        if sm.kind is operators.SmootherKind.EXACT_AS:
            out.append(("optimal_exact_as_zero", abs(bound)))
        return out

    for i, inst in instance_stream(seed, count):
        _run(res, i, inst, checks)
    return res


def suite_monotonicity(seed, count):
    res = SuiteResult("monotonicity")

    def checks(inst):
        dec, sm = inst.dec, inst.smoother
        if dec.n_c + 1 >= dec.n:
            # drop a column instead so that the enlarged space stays below n
            dec = dec.with_P(dec.P[:, :-1]) if dec.n_s + dec.n_c - 1 >= dec.n else dec
        if dec.n_c + 1 >= dec.n:
            return []
        g = rng(inst.seed, 8)
        c = g.standard_normal((dec.n, 1))
        P_hat = np.hstack([dec.P, c])
        sigma, sigma_hat = analysis.monotonicity_check(dec, sm, P_hat)
        # well-conditioned change of basis: rotation times a mild scaling
        Q = np.linalg.qr(g.standard_normal((dec.n_c, dec.n_c)))[0]
        Rm = Q * g.uniform(0.5, 2.0, dec.n_c)
        _, sigma_rot = analysis.monotonicity_check(dec, sm, np.hstack([dec.P @ Rm, c]))
        return [("monotonicity", sigma - sigma_hat), ("range_invariance", abs(sigma_rot - sigma_hat))]

    for i, inst in instance_stream(seed, count):
        _run(res, i, inst, checks)
    return res


def energy_split_oracle(dec, smoother):
    """Extreme eigenvalues through the A-symmetrized, projector-sandwiched forms.

    A^{1/2} (I - S M~^{-1} S^T A) X A^{-1/2} = G Q with G = I - A^{1/2} S M~^{-1} S^T A^{1/2}
    and Q an orthogonal projector, so its spectrum is that of Q G Q.
    """
    A, S, P = dec.A, dec.S, dec.P
    R = spd_sqrt(A)
    G = symmetrize(np.eye(dec.n) - R @ S @ sla.solve(smoother.M_tilde, S.T, assume_a="pos") @ R)
    Y = R @ P
    Q = symmetrize(Y @ sla.solve(Y.T @ Y, Y.T, assume_a="pos"))
    Qc = np.eye(dec.n) - Q
    comp = sym_eigenvalues(symmetrize(Qc @ G @ Qc))
    proj = sym_eigenvalues(symmetrize(Q @ G @ Q))
    return comp.min, comp.max, proj.min, proj.max


def suite_energy_split(seed, count):
    res = SuiteResult("energy-split")

    def checks(inst):
        dec, sm = inst.dec, inst.smoother
        q = analysis.energy_split_eigenvalues(dec, sm)
        o = energy_split_oracle(dec, sm)
        sig = analysis.sigma_tl(dec, sm)
        expected_proj = 1.0 - q.theta if q.theta is not None else 1.0
        out = [
            ("energy-split", abs(q.lmin_complement)),
            ("energy-split", abs(q.lmax_complement - (1.0 - sig))),
            ("energy-split", abs(q.lmin_proj)),
            ("energy-split", abs(q.lmax_proj - expected_proj)),
            ("energy-split", abs(q.lmin_complement - o[0])),
            ("energy-split", abs(q.lmax_complement - o[1])),
            ("energy-split", abs(q.lmin_proj - o[2])),
            ("energy-split", abs(q.lmax_proj - o[3])),
        ]
        if q.theta is not None:
            out.append(("sum_relation", sig - (1.0 - q.theta)))
        return out

    cases = {"full-rank": 0, "rank-deficient": 0}
    for i, inst in instance_stream(seed, count):
        if i % 3 == 2:
            # force r < n_c with a column A-orthogonal to Range(S)
            P = a_orthogonalize_column(inst.dec.A, inst.dec.S, inst.dec.P)
            inst = Instance(inst.label + " +A-orth column", inst.seed, inst.dec.with_P(P), inst.smoother)
        full = numerical_rank(inst.dec.S.T @ inst.dec.A @ inst.dec.P) == inst.dec.n_c
        cases["full-rank" if full else "rank-deficient"] += 1
        _run(res, i, inst, checks)
    res.cells = cases
    if count >= 3 and min(cases.values()) == 0:
        res.failed += 1
        res.notes.append("rank case not reached: " + ", ".join(k for k, v in cases.items() if v == 0))
    return res


def _bounds_instance(i, seed):
    """Instance and B_c for cell ``i % 6`` of the rank x regime grid."""
    full = (i % 6) < 3
    regime = (analysis.Regime.BETA_LE_1, analysis.Regime.STRADDLE, analysis.Regime.ALPHA_GT_1)[i % 3]
    s = seed * 100003 + i
    g = rng(s, 11)
    smoother = SMOOTHERS[(i // 6) % len(SMOOTHERS)]
    family = FAMILIES[(i // 24) % len(FAMILIES)]
    for attempt in range(40):
        split = "square" if (full and g.random() < 0.5) else "overlap"
        inst = make_instance(s + 7919 * attempt, family, smoother, split)
        dec = inst.dec
        if dec.n_c < 2:
            continue
        if not full:
            if g.random() < 0.5 or dec.n_c <= dec.n_s:
                dec = dec.with_P(a_orthogonalize_column(dec.A, dec.S, dec.P))
        rank_full = numerical_rank(dec.S.T @ dec.A @ dec.P) == dec.n_c
        if rank_full == full:
            break
    else:
        raise RuntimeError(f"could not build a bounds instance for cell {i % 6}")
    A_c = galerkin_coarse(dec)
    if g.random() < 0.4 and regime is not analysis.Regime.STRADDLE:
        c = float(g.uniform(1.1, 3.0)) if regime is analysis.Regime.BETA_LE_1 else float(g.uniform(0.3, 0.9))
        B_c = c * A_c
    else:
        lo, hi = {analysis.Regime.BETA_LE_1: (0.2, 1.0),
                  analysis.Regime.STRADDLE: (0.4, 2.5),
                  analysis.Regime.ALPHA_GT_1: (1.05, 3.0)}[regime]
        lam = np.exp(g.uniform(np.log(lo), np.log(hi), size=dec.n_c))
        if regime is analysis.Regime.STRADDLE:
            lam[0], lam[-1] = float(g.uniform(0.4, 0.95)), float(g.uniform(1.05, 2.5))
        B_c = coarse_with_spectrum(A_c, lam, g)
    return Instance(inst.label + f" cell={i % 6}", s, dec, inst.smoother, B_c)


def suite_bounds(seed, count, min_per_cell=1):
    res = SuiteResult("bounds")
    res.cells = {f"{r.value}/{g.value}": 0 for r in analysis.RankCase for g in analysis.Regime}

    def checks(inst):
        dec, sm = inst.dec, inst.smoother
        b = analysis.inexact_bounds(dec, sm, inst.B_c, check=False)
        res.cells[f"{b.rank_case.value}/{b.regime.value}"] += 1
        out = [("bounds", b.lower - b.observed), ("bounds", b.observed - b.upper)]
        fvz = analysis.fvz_inexact_bound(dec, sm, inst.B_c)
        if fvz is not None:
            out.append(("fvz", b.observed - fvz))
        exact = analysis.inexact_bounds(dec, sm, galerkin_coarse(dec), check=False)
        target = 1.0 - exact.sigma_tl
        out += [("collapse", abs(exact.lower - target)), ("collapse", abs(exact.upper - target)),
                ("collapse", abs(exact.observed - target))]
        return out

    for i in range(count):
        _run(res, i, _bounds_instance(i, seed), checks)
    missing = [k for k, v in res.cells.items() if v < min_per_cell]
    if missing:
        res.failed += 1
        res.notes.append("cell not reached: " + ", ".join(missing))
    return res


def suite_preconditioner(seed, count, pairs=20):
    res = SuiteResult("preconditioner")

    def checks(inst):
        dec, sm = inst.dec, inst.smoother
        g = rng(inst.seed, 12)
        out = []
        for coarse in (CoarseSolver(), CoarseSolver.approximate(
                dec, coarse_with_spectrum(galerkin_coarse(dec),
                                          np.exp(g.uniform(-1, 1, dec.n_c)), g))):
            op = TlhbOperator(dec, sm, coarse)
            E = build_iteration_matrix(op)
            sweep_err = 0.0
            for _ in range(pairs):
                u_star, u0 = g.standard_normal(dec.n), g.standard_normal(dec.n)
                u = tlhb_sweep(op, u0, dec.A @ u_star)
                scale = 1.0 + np.linalg.norm(u_star) + np.linalg.norm(u0)
                sweep_err = max(sweep_err, np.linalg.norm((u_star - u) - E @ (u_star - u0)) / scale)
            out.append(("sweep", sweep_err))
            out.append(("preconditioner",
                        np.max(np.abs(preconditioner_matrix(op) - hierarchical_preconditioner_matrix(op)))))
            out.append(("norm_formula", abs(norm_from_preconditioner(op) - a_norm(E, dec.A))))
            H = spd_sqrt(dec.A) @ E @ spd_sqrt_inv(dec.A)
            out.append(("spsd", np.max(np.abs(H - H.T))))
            if coarse.exact:
                out.append(("spsd", -sym_eigenvalues(symmetrize(H)).min))
        return out

    for i, inst in instance_stream(seed, count):
        _run(res, i, inst, checks)
    return res


SUITE_FUNCS = {
    "identity": suite_identity,
    "spectrum": suite_spectrum,
    "optimal": suite_optimal,
    "monotonicity": suite_monotonicity,
    "bounds": suite_bounds,
    "energy-split": suite_energy_split,
    "preconditioner": suite_preconditioner,
}


@contextmanager
def inject_fault(fault):
    """Break the implementation on purpose (for harness self-tests)."""
    with ExitStack() as stack:
        if fault == "mtilde-sign":
            def wrong_tilde(M_s, A_s):
                cho = sla.cho_factor(M_s + M_s.T + A_s)
                return symmetrize(M_s.T @ sla.cho_solve(cho, M_s))
            stack.enter_context(mock.patch.object(operators, "tilde_smoother", wrong_tilde))
        elif fault == "sigma-perturb":
            real = analysis.sigma_tl
            stack.enter_context(mock.patch.object(
                analysis, "sigma_tl", lambda dec, sm: real(dec, sm) * (1.0 + 1e-6)))
        elif fault is not None:
            raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
        yield


def run_suite(name, seed=0, count=20, fault=None):
    func = SUITE_FUNCS[name]
    with inject_fault(fault):
        if name == "bounds":
            return func(seed, count, min_per_cell=min(MIN_PER_CELL, max(1, count // 6)))
        return func(seed, count)


def run(suites, seed=0, count=20, fault=None):
    if suites == "all" or suites == ["all"]:
        suites = list(SUITES)
    elif isinstance(suites, str):
        suites = [suites]
    return [run_suite(s, seed, count, fault) for s in suites]
