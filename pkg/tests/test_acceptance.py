"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is printed at the end."""
from contextlib import contextmanager
import json

import numpy as np
import pytest

from tlhb import (TwoLevelDecomposition, analysis, build_smoother, gallery, laplacian_1d,
                  random_spd, solve, square_splitting)
from tlhb.cli import main
from tlhb.operators import galerkin_coarse
from tlhb.problems import rng
from tlhb.twolevel import TlhbOperator
from tlhb import verify

SEED = 7
RESULTS = {}


@contextmanager
def criterion(number, title):
    detail = {"text": ""}
    try:
        yield detail
    except BaseException:
        RESULTS[number] = (title, False, detail["text"] or "see traceback")
        raise
    RESULTS[number] = (title, True, detail["text"])


def _check_suite(result, detail):
    worst = ", ".join(f"{k}={v:.2e}" for k, v in sorted(result.worst.items()))
    detail["text"] = f"{result.passed} passed, {result.failed} failed; worst {worst}"
    assert result.ok, result.to_dict()


def test_criterion_01_identity():
    with criterion(1, "exact-solver norm identity, 100 instances") as d:
        r = verify.run_suite("identity", seed=SEED, count=100)
        _check_suite(r, d)
        assert r.passed == 100 and r.worst["identity"] <= 1e-10


def test_criterion_02_spectrum():
    with criterion(2, "iteration spectrum structure, 50 instances") as d:
        r = verify.run_suite("spectrum", seed=SEED, count=50)
        _check_suite(r, d)
        assert r.passed == 50 and r.worst["spectrum"] <= 1e-8


def _square_exact_smoother_instances():
    yield gallery("lap2d:5,5")
    yield gallery("lap2d:7,5")
    yield gallery("lap1d:15")
    for seed in range(12):
        g = rng(SEED, seed)
        n = int(g.integers(4, 30))
        n_s = int(g.integers(1, n))
        S, P = square_splitting(n, n_s, seed)
        A = random_spd(n, seed, float(g.uniform(2, 1e3))) if seed % 2 else laplacian_1d(n)
        yield TwoLevelDecomposition(A, S, P)


def test_criterion_03_gamma_squared():
    with criterion(3, "gamma^2 case and gamma = 1 for overlap") as d:
        worst = 0.0
        gammas = []
        for dec in _square_exact_smoother_instances():
            sm = build_smoother(dec.A, dec.S, "exact-as")
            g = analysis.cbs_constant(dec)
            gammas.append(g)
            worst = max(worst, abs(analysis.norm_etl_exact(dec, sm) - g * g))
        g_plus = analysis.cbs_constant(gallery("d7plus"))
        d["text"] = f"max |norm - gamma^2| = {worst:.2e} over {len(gammas)}; |gamma(D7+) - 1| = {abs(g_plus - 1):.1e}"
        assert worst <= 1e-10
        assert any(0.05 < g < 0.99 for g in gammas)
        assert abs(g_plus - 1) <= 1e-10


def test_criterion_04_optimal_interpolation():
    with criterion(4, "optimal interpolation attains and bounds") as d:
        r = verify.run_suite("optimal", seed=SEED, count=24)
        _check_suite(r, d)
        assert r.worst["optimal_exact_as_zero"] <= 1e-10


def test_criterion_05_monotonicity():
    with criterion(5, "nested coarse spaces, 50 pairs") as d:
        r = verify.run_suite("monotonicity", seed=SEED, count=50)
        _check_suite(r, d)
        assert r.worst["monotonicity"] <= 1e-12


def test_criterion_06_energy_split():
    with criterion(6, "complement/projection eigenvalue identities") as d:
        r = verify.run_suite("energy-split", seed=SEED, count=30)
        _check_suite(r, d)
        assert r.cells["rank-deficient"] > 0 and r.cells["full-rank"] > 0
        assert r.worst["sum_relation"] <= 1e-12


def test_criterion_07_two_sided_bounds():
    with criterion(7, "two-sided inexact bounds, 6 cells x >= 10") as d:
        r = verify.run_suite("bounds", seed=SEED, count=72)
        _check_suite(r, d)
        d["text"] += "; cells " + ", ".join(f"{k}:{v}" for k, v in sorted(r.cells.items()))
        assert min(r.cells.values()) >= 10
        assert r.worst["collapse"] <= 1e-10


def test_criterion_08_ktl_and_fvz(capsys):
    with criterion(8, "K_TL reciprocity and FVZ bounds") as d:
        worst_recip, checked, fvz_checked = 0.0, 0, 0
        for _, inst in verify.instance_stream(SEED, 48):
            dec, sm = inst.dec, inst.smoother
            if not dec.is_square:
                continue
            if analysis.cbs_constant(dec) < 1 - 1e-12:
                k = analysis.k_tl(dec, sm)
                worst_recip = max(worst_recip, abs(k * analysis.sigma_tl(dec, sm) - 1))
                assert k <= analysis.k_tl_upper_bound(dec, sm) * (1 + 1e-10)
                checked += 1
            for c in (1.0, 1.3, 2.5):
                B_c = c * galerkin_coarse(dec)
                fvz = analysis.fvz_inexact_bound(dec, sm, B_c)
                if fvz is not None:
                    observed = analysis.inexact_bounds(dec, sm, B_c).observed
                    assert fvz >= observed - 1e-10
                    fvz_checked += 1
        dp = gallery("d7plus")
        sm = build_smoother(dp.A, dp.S, "jacobi")
        assert analysis.fvz_inexact_bound(dp, sm, galerkin_coarse(dp)) is None
        assert analysis.k_tl_upper_bound(dp, sm) == np.inf
        assert main(["analyze", "--gallery", "d7plus"]) == 0
        assert json.loads(capsys.readouterr().out)["fvz_bound"]["value"] is None
        d["text"] = f"max |K*sigma - 1| = {worst_recip:.2e} on {checked}; FVZ checked {fvz_checked}; vacuous at gamma=1"
        assert worst_recip <= 1e-10 and checked >= 10 and fvz_checked >= 10


def test_criterion_09_operator_consistency():
    with criterion(9, "sweep/matrix/preconditioner consistency and solve rate") as d:
        r = verify.run_suite("preconditioner", seed=SEED, count=24)
        _check_suite(r, d)
        for name in ("d7", "lap2d:5,5"):
            dec = gallery(name)
            sm = build_smoother(dec.A, dec.S, "jacobi")
            f = rng(SEED, 99).standard_normal(dec.n)
            _, hist = solve(TlhbOperator(dec, sm), f, tol=1e-12)
            rate, norm = hist.asymptotic_rate(), analysis.norm_etl_exact(dec, sm)
            d["text"] += f"; {name} rate {rate:.3g} vs norm {norm:.3g}"
            assert rate <= norm + 0.01


def test_criterion_10_mutation():
    with criterion(10, "injected M_tilde sign error is detected") as d:
        r = verify.run_suite("identity", seed=SEED, count=10, fault="mtilde-sign")
        d["text"] = f"first failure at instance {r.first_failure_index}, {r.failed}/10 failed"
        assert r.failed > 0 and r.first_failure_index < 10
        assert verify.run_suite("identity", seed=SEED, count=10).ok
