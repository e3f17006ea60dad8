import sys

import numpy as np
import pytest
import scipy.linalg as sla

from tlhb import build_smoother, gallery


@pytest.fixture
def d7():
    return gallery("d7")


@pytest.fixture
def d7plus():
    return gallery("d7plus")


@pytest.fixture
def lap2d():
    """Square hierarchical instance with 0 < gamma < 1 and full-rank coupling."""
    return gallery("lap2d:5,5")


@pytest.fixture
def jacobi():
    return lambda dec: build_smoother(dec.A, dec.S, "jacobi")


def explicit_iteration_matrix(dec, M_s, B_c=None):
    """Product of the three factors with explicit inverses (test oracle)."""
    A, S, P = dec.A, dec.S, dec.P
    I = np.eye(dec.n)
    B_c = P.T @ A @ P if B_c is None else B_c
    Minv = np.linalg.inv(M_s)
    return ((I - S @ Minv.T @ S.T @ A) @ (I - P @ np.linalg.inv(B_c) @ P.T @ A)
            @ (I - S @ Minv @ S.T @ A))


def oracle_a_norm(E, A):
    """sqrt(lambda_max(E^T A E, A)) from the generalized symmetric eigenproblem."""
    return float(np.sqrt(max(sla.eigh(E.T @ A @ E, A, eigvals_only=True)[-1], 0.0)))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, detail = results[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title} ({detail})")
