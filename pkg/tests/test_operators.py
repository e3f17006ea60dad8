import numpy as np
import pytest

from tlhb import (CoarseSolver, TwoLevelDecomposition, build_smoother, coarse_spectrum_bounds,
                  galerkin_coarse, projection_pi_a)
from tlhb.errors import InvalidSize, NotConvergent
from tlhb.spectral import sym_eigenvalues


@pytest.mark.parametrize("kind", ["exact-as", "jacobi", "gs", "sgs"])
def test_smoother_forms(lap2d, kind):
    sm = build_smoother(lap2d.A, lap2d.S, kind)
    A_s = lap2d.S.T @ lap2d.A @ lap2d.S
    M = sm.M_s
    K = np.linalg.inv(M + M.T - A_s)
    assert np.allclose(sm.M_bar, M @ K @ M.T)
    assert np.allclose(sm.M_tilde, M.T @ K @ M)
    assert sm.certificate > 0


def test_exact_as_symmetrizations_equal_as(lap2d):
    sm = build_smoother(lap2d.A, lap2d.S, "exact-as")
    assert np.allclose(sm.M_bar, sm.A_s) and np.allclose(sm.M_tilde, sm.A_s)


def test_gauss_seidel_variants(lap2d):
    A_s = lap2d.S.T @ lap2d.A @ lap2d.S
    assert np.array_equal(build_smoother(lap2d.A, lap2d.S, "gs").M_s, np.tril(A_s))
    D = np.diag(np.diag(A_s))
    L = np.tril(A_s)
    assert np.allclose(build_smoother(lap2d.A, lap2d.S, "sgs").M_s, L @ np.linalg.inv(D) @ L.T)


def test_d7_jacobi(d7):
    sm = build_smoother(d7.A, d7.S, "jacobi")
    assert np.array_equal(sm.M_s, 2 * np.eye(4))
    assert sym_eigenvalues(4 * np.eye(4) - sm.A_s).min > 0


def test_d7_underrelaxed_custom_not_convergent(d7):
    A_s = d7.S.T @ d7.A @ d7.S
    with pytest.raises(NotConvergent):
        build_smoother(d7.A, d7.S, "custom", M_s=0.4 * np.diag(np.diag(A_s)))


def test_custom_smoother_validation(d7):
    with pytest.raises(ValueError):
        build_smoother(d7.A, d7.S, "custom")
    with pytest.raises(InvalidSize):
        build_smoother(d7.A, d7.S, "custom", M_s=np.eye(3))


def test_galerkin_coarse_simple():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    dec = TwoLevelDecomposition(A, np.eye(2)[:, 1:], np.eye(2)[:, :1])
    assert np.array_equal(galerkin_coarse(dec), [[3.0]])
    Q = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 3)))[0]
    dec = TwoLevelDecomposition(np.eye(5), np.eye(5)[:, :3], Q)
    assert np.allclose(galerkin_coarse(dec), np.eye(3))


def test_d7_coarse_is_scaled_laplacian(d7):
    # hat-function interpolation of the 1-D Laplacian halves the coarse stencil
    expected = 0.5 * np.array([[2.0, -1, 0], [-1, 2, -1], [0, -1, 2]])
    assert np.allclose(galerkin_coarse(d7), expected, atol=1e-15)


def test_projection(d7, d7plus):
    for dec in (d7, d7plus):
        Pi = projection_pi_a(dec)
        assert np.linalg.norm(Pi @ Pi - Pi, 2) <= 1e-10
        assert np.allclose(Pi @ dec.P, dec.P, atol=1e-10)
    full = TwoLevelDecomposition(d7.A, d7.S, np.eye(7) + 0.1, allow_full_coarse=True)
    assert np.allclose(projection_pi_a(full), np.eye(7))


def test_coarse_spectrum_bounds(d7):
    A_c = galerkin_coarse(d7)
    assert np.allclose(coarse_spectrum_bounds(d7, A_c), (1, 1))
    assert np.allclose(coarse_spectrum_bounds(d7, 2 * A_c), (0.5, 0.5))
    # diag(A_c) = I here, so alpha/beta are the extreme eigenvalues 1 -+ cos(pi/4)
    alpha, beta = coarse_spectrum_bounds(d7, np.diag(np.diag(A_c)))
    assert np.isclose(alpha, 1 - np.sqrt(0.5)) and np.isclose(beta, 1 + np.sqrt(0.5))
    with pytest.raises(InvalidSize):
        coarse_spectrum_bounds(d7, np.eye(2))


def test_coarse_solver_variants(d7):
    assert CoarseSolver().exact and CoarseSolver.exact_solver().variant == "exact"
    cs = CoarseSolver.approximate(d7, 2 * galerkin_coarse(d7))
    assert cs.variant == "approximate" and np.isclose(cs.alpha, 0.5)
