import numpy as np
import pytest

from tlhb.errors import DegenerateSpectrum, NonSymmetric, NotSpd
from tlhb.spectral import (Spectrum, lambda_min_plus, numerical_rank, psd_sqrt, require_spd,
                           spd_sqrt, spd_sqrt_inv, sym_eigenvalues)


def test_eigenvalues_identity_and_diagonal():
    assert np.allclose(sym_eigenvalues(np.eye(3)).eigenvalues, [1, 1, 1])
    assert np.allclose(sym_eigenvalues(np.diag([2.0, -1.0, 0.0])).eigenvalues, [-1, 0, 2])


def test_eigenvalues_tridiagonal_closed_form():
    T = np.array([[2.0, -1, 0], [-1, 2, -1], [0, -1, 2]])
    expected = [2 - np.sqrt(2), 2, 2 + np.sqrt(2)]
    assert np.allclose(sym_eigenvalues(T).eigenvalues, expected, atol=1e-14)


def test_nonsymmetric_rejected():
    with pytest.raises(NonSymmetric):
        sym_eigenvalues(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_spectrum_must_be_sorted():
    with pytest.raises(ValueError):
        Spectrum(np.array([2.0, 1.0]))


@pytest.mark.parametrize("ev, k, expected", [([0, 0, 0.3, 1], 2, 0.3), ([0, 1, 1, 1], 1, 1.0)])
def test_lambda_min_plus_definition(ev, k, expected):
    assert lambda_min_plus(Spectrum(np.array(ev, float)), k) == expected


def test_lambda_min_plus_unseparated_zeros():
    with pytest.raises(DegenerateSpectrum):
        lambda_min_plus(Spectrum(np.array([1e-4, 1e-3, 1.0])), 1)
    with pytest.raises(DegenerateSpectrum):
        lambda_min_plus(Spectrum(np.array([0.0, 1.0])), 0)


def test_numerical_rank():
    assert numerical_rank(np.zeros((2, 3))) == 0
    assert numerical_rank(np.eye(4)) == 4
    assert numerical_rank(np.outer([1, 2, 3], [1, 1])) == 1


def test_inverse_square_root():
    assert np.allclose(spd_sqrt_inv(np.eye(3)), np.eye(3))
    assert np.allclose(spd_sqrt_inv(np.diag([4.0, 9.0])), np.diag([0.5, 1 / 3]))


def test_inverse_square_root_on_d7_block(d7):
    A_s = d7.S.T @ d7.A @ d7.S
    X = spd_sqrt_inv(A_s)
    assert np.linalg.norm(X @ A_s @ X - np.eye(4), 2) <= 1e-10
    R = spd_sqrt(A_s)
    assert np.allclose(R @ R, A_s)


def test_require_spd():
    with pytest.raises(NotSpd):
        require_spd(np.diag([1.0, -1.0]))
    with pytest.raises(NotSpd):
        require_spd(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_psd_sqrt_clips_roundoff_only():
    M = np.diag([1.0, 0.0, -1e-14])
    R = psd_sqrt(M)
    assert np.allclose(R @ R, np.diag([1.0, 0.0, 0.0]))
    with pytest.raises(NotSpd):
        psd_sqrt(np.diag([1.0, -1e-3]))
