"""Smoothers, Galerkin coarse matrices and the A-orthogonal coarse projection."""
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .errors import InvalidSize, NotConvergent
from .spectral import require_spd, spd_sqrt_inv, sym_eigenvalues, symmetrize

CERTIFICATE_TOL = 1e-12


class SmootherKind(str, Enum):
    EXACT_AS = "exact-as"
    JACOBI = "jacobi"
    GAUSS_SEIDEL = "gs"
    SYM_GAUSS_SEIDEL = "sgs"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class Smoother:
    kind: SmootherKind
    M_s: np.ndarray
    A_s: np.ndarray
    M_bar: np.ndarray
    M_tilde: np.ndarray
    certificate: float  # lambda_min(M_s + M_s^T - A_s)

    @property
    def n_s(self):
        return self.A_s.shape[0]


def _smoother_matrix(A_s, kind, M_s):
    if kind is SmootherKind.EXACT_AS:
        return A_s.copy()
    if kind is SmootherKind.JACOBI:
        return np.diag(np.diag(A_s))
    if kind is SmootherKind.GAUSS_SEIDEL:
        return np.tril(A_s)
    if kind is SmootherKind.SYM_GAUSS_SEIDEL:
        # (D + L) D^{-1} (D + L)^T
        L = np.tril(A_s)
        return (L / np.diag(A_s)) @ L.T
    if M_s is None:
        raise ValueError("custom smoother needs an explicit M_s")
    M_s = np.asarray(M_s, dtype=float)
    if M_s.shape != A_s.shape:
        raise InvalidSize(f"custom M_s has shape {M_s.shape}, expected {A_s.shape}")
    if np.linalg.matrix_rank(M_s) < M_s.shape[0]:
        raise InvalidSize("custom M_s is singular")
    return M_s


def bar_smoother(M_s, A_s):
    """M_s (M_s + M_s^T - A_s)^{-1} M_s^T."""
    cho = sla.cho_factor(M_s + M_s.T - A_s)
    return symmetrize(M_s @ sla.cho_solve(cho, M_s.T))


def tilde_smoother(M_s, A_s):
    """M_s^T (M_s + M_s^T - A_s)^{-1} M_s."""
    cho = sla.cho_factor(M_s + M_s.T - A_s)
    return symmetrize(M_s.T @ sla.cho_solve(cho, M_s))


def build_smoother(A, S, kind="jacobi", M_s=None):
    """Local smoother on Range(S) together with its symmetrized forms.

    Raises :class:`NotConvergent` unless M_s + M_s^T - A_s is SPD with
    lambda_min above 1e-12 * ||A_s||_2.
    """
    kind = SmootherKind(kind)
    A_s = symmetrize(S.T @ A @ S)
    M = _smoother_matrix(A_s, kind, M_s)
    spec = sym_eigenvalues(symmetrize(M + M.T - A_s))
    norm_as = sym_eigenvalues(A_s).max
    if not spec.min > CERTIFICATE_TOL * norm_as:
        raise NotConvergent(
            f"M_s + M_s^T - A_s is not SPD (lambda_min = {spec.min:.3e}) for smoother {kind.value!r}")
    return Smoother(kind, M, A_s, bar_smoother(M, A_s), tilde_smoother(M, A_s), spec.min)


def galerkin_coarse(dec):
    """A_c = P^T A P."""
    return symmetrize(dec.P.T @ dec.A @ dec.P)


def projection_pi_a(dec):
    """Pi_A = P A_c^{-1} P^T A."""
    cho = sla.cho_factor(galerkin_coarse(dec))
    return dec.P @ sla.cho_solve(cho, dec.P.T @ dec.A)


def coarse_spectrum_bounds(dec, B_c):
    """(alpha, beta): extreme eigenvalues of B_c^{-1} A_c via B_c^{-1/2} A_c B_c^{-1/2}."""
    B_c = require_spd(B_c, "B_c")
    if B_c.shape != (dec.n_c, dec.n_c):
        raise InvalidSize(f"B_c has shape {B_c.shape}, expected {(dec.n_c, dec.n_c)}")
    X = spd_sqrt_inv(B_c)
    ev = sym_eigenvalues(symmetrize(X @ galerkin_coarse(dec) @ X)).eigenvalues
    return float(ev[0]), float(ev[-1])


@dataclass(frozen=True, eq=False)
class CoarseSolver:
    """Exact (B_c is None, alpha = beta = 1) or an SPD approximation B_c."""
    B_c: np.ndarray = None
    alpha: float = 1.0
    beta: float = 1.0

    @property
    def exact(self):
        return self.B_c is None

    @property
    def variant(self):
        return "exact" if self.exact else "approximate"

    @classmethod
    def exact_solver(cls):
        return cls()

    @classmethod
    def approximate(cls, dec, B_c):
        alpha, beta = coarse_spectrum_bounds(dec, B_c)
        return cls(np.array(B_c, dtype=float), alpha, beta)

    def matrix(self, dec):
        return galerkin_coarse(dec) if self.exact else self.B_c
