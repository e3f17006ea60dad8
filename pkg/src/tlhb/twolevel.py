"""The two-level hierarchical basis iteration and its matrix forms."""
from dataclasses import dataclass, field
from functools import cached_property
import logging

import numpy as np
import scipy.linalg as sla

from .errors import NotConverged
from .operators import CoarseSolver
from .spectral import spd_sqrt, spd_sqrt_inv, sym_eigh, sym_eigenvalues, symmetrize

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TlhbOperator:
    dec: object
    smoother: object
    coarse: CoarseSolver = field(default_factory=CoarseSolver)

    @cached_property
    def _ms_lu(self):
        return sla.lu_factor(self.smoother.M_s)

    @cached_property
    def _bc_cho(self):
        return sla.cho_factor(self.coarse.matrix(self.dec))

    @cached_property
    def _mbar_cho(self):
        return sla.cho_factor(self.smoother.M_bar)

    def smooth(self, v, transpose=False):
        """S M_s^{-1} S^T v (or with M_s^{-T})."""
        return self.dec.S @ sla.lu_solve(self._ms_lu, self.dec.S.T @ v, trans=int(transpose))

    def coarse_correct(self, v):
        """P B_c^{-1} P^T v (B_c = A_c for the exact variant)."""
        return self.dec.P @ sla.cho_solve(self._bc_cho, self.dec.P.T @ v)


def tlhb_sweep(op, u0, f):
    """One TLHB sweep: presmooth with M_s^{-1}, coarse-correct, postsmooth with M_s^{-T}."""
    A = op.dec.A
    u1 = u0 + op.smooth(f - A @ u0)
    u2 = u1 + op.coarse_correct(f - A @ u1)
    return u2 + op.smooth(f - A @ u2, transpose=True)


def build_iteration_matrix(op):
    """(I - S M_s^{-T} S^T A)(I - P B_c^{-1} P^T A)(I - S M_s^{-1} S^T A)."""
    A = op.dec.A
    I = np.eye(op.dec.n)
    pre = I - op.smooth(A)
    mid = I - op.coarse_correct(A)
    post = I - op.smooth(A, transpose=True)
    return post @ mid @ pre


def apply_preconditioner(op, r):
    """Additive form S M_bar^{-1} S^T r + (I - S M_s^{-T} S^T A) P B_c^{-1} P^T (I - A S M_s^{-1} S^T) r."""
    S, A = op.dec.S, op.dec.A
    r = np.asarray(r, dtype=float)
    first = S @ sla.cho_solve(op._mbar_cho, S.T @ r)
    w = op.coarse_correct(r - A @ op.smooth(r))
    return first + w - op.smooth(A @ w, transpose=True)


def preconditioner_matrix(op):
    """B_TL^{-1} assembled column by column from :func:`apply_preconditioner`."""
    return apply_preconditioner(op, np.eye(op.dec.n))


def hierarchical_factor(op):
    """The block matrix B_hat = L diag(M_bar, B_c) L^T with L = [[I, 0], [P^T A S M_s^{-1}, I]]."""
    dec, sm = op.dec, op.smoother
    n_s, n_c = dec.n_s, dec.n_c
    coupling = sla.lu_solve(op._ms_lu, dec.S.T @ dec.A @ dec.P, trans=1).T  # P^T A S M_s^{-1}
    L = np.eye(n_s + n_c)
    L[n_s:, :n_s] = coupling
    D = sla.block_diag(sm.M_bar, op.coarse.matrix(dec))
    return L @ D @ L.T, L, D


def hierarchical_preconditioner_matrix(op):
    """(S P) B_hat^{-1} (S P)^T."""
    B_hat, _, _ = hierarchical_factor(op)
    X = np.hstack([op.dec.S, op.dec.P])
    return symmetrize(X @ sla.solve(B_hat, X.T, assume_a="pos"))


def a_norm(E, A):
    """||E||_A as the 2-norm of A^{1/2} E A^{-1/2}."""
    H = spd_sqrt(A) @ E @ spd_sqrt_inv(A)
    return float(sla.svdvals(H)[0])


def preconditioned_spectrum(op):
    """Eigenvalues of B_TL^{-1} A via the symmetric form A^{1/2} B_TL^{-1} A^{1/2}."""
    R = spd_sqrt(op.dec.A)
    return sym_eigenvalues(symmetrize(R @ preconditioner_matrix(op) @ R))


def norm_from_preconditioner(op):
    """max{lambda_max(B^{-1}A) - 1, 1 - lambda_min(B^{-1}A)}."""
    spec = preconditioned_spectrum(op)
    return max(spec.max - 1.0, 1.0 - spec.min)


def worst_start(op):
    """Error vector along the dominant eigenvector of A^{1/2} E A^{-1/2}, unit A-norm."""
    A = op.dec.A
    R, Rinv = spd_sqrt(A), spd_sqrt_inv(A)
    H = symmetrize(R @ build_iteration_matrix(op) @ Rinv)
    w, V = sym_eigh(H)
    return Rinv @ V[:, np.argmax(np.abs(w))]


@dataclass
class SolveHistory:
    residual_norms: list = field(default_factory=list)
    iterates: list = field(default_factory=list)  # A-norm errors, empty if unavailable
    contraction_ratios: list = field(default_factory=list)

    @property
    def sweeps(self):
        return max(len(self.residual_norms) - 1, 0)

    def asymptotic_rate(self):
        """Geometric mean of the recorded A-norm contraction ratios."""
        r = np.asarray(self.contraction_ratios)
        r = r[r > 0]
        return float(np.exp(np.mean(np.log(r)))) if r.size else 0.0


def solve(op, f, u0=None, tol=1e-10, max_sweeps=100, track_error=True):
    """Repeat TLHB sweeps until ||f - A u|| <= tol * ||f||.

    When f = 0 the reference norm falls back to the initial residual.
    Raises :class:`NotConverged` (carrying ``u`` and the history) when
    ``max_sweeps`` is exhausted.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = op.dec.A
    f = np.asarray(f, dtype=float)
    u = np.zeros_like(f) if u0 is None else np.array(u0, dtype=float)
    u_star = sla.solve(A, f, assume_a="pos") if track_error else None
    hist = SolveHistory()

    def record(u):
        r = np.linalg.norm(f - A @ u)
        hist.residual_norms.append(float(r))
        if u_star is not None:
            e = u_star - u
            err = float(np.sqrt(max(e @ A @ e, 0.0)))
            if hist.iterates and hist.iterates[-1] > 0:
                hist.contraction_ratios.append(err / hist.iterates[-1])
            hist.iterates.append(err)
        return r

    r = record(u)
    ref = np.linalg.norm(f) or r
    target = tol * ref
    for k in range(max_sweeps):
        if r <= target:
            return u, hist
        u = tlhb_sweep(op, u, f)
        r = record(u)
        log.debug("sweep %d residual %.3e", k + 1, r)
        if not np.isfinite(r):
            break
    if r <= target:
        return u, hist
    raise NotConverged(f"residual {r:.3e} above {target:.3e} after {hist.sweeps} sweeps", u, hist)
