"""Dense symmetric eigenvalue and rank kernels.

All floating-point policy lives here: the symmetry tolerance, the SVD rank
cutoff, and the rule that zero eigenvalues are identified by a known
structural count rather than by thresholding.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateSpectrum, NonSymmetric, NotSpd

SYM_TOL = 1e-12
SEPARATION = 1e3


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    zero_count: int = 0

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.ndim != 1:
            raise ValueError("eigenvalues must be a 1-d array")
        if np.any(np.diff(ev) < 0):
            raise ValueError("eigenvalues must be nondecreasing")
        if not 0 <= self.zero_count <= ev.size:
            raise ValueError("zero_count out of range")
        ev.flags.writeable = False
        object.__setattr__(self, "eigenvalues", ev)

    def __len__(self):
        return self.eigenvalues.size

    @property
    def min(self):
        return float(self.eigenvalues[0])

    @property
    def max(self):
        return float(self.eigenvalues[-1])


def check_symmetric(M, tol=SYM_TOL):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonSymmetric(f"expected a square matrix, got shape {M.shape}")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if np.max(np.abs(M - M.T), initial=0.0) > tol * scale:
        raise NonSymmetric("matrix is not symmetric within tolerance")
    return M


def symmetrize(M):
    return 0.5 * (M + M.T)


def sym_eigenvalues(M):
    """All eigenvalues of a symmetric matrix, ascending."""
    M = check_symmetric(M)
    return Spectrum(sla.eigvalsh(symmetrize(M)))


def sym_eigh(M):
    M = check_symmetric(M)
    return sla.eigh(symmetrize(M))


def lambda_min_plus(spec, structural_zero_count):
    """Smallest positive eigenvalue, skipping exactly ``structural_zero_count`` zeros.

    The entry following the zeros must dominate the largest discarded one by
    a factor of 1e3; otherwise the structural count disagrees with the
    numerics and :class:`DegenerateSpectrum` is raised.
    """
    ev = spec.eigenvalues
    k = int(structural_zero_count)
    if not 0 <= k < ev.size:
        raise DegenerateSpectrum(f"structural zero count {k} not below dimension {ev.size}")
    value = float(ev[k])
    if k >= 1:
        discarded = np.max(np.abs(ev[:k]))
        if not value > SEPARATION * discarded:
            raise DegenerateSpectrum(
                f"eigenvalue {value:.3e} not separated from discarded zeros (max |.| = {discarded:.3e})")
    elif value <= 0:
        raise DegenerateSpectrum(f"expected a positive eigenvalue, got {value:.3e}")
    return value


def numerical_rank(M):
    """Number of singular values above max(shape) * eps * sigma_max."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = sla.svdvals(M)
    if s[0] == 0:
        return 0
    cutoff = max(M.shape) * np.finfo(float).eps * s[0]
    return int(np.sum(s > cutoff))


def require_spd(M, name="matrix"):
    """Return ``M`` as a float array after checking symmetry and a Cholesky factorization."""
    try:
        M = check_symmetric(M)
    except NonSymmetric as exc:
        raise NotSpd(f"{name} is not symmetric") from exc
    try:
        np.linalg.cholesky(symmetrize(M))
    except np.linalg.LinAlgError as exc:
        raise NotSpd(f"{name} is not positive definite") from exc
    return M


def _spd_power(M, power):
    w, V = sym_eigh(M)
    if w[0] <= 0:
        raise NotSpd("matrix is not positive definite")
    X = (V * w**power) @ V.T
    return symmetrize(X)


def spd_sqrt_inv(M):
    """Symmetric X with X M X = I."""
    require_spd(M)
    return _spd_power(M, -0.5)


def spd_sqrt(M):
    require_spd(M)
    return _spd_power(M, 0.5)


def psd_sqrt(M, tol=1e-10):
    """Square root of a symmetric positive semidefinite matrix.

    Eigenvalues in [-tol * lambda_max, 0) are treated as rounding noise and
    clipped; anything more negative raises :class:`NotSpd`.
    """
    w, V = sym_eigh(M)
    scale = max(abs(w[-1]), abs(w[0]), 1.0e-300)
    if w[0] < -tol * scale:
        raise NotSpd(f"matrix is indefinite (lambda_min = {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return symmetrize((V * np.sqrt(w)) @ V.T)


def congruence_eigenvalues(K, X):
    """Eigenvalues of X K X for symmetric K and symmetric X, ascending."""
    return sym_eigenvalues(symmetrize(X @ K @ X))
