"""Convergence theory of the TLHB method, computed on dense matrices.

Every spectral quantity is obtained from a symmetric congruent or similar
form; nonsymmetric eigenproblems are never solved here.  Zero eigenvalues
are skipped by their structural multiplicity:

* ``M_tilde^{-1} S^T A (I - Pi_A) S`` has ``n_s + n_c - n`` zeros,
* ``E_TL`` has ``n_c`` zeros,
* ``S M_tilde^{-1} S^T A`` has ``n - n_s`` zeros.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .errors import (BoundViolation, InvalidCoarseSize, InvalidDecomposition, NotNested,
                     NotSpd, NotSquareCase, SingularComplement)
from .operators import CoarseSolver, coarse_spectrum_bounds, galerkin_coarse, projection_pi_a
from .spectral import (Spectrum, congruence_eigenvalues, lambda_min_plus, numerical_rank,
                       psd_sqrt, spd_sqrt, spd_sqrt_inv, sym_eigh, sym_eigenvalues, symmetrize)
from .twolevel import TlhbOperator, build_iteration_matrix, norm_from_preconditioner

BOUND_SLACK = 1e-10
BOUNDARY_BAND = 1e-12
NEST_TOL = 1e-10
COMPLEMENT_TOL = 1e-10


class RankCase(str, Enum):
    FULL_RANK = "full-rank"
    RANK_DEFICIENT = "rank-deficient"


class Regime(str, Enum):
    BETA_LE_1 = "beta<=1"
    STRADDLE = "alpha<=1<beta"
    ALPHA_GT_1 = "1<alpha"


def _complement_energy(dec):
    """A (I - Pi_A) = A - A P A_c^{-1} P^T A, formed symmetrically."""
    AP = dec.A @ dec.P
    cho = sla.cho_factor(galerkin_coarse(dec))
    return symmetrize(dec.A - AP @ sla.cho_solve(cho, AP.T))


def _projection_energy(dec):
    """A Pi_A = A P A_c^{-1} P^T A."""
    AP = dec.A @ dec.P
    cho = sla.cho_factor(galerkin_coarse(dec))
    return symmetrize(AP @ sla.cho_solve(cho, AP.T))


def _sigma_spectrum(dec, smoother):
    """Spectrum of M_tilde^{-1/2} S^T A (I - Pi_A) S M_tilde^{-1/2}."""
    K = symmetrize(dec.S.T @ _complement_energy(dec) @ dec.S)
    spec = congruence_eigenvalues(K, spd_sqrt_inv(smoother.M_tilde))
    return Spectrum(spec.eigenvalues, dec.n_s + dec.n_c - dec.n)


def sigma_tl(dec, smoother):
    """Smallest positive eigenvalue of M_tilde^{-1} S^T A (I - Pi_A) S; the exact factor is 1 - sigma_tl."""
    spec = _sigma_spectrum(dec, smoother)
    return lambda_min_plus(spec, spec.zero_count)


def nu_values(dec, smoother):
    """The n - n_c positive eigenvalues nu_i, ascending."""
    spec = _sigma_spectrum(dec, smoother)
    lambda_min_plus(spec, spec.zero_count)
    return spec.eigenvalues[spec.zero_count:].copy()


def _symmetrized_etl(dec, smoother):
    E = build_iteration_matrix(TlhbOperator(dec, smoother))
    return symmetrize(spd_sqrt(dec.A) @ E @ spd_sqrt_inv(dec.A))


def norm_etl_exact(dec, smoother):
    """||E_TL||_A as lambda_max of the SPSD matrix A^{1/2} E_TL A^{-1/2}."""
    return sym_eigenvalues(_symmetrized_etl(dec, smoother)).max


def spectrum_etl(dec, smoother):
    """{0 (n_c times)} together with {1 - nu_i}."""
    nu = nu_values(dec, smoother)
    ev = np.sort(np.concatenate([np.zeros(dec.n_c), 1.0 - nu]))
    return Spectrum(ev, dec.n_c)


def spectrum_etl_direct(dec, smoother):
    """Eigenvalues of the assembled E_TL (through its A-symmetrized form)."""
    return sym_eigenvalues(_symmetrized_etl(dec, smoother))


def cbs_constant(dec):
    """gamma = ||A_s^{-1/2} S^T A P A_c^{-1/2}||_2, clipped to [0, 1]."""
    A_s = symmetrize(dec.S.T @ dec.A @ dec.S)
    X = spd_sqrt_inv(A_s) @ dec.S.T @ dec.A @ dec.P @ spd_sqrt_inv(galerkin_coarse(dec))
    return min(float(sla.svdvals(X)[0]), 1.0)


def mu_max(smoother):
    """lambda_max(M_tilde^{-1} A_s) (at most 1 since M_tilde - A_s is SPSD)."""
    return congruence_eigenvalues(smoother.A_s, spd_sqrt_inv(smoother.M_tilde)).max


def k_tl(dec, smoother):
    """K_TL = max over v_s of (v_s^T M_tilde v_s) / (v_s^T S^T A (I - Pi_A) S v_s).

    Only defined when (S P) is square and nonsingular. Solved as the
    generalized pencil problem, so it is an independent route to 1 / sigma_tl.
    """
    if not dec.is_square:
        raise NotSquareCase(f"K_TL needs n_s + n_c = n (got {dec.n_s} + {dec.n_c} != {dec.n})")
    K = symmetrize(dec.S.T @ _complement_energy(dec) @ dec.S)
    try:
        lo = sla.eigh(K, smoother.M_tilde, eigvals_only=True)[0]
    except np.linalg.LinAlgError as exc:
        raise NotSquareCase("pencil is singular") from exc
    if lo <= 0:
        raise NotSquareCase("S^T A (I - Pi_A) S is not positive definite")
    return float(1.0 / lo)


def k_tl_upper_bound(dec, smoother):
    """lambda_max(A_s^{-1} M_tilde) / (1 - gamma^2); infinite when gamma = 1."""
    g = cbs_constant(dec)
    top = congruence_eigenvalues(smoother.M_tilde, spd_sqrt_inv(smoother.A_s)).max
    return np.inf if g >= 1.0 - BOUNDARY_BAND else top / (1.0 - g * g)


def interpolation_eigenpairs(A, S, smoother):
    """Eigenpairs (mu_i, v_i) of S M_tilde^{-1} S^T A with v_i^T A v_j = delta_ij, mu ascending."""
    R, Rinv = spd_sqrt(A), spd_sqrt_inv(A)
    H = R @ S @ sla.solve(smoother.M_tilde, S.T, assume_a="pos") @ R
    mu, W = sym_eigh(symmetrize(H))
    return mu, Rinv @ W


def optimal_interpolation(A, S, smoother, n_c):
    """Interpolation spanning the n_c lowest eigenvectors of S M_tilde^{-1} S^T A.

    Returns ``(P_star, bound)`` with bound = 1 - mu_{n_c + 1}, the smallest
    attainable ||E_TL||_A over all P with n_c columns.
    """
    n, n_s = S.shape
    if not n - n_s <= n_c < n:
        raise InvalidCoarseSize(f"need n - n_s <= n_c < n, got n_c={n_c} (n={n}, n_s={n_s})")
    mu, V = interpolation_eigenpairs(A, S, smoother)
    return V[:, :n_c].copy(), float(1.0 - mu[n_c])


def monotonicity_check(dec, smoother, P_hat):
    """(sigma_tl for P, sigma_tl for P_hat) where Range(P) must lie in Range(P_hat)."""
    P_hat = np.atleast_2d(np.asarray(P_hat, dtype=float))
    resid = dec.P - P_hat @ np.linalg.lstsq(P_hat, dec.P, rcond=None)[0]
    scale = max(1.0, float(np.linalg.norm(dec.P, 2)))
    if np.linalg.norm(resid, 2) > NEST_TOL * scale:
        raise NotNested("Range(P) is not contained in Range(P_hat)")
    try:
        dec_hat = dec.with_P(P_hat)
    except InvalidDecomposition as exc:
        raise NotNested(f"P_hat does not give a valid decomposition: {exc}") from exc
    return sigma_tl(dec, smoother), sigma_tl(dec_hat, smoother)


def theta(dec, smoother):
    """lambda_min^+(S M_tilde^{-1} S^T A Pi_A) when rank(S^T A P) = n_c, else None."""
    StAP = dec.S.T @ dec.A @ dec.P
    if numerical_rank(StAP) < dec.n_c:
        return None
    X = spd_sqrt_inv(galerkin_coarse(dec))
    G = StAP.T @ sla.solve(smoother.M_tilde, StAP, assume_a="pos")
    return congruence_eigenvalues(symmetrize(G), X).min


@dataclass(frozen=True)
class EnergySplit:
    lmin_complement: float
    lmax_complement: float
    lmin_proj: float
    lmax_proj: float
    theta: float
    rank_stap: int


def energy_split_eigenvalues(dec, smoother):
    """Extreme eigenvalues of (I - S M_tilde^{-1} S^T A)(I - Pi_A) and (I - S M_tilde^{-1} S^T A) Pi_A.

    Both products share their spectra with C^{1/2} K C^{1/2} where
    C = A^{-1} - S M_tilde^{-1} S^T is SPSD and K is A (I - Pi_A) or A Pi_A.
    """
    A, S = dec.A, dec.S
    C = symmetrize(sla.inv(A) - S @ sla.solve(smoother.M_tilde, S.T, assume_a="pos"))
    try:
        Rc = psd_sqrt(C, tol=COMPLEMENT_TOL)
    except NotSpd as exc:
        raise SingularComplement(f"A^-1 - S M_tilde^-1 S^T is indefinite: {exc}") from exc
    comp = congruence_eigenvalues(_complement_energy(dec), Rc)
    proj = congruence_eigenvalues(_projection_energy(dec), Rc)
    return EnergySplit(comp.min, comp.max, proj.min, proj.max,
                   theta(dec, smoother), numerical_rank(S.T @ A @ dec.P))


def _regime(alpha, beta):
    if beta <= 1.0:
        return Regime.BETA_LE_1
    if alpha <= 1.0:
        return Regime.STRADDLE
    return Regime.ALPHA_GT_1


def _bounds_full_rank(regime, alpha, beta, sigma, th, mu):
    if regime is Regime.BETA_LE_1:
        lower = 1.0 - min(beta - beta * th, sigma)
        upper = 1.0 - alpha * sigma
    elif regime is Regime.STRADDLE:
        lower = 1.0 - min(mu, beta * sigma)
        upper = max(1.0 - alpha * sigma, (beta - 1.0) * (1.0 - th))
    else:
        lower = max(alpha - 1.0 - alpha * th, 1.0 - mu, (alpha - 1.0) * (1.0 - mu), 1.0 - beta * sigma)
        upper = max(1.0 - sigma, (beta - 1.0) * (1.0 - th))
    return lower, upper


def _bounds_rank_deficient(regime, alpha, beta, sigma, mu):
    if regime is Regime.BETA_LE_1:
        lower = 1.0 - min(beta, sigma)
        upper = 1.0 - alpha * sigma
    elif regime is Regime.STRADDLE:
        lower = 1.0 - min(mu, beta * sigma)
        upper = max(1.0 - alpha * sigma, beta - 1.0)
    else:
        lower = max(alpha - 1.0, 1.0 - mu, 1.0 - beta * sigma)
        upper = max(1.0 - sigma, beta - 1.0)
    return lower, upper


def _applicable_regimes(alpha, beta):
    out = []
    if beta <= 1.0 + BOUNDARY_BAND:
        out.append(Regime.BETA_LE_1)
    if alpha <= 1.0 + BOUNDARY_BAND and beta > 1.0 - BOUNDARY_BAND:
        out.append(Regime.STRADDLE)
    if alpha > 1.0 - BOUNDARY_BAND:
        out.append(Regime.ALPHA_GT_1)
    return out


@dataclass(frozen=True)
class InexactBounds:
    alpha: float
    beta: float
    rank_case: RankCase
    regime: Regime
    lower: float
    upper: float
    observed: float
    sigma_tl: float
    theta: float  # None in the rank-deficient case
    mu_max: float

    @property
    def holds(self):
        return self.lower - BOUND_SLACK <= self.observed <= self.upper + BOUND_SLACK


def two_sided_bounds(alpha, beta, sigma, th, mu, full_rank):
    """(lower, upper) for the inexact convergence factor.

    Within 1e-12 of a regime boundary every adjacent formula is evaluated and
    the tightest pair is returned.
    """
    lowers, uppers = [], []
    for reg in _applicable_regimes(alpha, beta):
        if full_rank:
            lo, up = _bounds_full_rank(reg, alpha, beta, sigma, th, mu)
        else:
            lo, up = _bounds_rank_deficient(reg, alpha, beta, sigma, mu)
        lowers.append(lo)
        uppers.append(up)
    return max(lowers), min(uppers)


def inexact_bounds(dec, smoother, B_c, check=True):
    """Two-sided bounds on ||E~_TL||_A for an SPD coarse solver B_c, with the observed value.

    Raises :class:`BoundViolation` if ``check`` and the observed factor leaves
    [lower, upper] by more than 1e-10.
    """
    coarse = CoarseSolver.approximate(dec, B_c)
    alpha, beta = coarse.alpha, coarse.beta
    sigma = sigma_tl(dec, smoother)
    th = theta(dec, smoother)
    full = th is not None
    mu = mu_max(smoother)
    lower, upper = two_sided_bounds(alpha, beta, sigma, th, mu, full)
    observed = norm_from_preconditioner(TlhbOperator(dec, smoother, coarse))
    out = InexactBounds(alpha, beta, RankCase.FULL_RANK if full else RankCase.RANK_DEFICIENT,
                        _regime(alpha, beta), lower, upper, observed, sigma, th, mu)
    if check and not out.holds:
        raise BoundViolation(
            f"observed {observed!r} outside [{lower!r}, {upper!r}]",
            data=dict(out.__dict__, A=dec.A, S=dec.S, P=dec.P, B_c=B_c, M_s=smoother.M_s))
    return out


def fvz_inexact_bound(dec, smoother, B_c):
    """1 - 1/(K_TL + delta/(1 - gamma^2)) with delta = 1/alpha - 1.

    None unless (S P) is square, beta <= 1 and gamma < 1.
    """
    if not dec.is_square:
        return None
    alpha, beta = coarse_spectrum_bounds(dec, B_c)
    if beta > 1.0 + BOUNDARY_BAND:
        return None
    g = cbs_constant(dec)
    if g >= 1.0 - BOUNDARY_BAND:
        return None
    delta = max(1.0 / alpha - 1.0, 0.0)
    return 1.0 - 1.0 / (k_tl(dec, smoother) + delta / (1.0 - g * g))


@dataclass(frozen=True)
class ExactAnalysis:
    sigma_tl: float
    norm_etl: float
    spectrum_etl: Spectrum
    gamma: float
    k_tl: float  # None outside the square case
    nu: np.ndarray = field(repr=False)

    @property
    def identity_residual(self):
        return abs(self.norm_etl - (1.0 - self.sigma_tl))


def exact_analysis(dec, smoother):
    return ExactAnalysis(
        sigma_tl=sigma_tl(dec, smoother),
        norm_etl=norm_etl_exact(dec, smoother),
        spectrum_etl=spectrum_etl(dec, smoother),
        gamma=cbs_constant(dec),
        k_tl=k_tl(dec, smoother) if dec.is_square else None,
        nu=nu_values(dec, smoother),
    )
