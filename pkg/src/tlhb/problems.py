"""Model SPD matrices and hierarchical splittings (S, P).

Random instances draw from a Philox counter-based generator keyed by the
seed, so outputs are reproducible across platforms and numpy versions that
keep the Philox stream stable.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.stats import ortho_group

from .errors import InvalidDecomposition, InvalidSize, RankConditionUnreachable
from .spectral import numerical_rank, require_spd

MAX_RESAMPLES = 100


def rng(seed, *stream):
    """Generator for ``seed``; extra integers select an independent substream."""
    key = np.random.SeedSequence([int(seed), *map(int, stream)]).generate_state(2, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class TwoLevelDecomposition:
    """The triple (A, S, P) with rank(S P) = n.

    ``allow_full_coarse`` relaxes n_c < n so that the degenerate case of a
    square nonsingular P can be represented.
    """
    A: np.ndarray
    S: np.ndarray
    P: np.ndarray
    allow_full_coarse: bool = False

    def __post_init__(self):
        A = require_spd(self.A, "A")
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        n = A.shape[0]
        if S.shape[0] != n or P.shape[0] != n:
            raise InvalidDecomposition(
                f"row counts of S {S.shape} and P {P.shape} must match A {A.shape}")
        n_s, n_c = S.shape[1], P.shape[1]
        if n_s >= n:
            raise InvalidDecomposition(f"need n_s < n (n_s={n_s}, n={n})")
        if n_c > n or (n_c == n and not self.allow_full_coarse):
            raise InvalidDecomposition(f"need n_c < n (n_c={n_c}, n={n})")
        if n_s + n_c < n:
            raise InvalidDecomposition(f"need n <= n_s + n_c (n={n}, n_s={n_s}, n_c={n_c})")
        if numerical_rank(S) != n_s:
            raise InvalidDecomposition("S is not of full column rank")
        if numerical_rank(P) != n_c:
            raise InvalidDecomposition("P is not of full column rank")
        if numerical_rank(np.hstack([S, P])) != n:
            raise InvalidDecomposition("rank(S P) < n")
        for name, M in (("A", A), ("S", S), ("P", P)):
            M = M.copy()
            M.flags.writeable = False
            object.__setattr__(self, name, M)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def n_s(self):
        return self.S.shape[1]

    @property
    def n_c(self):
        return self.P.shape[1]

    @property
    def is_square(self):
        return self.n_s + self.n_c == self.n

    def with_P(self, P, **kw):
        return TwoLevelDecomposition(self.A, self.S, P, **kw)


class HierarchicalSplitting(NamedTuple):
    """(S, P) in fine-first ordering; ``perm[i]`` is the grid index of row i."""
    S: np.ndarray
    P: np.ndarray
    perm: np.ndarray

    def permute(self, A):
        return A[np.ix_(self.perm, self.perm)]


def laplacian_1d(n):
    if n < 2:
        raise InvalidSize("laplacian_1d needs n >= 2")
    return sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n)).toarray()


def laplacian_2d(nx, ny):
    if nx < 2 or ny < 2:
        raise InvalidSize("laplacian_2d needs nx, ny >= 2")
    Tx = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(nx, nx))
    Ty = sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(ny, ny))
    return (sp.kron(sp.identity(ny), Tx) + sp.kron(Ty, sp.identity(nx))).toarray()


def random_spd(n, seed, condition_target=100.0):
    """Q^T diag(lam) Q with Haar-random Q and log-uniform lam spanning [1, condition_target]."""
    if n < 2:
        raise InvalidSize("random_spd needs n >= 2")
    if condition_target < 1:
        raise ValueError("condition_target must be >= 1")
    g = rng(seed, 0)
    Q = ortho_group.rvs(n, random_state=g)
    logs = g.uniform(0.0, np.log(condition_target), size=n)
    logs[0], logs[-1] = 0.0, np.log(condition_target)
    A = Q.T @ np.diag(np.exp(logs)) @ Q
    return 0.5 * (A + A.T)


def _interp_1d(n):
    """Linear interpolation from odd 0-based grid points (coarse) to all n points."""
    coarse = np.arange(1, n, 2)
    P = np.zeros((n, coarse.size))
    for j, c in enumerate(coarse):
        P[c, j] = 1.0
        P[c - 1, j] = 0.5
        if c + 1 < n:
            P[c + 1, j] = 0.5
    return P, coarse


def _fine_first(P_grid, coarse):
    n = P_grid.shape[0]
    fine = np.setdiff1d(np.arange(n), coarse)
    perm = np.concatenate([fine, coarse])
    S = np.zeros((n, fine.size))
    S[np.arange(fine.size), np.arange(fine.size)] = 1.0
    return HierarchicalSplitting(S, P_grid[perm], perm)


def classical_hb_splitting(n):
    """Classical 1-D hierarchical splitting for odd n.

    Fine points are the odd 1-based grid indices (n_s = (n+1)/2), coarse
    points the even ones; P is linear interpolation.
    """
    if n < 3 or n % 2 == 0:
        raise InvalidSize(f"classical_hb_splitting needs odd n >= 3, got {n}")
    P, coarse = _interp_1d(n)
    return _fine_first(P, coarse)


def classical_hb_splitting_2d(nx, ny):
    """Tensor-product (bilinear) version of :func:`classical_hb_splitting`."""
    if min(nx, ny) < 3 or nx % 2 == 0 or ny % 2 == 0:
        raise InvalidSize(f"classical_hb_splitting_2d needs odd nx, ny >= 3, got {nx}, {ny}")
    Px, cx = _interp_1d(nx)
    Py, cy = _interp_1d(ny)
    coarse = (cy[:, None] * nx + cx[None, :]).ravel()
    return _fine_first(np.kron(Py, Px), coarse)


def _check_overlap_dims(n, n_s, n_c):
    if min(n, n_s, n_c) < 1:
        raise InvalidSize("dimensions must be positive")
    if n_s + n_c < n:
        raise RankConditionUnreachable(f"n_s + n_c = {n_s + n_c} < n = {n}")
    if max(n_s, n_c) >= n:
        raise InvalidSize(f"need max(n_s, n_c) < n, got n_s={n_s}, n_c={n_c}, n={n}")


def overlapping_splitting(n, n_s, n_c, seed, dense_s=False):
    """Random S and P with rank(S P) = n, resampled until the rank condition holds.

    By default S holds identity columns on a random point subset, so A_s is a
    principal submatrix of A and point smoothers such as Jacobi stay
    convergent on diagonally dominant A. ``dense_s=True`` draws a Gaussian S.
    P is always Gaussian.
    """
    _check_overlap_dims(n, n_s, n_c)
    for attempt in range(MAX_RESAMPLES):
        g = rng(seed, 1, attempt)
        if dense_s:
            S = g.standard_normal((n, n_s))
        else:
            S = np.zeros((n, n_s))
            S[np.sort(g.choice(n, size=n_s, replace=False)), np.arange(n_s)] = 1.0
        P = g.standard_normal((n, n_c))
        if (numerical_rank(S) == n_s and numerical_rank(P) == n_c
                and numerical_rank(np.hstack([S, P])) == n):
            return S, P
    raise RankConditionUnreachable(f"no valid (S, P) after {MAX_RESAMPLES} resamples")


def square_splitting(n, n_s, seed):
    """Block form S = (I; 0), P = (X; I) with Gaussian X."""
    if not 1 <= n_s < n:
        raise InvalidSize(f"need 1 <= n_s < n, got n_s={n_s}, n={n}")
    g = rng(seed, 3)
    S = np.vstack([np.eye(n_s), np.zeros((n - n_s, n_s))])
    P = np.vstack([0.5 * g.standard_normal((n_s, n - n_s)), np.eye(n - n_s)])
    return S, P


def d7():
    """Instance D7: 1-D Laplacian of size 7 with the classical splitting (fine first)."""
    split = classical_hb_splitting(7)
    return TwoLevelDecomposition(split.permute(laplacian_1d(7)), split.S, split.P)


def d7_plus():
    """Instance D7+: 1-D Laplacian of size 7, seeded overlapping splitting with n_s = n_c = 4."""
    S, P = overlapping_splitting(7, 4, 4, seed=1)
    return TwoLevelDecomposition(laplacian_1d(7), S, P)


def gallery(spec, seed=0):
    """Build a named instance: d7, d7plus, lap1d:N, lap2d:NX,NY, random:N,NS,NC."""
    name, _, args = spec.partition(":")
    name = name.strip().lower()
    try:
        nums = [int(a) for a in args.split(",")] if args else []
    except ValueError as exc:
        raise InvalidSize(f"bad gallery arguments in {spec!r}") from exc
    if name == "d7" and not nums:
        return d7()
    if name == "d7plus" and not nums:
        return d7_plus()
    if name == "lap1d" and len(nums) == 1:
        split = classical_hb_splitting(nums[0])
        return TwoLevelDecomposition(split.permute(laplacian_1d(nums[0])), split.S, split.P)
    if name == "lap2d" and len(nums) == 2:
        split = classical_hb_splitting_2d(*nums)
        return TwoLevelDecomposition(split.permute(laplacian_2d(*nums)), split.S, split.P)
    if name == "random" and len(nums) == 3:
        n, n_s, n_c = nums
        S, P = overlapping_splitting(n, n_s, n_c, seed)
        return TwoLevelDecomposition(random_spd(n, seed, 100.0), S, P)
    raise InvalidSize(f"unknown gallery instance {spec!r}")
