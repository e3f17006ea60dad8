"""Two-level hierarchical basis (TLHB) iteration and its convergence theory, verified numerically."""
from .analysis import (ExactAnalysis, InexactBounds, EnergySplit, RankCase, Regime, cbs_constant,
                       exact_analysis, fvz_inexact_bound, inexact_bounds, interpolation_eigenpairs,
                       k_tl, k_tl_upper_bound, energy_split_eigenvalues, monotonicity_check, mu_max,
                       norm_etl_exact, nu_values, optimal_interpolation, sigma_tl, spectrum_etl,
                       spectrum_etl_direct, theta, two_sided_bounds)
from .errors import *  # noqa: F401,F403
from .operators import (CoarseSolver, Smoother, SmootherKind, build_smoother, coarse_spectrum_bounds,
                        galerkin_coarse, projection_pi_a)
from .problems import (HierarchicalSplitting, TwoLevelDecomposition, classical_hb_splitting,
                       classical_hb_splitting_2d, d7, d7_plus, gallery, laplacian_1d, laplacian_2d,
                       overlapping_splitting, random_spd, square_splitting)
from .spectral import Spectrum, lambda_min_plus, numerical_rank
from .twolevel import (SolveHistory, TlhbOperator, a_norm, apply_preconditioner,
                       build_iteration_matrix, hierarchical_preconditioner_matrix,
                       norm_from_preconditioner, preconditioner_matrix, solve, tlhb_sweep)

__version__ = "0.1.0"
