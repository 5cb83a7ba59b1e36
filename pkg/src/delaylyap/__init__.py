"""Numerical audit of an auxiliary two-point boundary value problem for delay Lyapunov matrices."""

from .errors import DimensionError, GridError, InstabilityError, UnsupportedGeneralization
from .kron_core import commutation_matrix, kron, unvec, vec
from .lifted_bvp import (
    BoundaryOperator,
    LiftedSystem,
    SystemSpec,
    build_bc_W,
    build_bc_squared,
    build_bc_three,
    build_H,
    bvp_solvability,
    corollary1_diagnostics,
    lemma1_residual,
    spectral_symmetry_check,
    theorem1_diagnostics,
)
from .numkit import RankDiagnostics, char_poly, mat_exp, min_norm_solve, numerical_rank, singular_values

__version__ = "0.1.0"
