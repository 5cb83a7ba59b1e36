"""Dense numerical kernels used by the diagnostics.

Everything here works on small dense matrices (at most a few dozen rows).
The matrix exponential and the SVD are implemented directly so that the rank
measurements do not depend on any particular LAPACK build; numpy is only used
for array arithmetic and the LU solve inside the Padé step.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np

from .errors import DimensionError
from .kron_core import as_matrix

UNIT_ROUNDOFF = 2.0**-53
DEFAULT_REL_TOL = 1e-8
JACOBI_TOL = 1e-14

# Degree-13 diagonal Padé coefficients and the 1-norm bound below which the
# approximant reaches unit-roundoff backward error (Higham 2005).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def _square(A, name="A"):
    A = as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def mat_exp(A, accuracy_target=UNIT_ROUNDOFF):
    """Matrix exponential by scaling and squaring with a [13/13] Padé approximant.

    The scaling exponent comes from the 1-norm of ``A``. The fixed degree already
    meets unit-roundoff backward error, so any ``accuracy_target`` at or above
    unit roundoff is honoured; asking for less is rejected.
    """
    A = _square(A)
    if not accuracy_target >= UNIT_ROUNDOFF:
        raise ValueError(
            f"accuracy_target {accuracy_target!r} is below unit roundoff {UNIT_ROUNDOFF:.3g}"
        )
    norm1 = np.abs(A).sum(axis=0).max()
    s = 0
    if norm1 > _THETA13:
        s = max(0, math.ceil(math.log2(norm1 / _THETA13)))
    A = A / 2.0**s

    b = _PADE13
    ident = np.eye(A.shape[0])
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    # numpy.linalg.solve is LAPACK gesv: LU with partial pivoting.
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


def _round_robin(m):
    """Disjoint column pairings covering every pair once (circle method, m even)."""
    order = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p = np.array([order[i] for i in range(m // 2)])
        q = np.array([order[m - 1 - i] for i in range(m // 2)])
        rounds.append((p, q))
        order = [order[0], order[-1]] + order[1:-1]
    return rounds


def _jacobi(A, tol=JACOBI_TOL, max_sweeps=100):
    """One-sided (Hestenes) Jacobi on a tall matrix.

    Returns ``(W, V)`` with ``A @ V == W``, V orthogonal and the columns of W
    mutually orthogonal; their norms are the singular values.
    """
    rows, cols = A.shape
    m = cols + (cols % 2)
    W = np.zeros((rows, m))
    W[:, :cols] = A
    V = np.eye(m)
    if m == 1:
        return W[:, :cols], V[:cols, :cols]
    rounds = _round_robin(m)
    # Pairs whose inner product is below roundoff of the whole matrix are left
    # alone; rotating noise against noise never settles.
    eps = np.finfo(float).eps
    floor = max(eps * eps * np.sum(W * W), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            wp, wq = W[:, p], W[:, q]
            alpha = np.sum(wp * wp, axis=0)
            beta = np.sum(wq * wq, axis=0)
            gamma = np.sum(wp * wq, axis=0)
            active = (np.abs(gamma) > tol * np.sqrt(alpha * beta)) & (np.abs(gamma) > floor)
            if not active.any():
                continue
            rotated = True
            p, q = p[active], q[active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.hypot(1.0, t)
            s = c * t
            wp, wq = W[:, p], W[:, q]
            W[:, p], W[:, q] = c * wp - s * wq, s * wp + c * wq
            vp, vq = V[:, p], V[:, q]
            V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            return W[:, :cols], V[:cols, :cols]
    raise RuntimeError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")


def _svd(A):
    """Sorted ``(s, V, W)``: singular values (descending), right vectors, A @ V.

    Wide inputs are padded with zero rows, which leaves the right singular
    vectors and the nonzero singular values unchanged and yields a full V.
    """
    rows, cols = A.shape
    if rows < cols:
        A = np.vstack([A, np.zeros((cols - rows, cols))])
    W, V = _jacobi(A)
    s = np.sqrt(np.sum(W * W, axis=0))
    order = np.argsort(-s, kind="stable")
    return s[order], V[:, order], W[:rows, order]


def singular_values(A):
    """Singular values of ``A`` in descending order (``min(rows, cols)`` of them)."""
    A = as_matrix(A)
    rows, cols = A.shape
    if rows < cols:
        A = A.T
    s, _, _ = _svd(A)
    return s[: min(rows, cols)]


@dataclass(frozen=True)
class RankDiagnostics:
    singular_values: tuple
    tolerance: float
    rank: int
    nullity: int

    @property
    def gap_ratio(self):
        """sigma_rank / sigma_(rank+1); ``inf`` when there is nothing to separate."""
        s = self.singular_values
        if self.rank == 0 or self.rank >= len(s):
            return math.inf
        if s[self.rank] == 0.0:
            return math.inf
        return s[self.rank - 1] / s[self.rank]

    def to_dict(self):
        gap = self.gap_ratio
        return {
            "singular_values": list(self.singular_values),
            "tolerance": self.tolerance,
            "rank": self.rank,
            "nullity": self.nullity,
            "gap_ratio": gap if math.isfinite(gap) else None,
        }


def _rank_tolerance(s, shape, rel_tol):
    smax = s[0] if len(s) else 0.0
    return rel_tol * max(shape) * smax


def numerical_rank(A, rel_tol=DEFAULT_REL_TOL):
    """Count singular values above ``rel_tol * max(rows, cols) * sigma_max``."""
    if not rel_tol > 0:
        raise ValueError(f"rel_tol must be positive, got {rel_tol!r}")
    A = as_matrix(A)
    s = singular_values(A)
    tol = _rank_tolerance(s, A.shape, rel_tol)
    rank = int(np.sum(s > tol))
    return RankDiagnostics(
        singular_values=tuple(float(x) for x in s),
        tolerance=float(tol),
        rank=rank,
        nullity=A.shape[1] - rank,
    )


def char_poly(A):
    """Characteristic polynomial coefficients by the Faddeev-LeVerrier recurrence.

    Returns ``c`` with ``c[k]`` the coefficient of ``lambda**k``; ``c[-1] == 1``.
    """
    A = _square(A)
    m = A.shape[0]
    c = np.zeros(m + 1)
    c[m] = 1.0
    ident = np.eye(m)
    Mk = np.zeros_like(A)
    for k in range(1, m + 1):
        Mk = A @ Mk + c[m - k + 1] * ident
        c[m - k] = -np.trace(A @ Mk) / k
    return c


class LeastSquaresResult(NamedTuple):
    solution: np.ndarray
    residual_norm: float
    nullspace_basis: np.ndarray


def min_norm_solve(A, b, rel_tol=DEFAULT_REL_TOL):
    """Minimum-norm least-squares solution of ``A x = b`` through the SVD.

    Singular values at or below the :func:`numerical_rank` tolerance are treated
    as zero; the matching right singular vectors are returned as the columns of
    ``nullspace_basis`` (orthonormal, possibly zero columns wide).
    """
    A = as_matrix(A, "A")
    b_arr = np.asarray(b, dtype=float)
    column = b_arr.ndim == 2
    bv = b_arr.ravel()
    if bv.size != A.shape[0] or (column and b_arr.shape[1] != 1):
        raise DimensionError(f"b has shape {b_arr.shape}, expected {A.shape[0]} rows")
    s, V, W = _svd(A)
    s = s[: A.shape[1]]
    tol = _rank_tolerance(s[: min(A.shape)], A.shape, rel_tol)
    keep = s > tol
    # Columns of W are sigma_i * u_i, so u_i . b / sigma_i = (w_i . b) / sigma_i^2.
    coeffs = (W[:, keep].T @ bv) / (s[keep] ** 2)
    x = V[:, keep] @ coeffs
    residual = float(np.linalg.norm(A @ x - bv))
    null = V[:, ~keep].copy()
    if column:
        x = x.reshape(-1, 1)
    return LeastSquaresResult(x, residual, null)
