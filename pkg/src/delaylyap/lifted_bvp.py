"""Kronecker-lifted auxiliary boundary value problem and its rank diagnostics.

The auxiliary problem evolves four n x n matrices Z, V, X0, X1 on [0, 1].
Lifted with ``vec`` they form one state ``y = (z, v, x0, x1)`` of length 4n^2
obeying ``y' = H y``; every boundary operator below uses this block order.
A boundary operator ``(M, N, rhs)`` encodes ``M y(0) + N y(1) = rhs``; closing
it with ``y(1) = e^H y(0)`` gives the square-or-wide matrix ``M + N e^H``.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .errors import DimensionError, UnsupportedGeneralization
from .kron_core import as_matrix, commutation_matrix, kron, vec
from .numkit import DEFAULT_REL_TOL, char_poly, mat_exp, min_norm_solve, numerical_rank

MIN_GAP_RATIO = 1e4


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Delay system x' = A0 x(t) + A1 x(t-h) + int_{-h}^0 G(theta) x(t+theta) dtheta.

    The kernel is ``G(theta) = sin(omega*theta) B0 + cos(omega*theta) B1`` and
    ``W`` is the symmetric weight of the Lyapunov integral.
    """

    A0: np.ndarray
    A1: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    W: np.ndarray
    h: float = 1.0
    omega: float = math.pi

    def __post_init__(self):
        A0 = as_matrix(self.A0, "A0")
        n = A0.shape[0]
        for name in ("A0", "A1", "B0", "B1", "W"):
            M = as_matrix(getattr(self, name), name)
            if M.shape != (n, n):
                raise DimensionError(f"{name} has shape {M.shape}, expected ({n}, {n})")
            M = M.copy()
            M.flags.writeable = False
            object.__setattr__(self, name, M)
        if not np.array_equal(self.W, self.W.T):
            raise ValueError("W must be exactly symmetric")
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"delay h must be positive, got {self.h!r}")
        if not math.isfinite(self.omega):
            raise ValueError(f"omega must be finite, got {self.omega!r}")
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def n(self):
        return self.A0.shape[0]

    def kernel(self, theta):
        """G(theta) for a scalar or an array of thetas (shape ``(..., n, n)``)."""
        theta = np.asarray(theta, dtype=float)
        sin = np.sin(self.omega * theta)[..., None, None]
        cos = np.cos(self.omega * theta)[..., None, None]
        return sin * self.B0 + cos * self.B1


@dataclass(frozen=True, eq=False)
class LiftedSystem:
    n: int
    H: np.ndarray
    J: np.ndarray
    T: np.ndarray

    def exp_H(self):
        return mat_exp(self.H)


@dataclass(frozen=True, eq=False)
class BoundaryOperator:
    M: np.ndarray
    N: np.ndarray
    rhs: np.ndarray
    row_labels: tuple = field(default=())

    def __post_init__(self):
        if self.M.shape != self.N.shape:
            raise DimensionError(f"M {self.M.shape} and N {self.N.shape} differ")
        if self.rhs.shape != (self.M.shape[0], 1):
            raise DimensionError(f"rhs has shape {self.rhs.shape}, expected ({self.M.shape[0]}, 1)")

    def closed(self, expH):
        """``M + N e^H``: the operator acting on y(0) once y(1) is eliminated."""
        return self.M + self.N @ expH

    def stack(self, other):
        return BoundaryOperator(
            np.vstack([self.M, other.M]),
            np.vstack([self.N, other.N]),
            np.vstack([self.rhs, other.rhs]),
            self.row_labels + other.row_labels,
        )


def _check_supported(spec):
    if abs(spec.omega - math.pi) > 1e-12 or spec.h != 1.0:
        raise UnsupportedGeneralization(
            f"unsupported generalization: the lifted problem is only derived for "
            f"omega = pi and h = 1 (got omega={spec.omega!r}, h={spec.h!r})"
        )


def _blocks(n):
    In = np.eye(n)
    I = np.eye(n * n)
    O = np.zeros((n * n, n * n))
    return In, I, O


def build_H(spec):
    """Assemble the lifted generator H and the signed permutation J."""
    _check_supported(spec)
    n = spec.n
    In, I, O = _blocks(n)
    A0t, A1t, B0t, B1t = spec.A0.T, spec.A1.T, spec.B0.T, spec.B1.T
    pi = math.pi
    H = np.block([
        [kron(A0t, In), kron(A1t, In), kron(B0t, In), kron(B1t, In)],
        [-kron(In, A1t), -kron(In, A0t), -kron(In, B0t), kron(In, B1t)],
        [O, O, O, -pi * I],
        [I, I, pi * I, O],
    ])
    T = commutation_matrix(n)
    return LiftedSystem(n=n, H=H, J=_signed_swap(T), T=T)


def _signed_swap(T):
    O = np.zeros_like(T)
    return np.block([
        [O, T, O, O],
        [T, O, O, O],
        [O, O, T, O],
        [O, O, O, -T],
    ])


def perturb_H(lift, eps, index=(0, 0)):
    """Copy of ``lift`` with ``eps`` added to one entry of H (negative control)."""
    H = lift.H.copy()
    H[index] += eps
    return replace(lift, H=H)


def build_bc_three(spec):
    """Z(0) = V(1), X0(0) = X0(1)^T, X1(0) = -X1(1)^T, in the original form."""
    return _three(spec.n)


def _three(n):
    _, I, O = _blocks(n)
    T = commutation_matrix(n)
    M = np.block([[I, O, O, O], [O, O, I, O], [O, O, O, I]])
    N = np.block([[O, -I, O, O], [O, O, -T, O], [O, O, O, T]])
    return BoundaryOperator(
        M, N, np.zeros((3 * n * n, 1)),
        ("Z(0) - V(1) = 0", "X0(0) - X0(1)^T = 0", "X1(0) + X1(1)^T = 0"),
    )


def build_bc_squared(spec):
    """The square system ``y(0) - J y(1) = 0``.

    Its first block row reads Z(0) = V(1)^T (not Z(0) = V(1)), and the second
    is the added condition V(0) = Z(1)^T.
    """
    return _squared(spec.n)


def _squared(n):
    k = 4 * n * n
    return BoundaryOperator(
        np.eye(k), -_signed_swap(commutation_matrix(n)), np.zeros((k, 1)),
        ("Z(0) - V(1)^T = 0", "V(0) - Z(1)^T = 0", "X0(0) - X0(1)^T = 0", "X1(0) + X1(1)^T = 0"),
    )


def build_bc_transposed_three(spec):
    """Rows 1, 3, 4 of the squared system: the three conditions with Z(0) = V(1)^T."""
    return _transposed_three(spec.n)


def _transposed_three(n):
    sq = _squared(n)
    m = n * n
    rows = np.r_[0:m, 2 * m:4 * m]
    return BoundaryOperator(
        sq.M[rows], sq.N[rows], sq.rhs[rows],
        (sq.row_labels[0], sq.row_labels[2], sq.row_labels[3]),
    )


def build_bc_W(spec):
    """Algebraic condition -W = Z(0)A0 + A0^T Z(0) + V(0)A1 + A1^T V(0)^T + ... at tau = 0."""
    n = spec.n
    In = np.eye(n)
    T = commutation_matrix(n)
    blocks = [kron(spec.A0.T, In) + kron(In, spec.A0.T)]
    for B in (spec.A1, spec.B0, spec.B1):
        blocks.append(kron(B.T, In) + kron(In, B.T) @ T)
    M = np.hstack(blocks)
    return BoundaryOperator(M, np.zeros_like(M), vec(-spec.W), ("-W boundary row",))


def lemma1_residual(lift):
    """Frobenius norm of ``J^T H J + H``; exactly 0.0 for an unperturbed lift."""
    return float(np.linalg.norm(lift.J.T @ lift.H @ lift.J + lift.H))


def spectral_symmetry_check(lift):
    """Largest odd-degree characteristic-polynomial coefficient of H, normalized.

    The normalization is by the largest coefficient magnitude. A value near 0
    means the spectrum of H is symmetric under lambda -> -lambda.
    """
    c = char_poly(lift.H)
    return float(np.max(np.abs(c[1::2])) / np.max(np.abs(c)))


@dataclass(frozen=True)
class Theorem1Result:
    plus: object
    minus: object
    expected_nullity: int

    @property
    def holds(self):
        return (
            self.plus.nullity == self.expected_nullity
            and self.minus.nullity == self.expected_nullity
        )

    def to_dict(self):
        return {
            "plus": self.plus.to_dict(),
            "minus": self.minus.to_dict(),
            "expected_nullity": self.expected_nullity,
        }


def theorem1_diagnostics(lift, rel_tol=DEFAULT_REL_TOL, expH=None):
    """Numerical ranks of ``I - J e^H`` and ``-I - J e^H``; both should be 2n^2."""
    E = lift.exp_H() if expH is None else expH
    I = np.eye(lift.H.shape[0])
    JE = lift.J @ E
    return Theorem1Result(
        plus=numerical_rank(I - JE, rel_tol),
        minus=numerical_rank(-I - JE, rel_tol),
        expected_nullity=2 * lift.n * lift.n,
    )


@dataclass(frozen=True)
class Corollary1Result:
    three_row: object
    squared: object
    verdict: str
    transposed_three_row: object
    stacked_rank: int
    null_leakage: float

    @property
    def contained(self):
        """Whether the three-row operator lies in the squared operator's row space."""
        return self.stacked_rank == self.squared.rank

    def to_dict(self):
        return {
            "three_row": self.three_row.to_dict(),
            "squared": self.squared.to_dict(),
            "verdict": self.verdict,
            "transposed_three_row": self.transposed_three_row.to_dict(),
            "stacked_rank": self.stacked_rank,
            "three_row_in_squared_row_space": self.contained,
            "null_leakage": self.null_leakage,
        }


def corollary1_diagnostics(lift, rel_tol=DEFAULT_REL_TOL, expH=None):
    """Rank of the three-condition operator and its relation to the squared one.

    ``verdict`` is ``"dependent"`` iff the 3n^2 rows have rank below 3n^2.
    Alongside, the report carries the rank of the same three conditions written
    with Z(0) = V(1)^T, the rank of both operators stacked (equal to the squared
    rank iff the three rows lie in its row space), and ``null_leakage``: the
    largest ``|K3 v|`` over an orthonormal basis of Null(I - J e^H).
    """
    E = lift.exp_H() if expH is None else expH
    K3 = _three(lift.n).closed(E)
    Ksq = _squared(lift.n).closed(E)
    Kt = _transposed_three(lift.n).closed(E)
    three = numerical_rank(K3, rel_tol)
    squared = numerical_rank(Ksq, rel_tol)
    stacked = numerical_rank(np.vstack([Ksq, K3]), rel_tol)
    null = min_norm_solve(Ksq, np.zeros(Ksq.shape[0]), rel_tol).nullspace_basis
    leakage = float(np.max(np.linalg.norm(K3 @ null, axis=0))) if null.shape[1] else 0.0
    m = lift.n * lift.n
    return Corollary1Result(
        three_row=three,
        squared=squared,
        verdict="dependent" if three.rank < 3 * m else "independent",
        transposed_three_row=numerical_rank(Kt, rel_tol),
        stacked_rank=stacked.rank,
        null_leakage=leakage,
    )


def full_operator(spec, expH=None):
    """The square affine system ``K y(0) = r`` (W row stacked on the three conditions)."""
    bc = build_bc_W(spec).stack(build_bc_three(spec))
    E = build_H(spec).exp_H() if expH is None else expH
    return bc.closed(E), bc.rhs


@dataclass(frozen=True)
class SolvabilityResult:
    operator_rank: object
    consistent: bool
    residual_norm: float
    consistency_tolerance: float
    family_dim: int
    sample_solutions: list
    z0_spread: float

    @property
    def unique(self):
        return self.consistent and self.family_dim == 0

    def to_dict(self):
        return {
            "operator_rank": self.operator_rank.to_dict(),
            "consistent": self.consistent,
            "residual_norm": self.residual_norm,
            "consistency_tolerance": self.consistency_tolerance,
            "family_dim": self.family_dim,
            "sample_solutions": [s.ravel().tolist() for s in self.sample_solutions],
            "z0_spread": self.z0_spread,
        }


def bvp_solvability(spec, rel_tol=DEFAULT_REL_TOL, expH=None):
    """Rank, consistency and solution-family size of the closed boundary problem.

    Consistency means the min-norm residual is at most
    ``rel_tol * (sigma_max * |x| + |r|)``. When the family is nontrivial two
    solutions are returned: the min-norm one and that plus the first nullspace
    vector. ``z0_spread`` is the largest change in the z block between them,
    i.e. how far the would-be U(0) is left undetermined.
    """
    K, r = full_operator(spec, expH)
    diag = numerical_rank(K, rel_tol)
    x, residual, null = min_norm_solve(K, r, rel_tol)
    smax = diag.singular_values[0] if diag.singular_values else 0.0
    tol = rel_tol * (smax * float(np.linalg.norm(x)) + float(np.linalg.norm(r)))
    consistent = residual <= tol
    samples = []
    spread = 0.0
    family = null.shape[1] if consistent else 0
    if consistent:
        samples.append(x)
        if family:
            other = x + null[:, :1]
            samples.append(other)
            m = spec.n * spec.n
            spread = float(np.max(np.abs(other[:m] - x[:m])))
    return SolvabilityResult(
        operator_rank=diag,
        consistent=bool(consistent),
        residual_norm=residual,
        consistency_tolerance=float(tol),
        family_dim=family,
        sample_solutions=samples,
        z0_spread=spread,
    )
