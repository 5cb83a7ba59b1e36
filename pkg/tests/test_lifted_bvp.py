import math

import numpy as np
import pytest
import scipy.linalg

from conftest import delay_free_spec, example_spec, random_specs, scalar_spec
from delaylyap import dde_oracle
from delaylyap.errors import UnsupportedGeneralization
from delaylyap.kron_core import commutation_matrix, vec
from delaylyap.lifted_bvp import (
    SystemSpec,
    build_bc_squared,
    build_bc_three,
    build_bc_transposed_three,
    build_bc_W,
    build_H,
    bvp_solvability,
    corollary1_diagnostics,
    full_operator,
    lemma1_residual,
    perturb_H,
    spectral_symmetry_check,
    theorem1_diagnostics,
)

PI = math.pi


def lapack_rank(M, rel_tol=1e-8):
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rel_tol * max(M.shape) * s[0]))


# --- SystemSpec ------------------------------------------------------------

def test_spec_rejects_non_symmetric_W():
    with pytest.raises(ValueError, match="symmetric"):
        SystemSpec(A0=[[-1.0, 0], [0, -1]], A1=np.zeros((2, 2)), B0=np.zeros((2, 2)),
                   B1=np.zeros((2, 2)), W=[[1.0, 0.5], [0.0, 1.0]])


def test_spec_rejects_shape_mismatch_and_bad_delay():
    with pytest.raises(ValueError):
        SystemSpec(A0=np.eye(2), A1=np.eye(3), B0=np.eye(2), B1=np.eye(2), W=np.eye(2))
    with pytest.raises(ValueError):
        SystemSpec(A0=[[1.0]], A1=[[0.0]], B0=[[0.0]], B1=[[0.0]], W=[[1.0]], h=0.0)


def test_spec_matrices_are_read_only(example):
    with pytest.raises(ValueError):
        example.A0[0, 0] = 5.0


def test_kernel_values(example):
    G = example.kernel(-0.5)
    np.testing.assert_allclose(G, math.sin(-PI / 2) * example.B0 + math.cos(-PI / 2) * example.B1)
    assert example.kernel(np.zeros(3)).shape == (3, 2, 2)


# --- H and J ---------------------------------------------------------------

def test_build_H_scalar(toy):
    lift = build_H(toy)
    expected = [[-1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, -PI], [1, 1, PI, 0]]
    np.testing.assert_array_equal(lift.H, expected)


def test_build_H_example_blocks(example):
    H = build_H(example).H
    np.testing.assert_array_equal(H[:4, :4], -np.eye(4))
    np.testing.assert_array_equal(H[8:12, 12:16], -PI * np.eye(4))
    np.testing.assert_array_equal(H[12:16, 8:12], PI * np.eye(4))
    np.testing.assert_array_equal(H[12:16, 0:4], np.eye(4))
    np.testing.assert_array_equal(H[12:16, 4:8], np.eye(4))


def test_build_H_lifts_the_matrix_ode(example):
    # Brute force: apply the matrix right-hand side directly and compare with H y.
    rng = np.random.default_rng(0)
    Z, V, X0, X1 = (rng.standard_normal((2, 2)) for _ in range(4))
    s = example
    dZ = Z @ s.A0 + V @ s.A1 + X0 @ s.B0 + X1 @ s.B1
    dV = -s.A1.T @ Z - s.A0.T @ V - s.B0.T @ X0 + s.B1.T @ X1
    dX0 = -PI * X1
    dX1 = Z + V + PI * X0
    y = np.vstack([vec(Z), vec(V), vec(X0), vec(X1)])
    expected = np.vstack([vec(dZ), vec(dV), vec(dX0), vec(dX1)])
    np.testing.assert_allclose(build_H(example).H @ y, expected, atol=1e-14)


@pytest.mark.parametrize("h,omega", [(2.0, PI), (1.0, 2.0)])
def test_build_H_rejects_generalizations(h, omega):
    spec = SystemSpec(A0=[[-1.0]], A1=[[0.0]], B0=[[0.0]], B1=[[0.0]], W=[[1.0]], h=h, omega=omega)
    with pytest.raises(UnsupportedGeneralization, match="unsupported generalization"):
        build_H(spec)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_J_symmetric_and_involutive(n):
    J = build_H(delay_free_spec(-np.eye(n))).J
    np.testing.assert_array_equal(J, J.T)
    np.testing.assert_array_equal(J @ J, np.eye(4 * n * n))


# --- boundary operators ----------------------------------------------------

def test_bc_three_scalar(toy):
    bc = build_bc_three(toy)
    np.testing.assert_array_equal(bc.M, [[1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
    np.testing.assert_array_equal(bc.N, [[0, -1, 0, 0], [0, 0, -1, 0], [0, 0, 0, 1]])
    assert len(bc.row_labels) == 3


@pytest.mark.parametrize("n", [1, 2, 3])
def test_bc_three_accepts_constructed_solution(n):
    rng = np.random.default_rng(n)
    spec = delay_free_spec(-np.eye(n))
    Z0, V0, X00, X10 = (rng.standard_normal((n, n)) for _ in range(4))
    Z1, X01 = rng.standard_normal((n, n)), rng.standard_normal((n, n))
    V1 = Z0
    X0_0 = X01.T
    X11 = rng.standard_normal((n, n))
    X1_0 = -X11.T
    y0 = np.vstack([vec(Z0), vec(V0), vec(X0_0), vec(X1_0)])
    y1 = np.vstack([vec(Z1), vec(V1), vec(X01), vec(X11)])
    bc = build_bc_three(spec)
    np.testing.assert_array_equal(bc.M @ y0 + bc.N @ y1, np.zeros((3 * n * n, 1)))


def test_bc_three_block_pattern(example):
    N = build_bc_three(example).N
    np.testing.assert_array_equal(N[4:8, 8:12], -commutation_matrix(2))
    np.testing.assert_array_equal(N[0:4, 4:8], -np.eye(4))


def test_bc_squared(toy, example):
    assert np.array_equal(build_bc_squared(example).M, np.eye(16))
    np.testing.assert_array_equal(
        build_bc_squared(toy).N, [[0, -1, 0, 0], [-1, 0, 0, 0], [0, 0, -1, 0], [0, 0, 0, 1]]
    )
    np.testing.assert_array_equal(build_bc_squared(example).N[0:4, 4:8], -commutation_matrix(2))


def test_transposed_three_is_a_row_subset_of_squared(example):
    sq, t3 = build_bc_squared(example), build_bc_transposed_three(example)
    rows = list(range(4)) + list(range(8, 16))
    np.testing.assert_array_equal(t3.N, sq.N[rows])


def test_bc_W_scalar(toy):
    bc = build_bc_W(toy)
    np.testing.assert_array_equal(bc.M, [[-2, 0, 0, 0]])
    np.testing.assert_array_equal(bc.rhs, [[-1]])
    assert not bc.N.any()
    # z(0) = 0.5 solves the scalar Lyapunov equation -1 = -2 z.
    assert bc.M[0, 0] * 0.5 == bc.rhs[0, 0]


def test_bc_W_degenerate_row_is_zero():
    bc = build_bc_W(scalar_spec(a0=0.0))
    np.testing.assert_array_equal(bc.M, np.zeros((1, 4)))
    np.testing.assert_array_equal(bc.rhs, [[-1]])


def test_bc_W_matches_matrix_form(example):
    rng = np.random.default_rng(7)
    Z, V, X0, X1 = (rng.standard_normal((2, 2)) for _ in range(4))
    s = example
    direct = (Z @ s.A0 + s.A0.T @ Z + V @ s.A1 + s.A1.T @ V.T
              + X0 @ s.B0 + s.B0.T @ X0.T + X1 @ s.B1 + s.B1.T @ X1.T)
    y = np.vstack([vec(Z), vec(V), vec(X0), vec(X1)])
    np.testing.assert_allclose(build_bc_W(example).M @ y, vec(direct), atol=1e-14)


@pytest.mark.slow
def test_oracle_state_satisfies_boundary_rows(example):
    # Cross-check against the independent oracle: the true U gives one solution.
    U = dde_oracle.lyapunov_by_definition(example)
    y = dde_oracle.lifted_initial_state(U, example)
    bcW = build_bc_W(example)
    assert np.linalg.norm(bcW.M @ y - bcW.rhs) <= 1e-3
    K, r = full_operator(example)
    assert np.linalg.norm(K @ y - r) <= 1e-3
    lift = build_H(example)
    assert np.linalg.norm(y - lift.J @ lift.exp_H() @ y) <= 1e-3


# --- signed-swap anti-symmetry and spectral symmetry ---------------------

def test_lemma1_exact(example, toy):
    assert lemma1_residual(build_H(example)) == 0.0
    assert lemma1_residual(build_H(toy)) == 0.0


@pytest.mark.parametrize("spec", random_specs(17, seed=11), ids=lambda s: f"n{s.n}")
def test_lemma1_exact_random(spec):
    assert lemma1_residual(build_H(spec)) == 0.0


def test_lemma1_detects_perturbation(example):
    assert lemma1_residual(perturb_H(build_H(example), 1e-2)) > 1e-3


def test_spectral_symmetry_scalar(toy):
    # (lambda^2 - 1)(lambda^2 + pi^2), from the spectrum {-1, 1, i pi, -i pi}.
    lift = build_H(toy)
    expected = np.array([-PI**2, 0.0, PI**2 - 1, 0.0, 1.0])
    from delaylyap.numkit import char_poly
    np.testing.assert_allclose(char_poly(lift.H), expected, atol=1e-13)
    assert spectral_symmetry_check(lift) <= 1e-12


def test_spectral_symmetry_example(example):
    assert spectral_symmetry_check(build_H(example)) <= 1e-9


@pytest.mark.parametrize("spec", [s for s in random_specs(3, seed=5) if s.n == 2], ids=str)
def test_spectral_symmetry_random(spec):
    assert spectral_symmetry_check(build_H(spec)) <= 1e-9


# --- null spaces of +-I - J e^H -------------------------------------------

def test_theorem1_example(example):
    t1 = theorem1_diagnostics(build_H(example))
    assert (t1.plus.rank, t1.plus.nullity) == (8, 8)
    assert t1.minus.rank == 8
    assert t1.holds


def test_theorem1_scalar_against_lapack(toy):
    lift = build_H(toy)
    t1 = theorem1_diagnostics(lift)
    assert (t1.plus.rank, t1.plus.nullity) == (2, 2)
    # Independent route: scipy expm and LAPACK SVD.
    JE = lift.J @ scipy.linalg.expm(lift.H)
    assert lapack_rank(np.eye(4) - JE) == 2
    assert lapack_rank(-np.eye(4) - JE) == 2


@pytest.mark.parametrize("spec", random_specs(4, seed=21), ids=lambda s: f"n{s.n}")
def test_theorem1_random(spec):
    t1 = theorem1_diagnostics(build_H(spec))
    m = spec.n * spec.n
    assert t1.plus.nullity == t1.minus.nullity == 2 * m
    assert t1.plus.nullity + t1.minus.nullity == 4 * m
    assert min(t1.plus.gap_ratio, t1.minus.gap_ratio) >= 1e4


# --- three-row operator ---------------------------------------------------

def test_corollary1_example(example):
    c1 = corollary1_diagnostics(build_H(example))
    assert c1.verdict == "dependent"
    # Pinned from a first run; cross-checked with LAPACK below.
    assert c1.three_row.rank == 9
    assert c1.squared.rank == 8
    # The original three rows are NOT inside the squared system's row space...
    assert not c1.contained
    assert c1.stacked_rank == 9
    assert c1.null_leakage > 1e-3
    # ...but the same conditions written with Z(0) = V(1)^T are.
    assert c1.transposed_three_row.rank == 8


def test_corollary1_example_against_lapack(example):
    lift = build_H(example)
    E = scipy.linalg.expm(lift.H)
    assert lapack_rank(build_bc_three(example).closed(E)) == 9


def test_corollary1_scalar(toy):
    c1 = corollary1_diagnostics(build_H(toy))
    assert c1.three_row.rank <= 2
    assert c1.verdict == "dependent"


@pytest.mark.parametrize("spec", random_specs(3, seed=31), ids=lambda s: f"n{s.n}")
def test_corollary1_random(spec):
    c1 = corollary1_diagnostics(build_H(spec))
    assert c1.three_row.rank < 3 * spec.n**2
    assert c1.verdict == "dependent"


# --- solvability -----------------------------------------------------------

def test_solvability_example(example):
    sol = bvp_solvability(example)
    assert sol.operator_rank.rank == 12
    assert sol.consistent and not sol.unique
    assert sol.family_dim == 4
    a, b = sol.sample_solutions
    assert np.linalg.norm(a - b) > 0.5
    K, _ = full_operator(example)
    delta = b - a
    assert np.linalg.norm(K @ delta) <= 1e-8 * np.linalg.norm(delta)
    # The would-be U(0) differs between the two solutions.
    assert sol.z0_spread > 1e-2


def test_solvability_scalar_matches_lyapunov_value(toy):
    sol = bvp_solvability(toy)
    assert sol.operator_rank.rank < 4
    assert sol.consistent
    assert len(sol.sample_solutions) == 2
    for y in sol.sample_solutions:
        assert y[0, 0] == pytest.approx(0.5, abs=1e-12)


def test_solvability_degenerate_is_inconsistent():
    spec = SystemSpec(A0=[[0.0]], A1=[[0.0]], B0=[[0.0]], B1=[[0.0]], W=[[1.0]])
    sol = bvp_solvability(spec)
    assert not sol.consistent
    assert sol.sample_solutions == []
    assert sol.residual_norm > 0.5
