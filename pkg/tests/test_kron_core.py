import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from delaylyap.errors import DimensionError
from delaylyap.kron_core import commutation_matrix, kron, unvec, vec

finite = st.floats(-1e3, 1e3, allow_nan=False)


def shapes(max_side=5):
    return st.tuples(st.integers(1, max_side), st.integers(1, max_side))


def test_vec_examples():
    assert vec([[1, 2], [3, 4]]).ravel().tolist() == [1, 3, 2, 4]
    assert vec([[5]]).shape == (1, 1)
    np.testing.assert_array_equal(vec(np.zeros((2, 2))), np.zeros((4, 1)))


def test_unvec_examples():
    np.testing.assert_array_equal(unvec([1, 3, 2, 4], 2, 2), [[1, 2], [3, 4]])
    np.testing.assert_array_equal(unvec([[7]], 1, 1), [[7]])
    np.testing.assert_array_equal(unvec([1, 2, 3, 4, 5, 6], 2, 3), [[1, 3, 5], [2, 4, 6]])


def test_unvec_rejects_wrong_length():
    with pytest.raises(DimensionError):
        unvec([1, 2, 3], 2, 2)


def test_vec_rejects_non_finite():
    with pytest.raises(ValueError):
        vec([[np.nan]])


@given(shapes().flatmap(lambda s: arrays(float, s, elements=finite)))
def test_unvec_inverts_vec(M):
    np.testing.assert_array_equal(unvec(vec(M), *M.shape), M)


def test_kron_examples():
    B = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(kron([[1.0]], B), B)
    expected = np.zeros((4, 4))
    expected[:2, :2] = B
    expected[2:, 2:] = B
    np.testing.assert_array_equal(kron(np.eye(2), B), expected)
    expected = np.zeros((4, 4))
    expected[:2, 2:] = np.eye(2)
    np.testing.assert_array_equal(kron([[0, 1], [0, 0]], np.eye(2)), expected)


def test_kron_matches_block_definition():
    rng = np.random.default_rng(3)
    A, B = rng.standard_normal((2, 3)), rng.standard_normal((4, 2))
    K = kron(A, B)
    for i in range(2):
        for j in range(3):
            np.testing.assert_array_equal(K[4 * i:4 * i + 4, 2 * j:2 * j + 2], A[i, j] * B)


def test_commutation_examples():
    np.testing.assert_array_equal(commutation_matrix(1), [[1.0]])
    expected = np.zeros((4, 4))
    for r, c in [(0, 0), (1, 2), (2, 1), (3, 3)]:
        expected[r, c] = 1.0
    np.testing.assert_array_equal(commutation_matrix(2), expected)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_commutation_transposes_and_is_involutive(n):
    T = commutation_matrix(n)
    A = np.random.default_rng(n).standard_normal((n, n))
    # Brute force: compare against transposing directly.
    np.testing.assert_array_equal(T @ vec(A), vec(A.T))
    np.testing.assert_array_equal(T, T.T)
    np.testing.assert_array_equal(T @ T, np.eye(n * n))
    assert set(np.unique(T)) <= {0.0, 1.0}


def test_commutation_rejects_bad_n():
    with pytest.raises(DimensionError):
        commutation_matrix(0)


@settings(max_examples=50)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_vec_of_triple_product(p, q, r, s, seed):
    rng = np.random.default_rng(seed)
    A, B, C = rng.standard_normal((p, q)), rng.standard_normal((q, r)), rng.standard_normal((r, s))
    lhs = vec(A @ B @ C)
    rhs = kron(C.T, A) @ vec(B)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


@settings(max_examples=50)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_commutation_swaps_kronecker_factors(n, seed):
    rng = np.random.default_rng(seed)
    A, C = rng.standard_normal((n, n)), rng.standard_normal((n, n))
    T = commutation_matrix(n)
    lhs = T @ kron(A, C.T) @ T
    rhs = kron(C.T, A)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))
