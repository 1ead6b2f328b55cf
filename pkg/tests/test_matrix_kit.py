import itertools

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from resadp import matrix_kit as mk
from resadp.errors import DimensionError, RankError, StabilityError, ValidationError


def brute_vecv(v):
    return [v[i] * v[j] for i, j in itertools.combinations_with_replacement(range(len(v)), 2)]


@pytest.mark.parametrize("v, expected", [
    ([1], [1]),
    ([1, 2], [1, 2, 4]),
    ([1, 2, 3], [1, 2, 3, 4, 6, 9]),
])
def test_vecv_examples(v, expected):
    assert mk.vecv(v).tolist() == expected
    assert brute_vecv(v) == expected


def test_vecv_empty():
    with pytest.raises(DimensionError):
        mk.vecv([])


@pytest.mark.parametrize("P, expected", [
    ([[5]], [5]),
    ([[1, 2], [2, 3]], [1, 4, 3]),
])
def test_vecs_examples(P, expected):
    assert mk.vecs(P).tolist() == expected


def test_vecs_rejects_bad_input():
    with pytest.raises(DimensionError):
        mk.vecs(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        mk.vecs([[1.0, 2.0], [0.0, 1.0]])


def test_vecs_symmetrizes_tiny_asymmetry():
    P = np.array([[1.0, 2.0], [2.0 + 1e-13, 3.0]])
    assert np.allclose(mk.vecs(P), [1.0, 4.0 + 1e-13, 3.0])


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6).flatmap(
    lambda n: st.tuples(arrays(float, n, elements=finite), arrays(float, (n, n), elements=finite))))
def test_quadratic_form_identity(xs):
    x, M = xs
    P = M + M.T
    direct = x @ P @ x
    scale = np.abs(x) @ np.abs(P) @ np.abs(x)
    assert abs(mk.vecv(x) @ mk.vecs(P) - direct) <= 1e-12 * max(scale, 1e-300)
    assert mk.vecv(x).size == mk.vecs(P).size == x.size * (x.size + 1) // 2


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: arrays(float, (n, n), elements=finite)))
def test_unvecs_round_trip(M):
    P = M + M.T
    assert np.allclose(mk.unvecs(mk.vecs(P)), P, rtol=0, atol=1e-14 * max(1.0, np.abs(P).max()))


def test_vec_examples(rng):
    assert mk.vec([[1, 2], [3, 4]]).tolist() == [1, 3, 2, 4]
    assert mk.vec(np.eye(2)).tolist() == [1, 0, 0, 1]
    a, b = rng.normal(size=3), rng.normal(size=4)
    assert np.allclose(mk.vec(np.outer(a, b)), np.kron(b, a))


def test_kron_examples(rng):
    assert np.array_equal(mk.kron([1], [[1, 2], [3, 4]]), [[1, 2], [3, 4]])
    assert np.array_equal(mk.kron(np.eye(2), [[2]]), [[2, 0], [0, 2]])
    A, X, B = (rng.normal(size=(2, 2)) for _ in range(3))
    assert np.allclose(mk.vec(A @ X @ B), mk.kron(B.T, A) @ mk.vec(X))


def test_least_squares_examples(rng):
    theta, res = mk.solve_least_squares(np.eye(3), [1, 2, 3])
    assert np.allclose(theta, [1, 2, 3]) and res < 1e-15
    theta, res = mk.solve_least_squares([[1.0], [1.0]], [0.0, 2.0])
    assert theta == pytest.approx([1.0]) and res == pytest.approx(np.sqrt(2))
    M0 = rng.normal(size=(6, 4))
    theta0 = rng.normal(size=4)
    M = np.vstack([M0, M0])
    theta, res = mk.solve_least_squares(M, M @ theta0)
    assert np.allclose(theta, theta0, atol=1e-12) and res < 1e-12


def test_least_squares_rank_error():
    M = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(RankError) as info:
        mk.solve_least_squares(M, [1.0, 2.0, 3.0])
    assert info.value.rank == 1


def test_least_squares_badly_scaled_columns(rng):
    scales = np.array([1e-6, 1.0, 1e4, 1e-3, 1e6])
    M = rng.normal(size=(30, 5)) * scales
    # each column contributes O(1) to b, so every coefficient is recoverable
    theta0 = rng.normal(size=5) / scales
    theta, res = mk.solve_least_squares(M, M @ theta0)
    assert np.allclose(theta, theta0, rtol=1e-8)


def test_lyapunov_examples(rng):
    Q0 = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert np.allclose(mk.solve_discrete_lyapunov(np.zeros((2, 2)), Q0), Q0)
    assert mk.solve_discrete_lyapunov([[0.5]], [[1.0]])[0, 0] == pytest.approx(4 / 3, abs=1e-14)
    for n in range(1, 7):
        A = rng.normal(size=(n, n))
        A *= 0.95 / mk.spectral_radius(A)
        G = rng.normal(size=(n, n))
        Q = G @ G.T
        P = mk.solve_discrete_lyapunov(A, Q)
        assert mk.lyapunov_residual(A, P, Q) < 1e-10 * (1 + np.linalg.norm(Q))
        assert np.allclose(P, P.T, atol=1e-12 * np.abs(P).max())
        assert np.linalg.eigvalsh(P).min() >= -1e-10
        # independent solver
        assert np.allclose(P, sla.solve_discrete_lyapunov(A.T, Q), rtol=1e-8)


def test_lyapunov_rejects_unstable():
    with pytest.raises(StabilityError):
        mk.solve_discrete_lyapunov([[1.0]], [[1.0]])


def test_spectral_radius_examples():
    assert mk.spectral_radius(np.eye(2)) == pytest.approx(1.0)
    assert not mk.is_schur(np.eye(2))
    assert mk.spectral_radius([[0.5, 1.0], [0.0, 0.5]]) == pytest.approx(0.5)
    assert mk.is_schur([[0.5, 1.0], [0.0, 0.5]])
    assert mk.spectral_radius([[0.0, 1.0], [-1.0, 0.0]]) == pytest.approx(1.0)


def test_non_finite_rejected():
    with pytest.raises(ValidationError):
        mk.as_matrix([[np.nan]])
