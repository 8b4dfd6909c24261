import numpy as np
import pytest
import scipy.linalg

from ticklab.errors import BranchCutHit, SingularMatrix
from ticklab.matkit import adjugate, expm, logm_2x2, mat_pow_apply, solve_linear
from ticklab.models import QubitParams, qubit_kraus


def test_solve_linear_examples():
    np.testing.assert_allclose(solve_linear(np.eye(3), [1.0, 2.0, 3.0]), [1, 2, 3])
    np.testing.assert_allclose(solve_linear([[2.0, 0.0], [0.0, 4.0]], [2.0, 4.0]), [1, 1])
    T0 = np.array([[0.5, 0.5], [0.0, 0.5]])
    x = solve_linear(np.eye(2) - T0, np.ones(2))
    np.testing.assert_allclose(x, [4, 2])


def test_solve_linear_singular():
    with pytest.raises(SingularMatrix):
        solve_linear(np.eye(2) - np.eye(2), np.ones(2))
    with pytest.raises(SingularMatrix):
        solve_linear([[1.0, 1.0], [1.0, 1.0]], [1.0, 2.0])


def test_solve_linear_residual_random():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        d = int(rng.integers(1, 11))
        A = rng.standard_normal((d, d)) + d * np.eye(d)
        b = rng.standard_normal(d)
        x = solve_linear(A, b)
        assert np.abs(A @ x - b).max() <= 1e-10 * (1 + np.abs(b).max())


def test_solve_linear_complex():
    A = np.array([[1.0 + 1j, 0.5], [0.0, 2.0 - 1j]])
    b = np.array([1.0, 1j])
    np.testing.assert_allclose(A @ solve_linear(A, b), b, atol=1e-14)


def test_mat_pow_apply():
    M = np.array([[0.0, 1.0], [0.0, 0.0]])
    v = np.array([1.0, 0.0])
    np.testing.assert_array_equal(mat_pow_apply(M, v, 0), v)
    np.testing.assert_array_equal(mat_pow_apply(M, v, 1), [0, 1])
    np.testing.assert_array_equal(mat_pow_apply(M, v, 2), [0, 0])
    T0 = np.array([[0.5, 0.5], [0.0, 0.5]])
    np.testing.assert_allclose(mat_pow_apply(T0, v, 2), [0.25, 0.5])
    with pytest.raises(ValueError):
        mat_pow_apply(M, v, -1)


def test_expm_examples():
    np.testing.assert_allclose(expm(np.zeros((3, 3))), np.eye(3))
    np.testing.assert_allclose(expm(np.diag([1.0, -1.0])), np.diag([np.e, 1 / np.e]), rtol=1e-14)
    A = np.array([[-1.0, 1.0], [0.0, -1.0]])
    e = np.exp(-1.0)
    np.testing.assert_allclose(expm(A), [[e, e], [0, e]], rtol=1e-14)


def test_expm_doubling_and_scipy():
    rng = np.random.default_rng(1)
    for _ in range(200):
        d = int(rng.integers(1, 7))
        M = rng.standard_normal((d, d))
        M *= rng.uniform(0, 5) / max(np.abs(M).sum(axis=0).max(), 1e-12)
        E = expm(M)
        half = expm(M / 2)
        assert np.abs(E - half @ half).max() <= 1e-11 * np.abs(E).max()
        np.testing.assert_allclose(E, scipy.linalg.expm(M), rtol=1e-12, atol=1e-13)


def test_expm_complex():
    G = np.array([[0.0, 1.0], [-1.0, 0.0]]) * 1j
    np.testing.assert_allclose(expm(G), scipy.linalg.expm(G), atol=1e-14)


def test_logm_examples():
    np.testing.assert_allclose(logm_2x2(np.eye(2)), np.zeros((2, 2)), atol=1e-15)
    np.testing.assert_allclose(logm_2x2(np.diag([np.e, np.e**2])), np.diag([1.0, 2.0]), atol=1e-14)
    q = 0.99
    K0 = qubit_kraus(q, 2 * q / (1 + q * q))
    np.testing.assert_allclose(expm(logm_2x2(K0)), K0, atol=1e-10)


def test_logm_round_trip_random():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        M /= np.linalg.norm(M, 2) * rng.uniform(1.0, 3.0)
        eig = np.linalg.eigvals(M)
        if np.any((eig.real < 0) & (np.abs(eig.imag) < 1e-6)):
            continue
        assert np.abs(expm(logm_2x2(M)) - M).max() <= 1e-9
        np.testing.assert_allclose(logm_2x2(M), scipy.linalg.logm(M), atol=1e-8)


def test_logm_defective_and_close_eigenvalues():
    J = np.array([[0.5, 1.0], [0.0, 0.5]])
    np.testing.assert_allclose(expm(logm_2x2(J)), J, atol=1e-13)
    C = np.array([[0.5, 1.0], [1e-12, 0.5]])
    np.testing.assert_allclose(expm(logm_2x2(C)), C, atol=1e-10)


def test_logm_branch_cut():
    with pytest.raises(BranchCutHit):
        logm_2x2(np.diag([-1.0, 1.0]))
    with pytest.raises(BranchCutHit):
        logm_2x2(np.diag([0.0, 1.0]))


def test_adjugate_examples():
    a, b, c, d = 1.5, -2.0, 0.25, 3.0
    np.testing.assert_allclose(adjugate([[a, b], [c, d]]), [[d, -b], [-c, a]])
    for d in range(1, 7):
        np.testing.assert_allclose(adjugate(np.eye(d)), np.eye(d), atol=1e-14)
    np.testing.assert_allclose(adjugate([[1.0, -1.0], [-0.5, 1.0]]), [[1, 1], [0.5, 1]])


def test_adjugate_identity_random_and_singular():
    rng = np.random.default_rng(3)
    for _ in range(300):
        d = int(rng.integers(1, 7))
        M = rng.standard_normal((d, d))
        tol = 1e-9 * max(1.0, np.abs(M).max()) ** d
        np.testing.assert_allclose(M @ adjugate(M), np.linalg.det(M) * np.eye(d), atol=tol)
    S = np.ones((5, 5))
    assert np.abs(S @ adjugate(S)).max() < 1e-9


def test_adjugate_stack_and_limits():
    rng = np.random.default_rng(4)
    stack = rng.standard_normal((4, 3, 3))
    np.testing.assert_allclose(adjugate(stack)[2], adjugate(stack[2]))
    with pytest.raises(ValueError):
        adjugate(np.eye(11))
