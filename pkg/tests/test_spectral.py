import time

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import path_graph, random_graph
from graph_fcn.errors import ConvergenceError, ParameterError, ValidationError
from graph_fcn.sparse import SparseMatrix
from graph_fcn.spectral import (FilterCoeffs, chebyshev_filter, chebyshev_first_order, eigendecompose,
                                normalized_laplacian, propagate, renormalized_propagation, spectral_filter)


def test_laplacian_small_cases():
    assert_allclose(normalized_laplacian(SparseMatrix([[0.0, 1.0], [1.0, 0.0]])), [[1, -1], [-1, 1]])
    assert_allclose(normalized_laplacian(SparseMatrix.zeros(3)), np.eye(3))


def test_path_laplacian_spectrum():
    system = eigendecompose(normalized_laplacian(path_graph(3)))
    assert_allclose(system.eigenvalues, [0.0, 1.0, 2.0], atol=1e-10)


def test_laplacian_rejects_asymmetric():
    with pytest.raises(ValidationError):
        normalized_laplacian(SparseMatrix([[0.0, 1.0], [0.0, 0.0]]))


def test_eigendecompose_examples():
    assert_allclose(eigendecompose(np.eye(4)).eigenvalues, np.ones(4))
    system = eigendecompose(np.diag([3.0, 1.0]))
    assert_allclose(system.eigenvalues, [1.0, 3.0])
    assert_allclose(np.abs(system.eigenvectors), [[0.0, 1.0], [1.0, 0.0]], atol=1e-12)


def test_eigendecompose_reconstructs_random_symmetric(rng):
    for _ in range(10):
        m = rng.normal(size=(6, 6))
        m = m + m.T
        system = eigendecompose(m)
        U = system.eigenvectors
        assert np.max(np.abs(system.reconstruct() - m)) <= 1e-8
        assert np.max(np.abs(U.T @ U - np.eye(6))) <= 1e-8
        assert np.all(np.diff(system.eigenvalues) >= 0)


def test_eigendecompose_errors():
    with pytest.raises(ValidationError):
        eigendecompose(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        eigendecompose(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ParameterError):
        eigendecompose(np.eye(65))
    m = np.array([[1.0, 1.0], [1.0, 2.0]])
    with pytest.raises(ConvergenceError):
        eigendecompose(m, max_sweeps=0)


def test_spectral_filter_identity_and_laplacian(rng):
    adjacency = random_graph(rng, 6)
    L = normalized_laplacian(adjacency)
    x = rng.normal(size=6)
    assert_allclose(spectral_filter(L, x, lambda lam: 1.0), x, atol=1e-8)
    assert_allclose(spectral_filter(L, x, lambda lam: lam), L @ x, atol=1e-8)


def test_chebyshev_small_cases(rng):
    x = rng.normal(size=(4, 2))
    assert_allclose(chebyshev_first_order(SparseMatrix.zeros(4), x, 0.7), 0.7 * x)
    assert_allclose(chebyshev_first_order(random_graph(rng, 4), x, 0.0), np.zeros((4, 2)))


def test_chebyshev_equals_spectral_filter():
    rng = np.random.default_rng(7)
    start = time.time()
    for _ in range(50):
        n = int(rng.integers(2, 17))
        adjacency = random_graph(rng, n, p=float(rng.uniform(0.1, 0.6)))
        x = rng.normal(size=n)
        theta0 = float(rng.uniform(-2, 2))
        L = normalized_laplacian(adjacency)
        fast = chebyshev_first_order(adjacency, x, theta0)
        exact = spectral_filter(L, x, lambda lam: theta0 * (2.0 - lam))
        assert np.max(np.abs(fast - exact)) <= 1e-8
        assert np.max(np.abs(fast - theta0 * (2 * np.eye(n) - L) @ x)) <= 1e-8
    assert time.time() - start < 5.0


def test_general_first_order_response(rng):
    adjacency = random_graph(rng, 7)
    x = rng.normal(size=7)
    coeffs = FilterCoeffs(theta0=0.4, theta1=1.3)
    exact = spectral_filter(normalized_laplacian(adjacency), x, coeffs.response)
    assert_allclose(chebyshev_filter(adjacency, x, coeffs), exact, atol=1e-8)
    assert FilterCoeffs(0.5).theta1 == -0.5


def test_laplacian_spectra_in_range():
    rng = np.random.default_rng(11)
    start = time.time()
    for _ in range(50):
        n = int(rng.integers(2, 17))
        adjacency = random_graph(rng, n, p=float(rng.uniform(0.0, 0.6)), connected=bool(rng.integers(0, 2)))
        lam = eigendecompose(normalized_laplacian(adjacency)).eigenvalues
        assert lam.min() >= -1e-8 and lam.max() <= 2 + 1e-8
        ahat = renormalized_propagation(adjacency)
        mu = eigendecompose(ahat.to_dense()).eigenvalues
        assert mu.min() >= -1 - 1e-8 and mu.max() <= 1 + 1e-8
    assert time.time() - start < 5.0


def test_renormalized_propagation_small_cases():
    assert_allclose(renormalized_propagation(SparseMatrix.zeros(1)).to_dense(), [[1.0]])
    ahat = renormalized_propagation(SparseMatrix([[0.0, 1.0], [1.0, 0.0]]))
    assert_allclose(ahat.degrees, [2.0, 2.0])
    assert_allclose(ahat.to_dense(), [[0.5, 0.5], [0.5, 0.5]])


def test_renormalized_propagation_connected_spectrum(rng):
    adjacency = random_graph(rng, 8)
    mu = eigendecompose(renormalized_propagation(adjacency).to_dense()).eigenvalues
    assert mu.max() == pytest.approx(1.0, abs=1e-8)
    assert mu.min() >= -1 - 1e-8


def test_renormalized_propagation_needs_zero_diagonal():
    with pytest.raises(ValidationError):
        renormalized_propagation(SparseMatrix(np.eye(2)))


def test_similarity_transforms_are_stochastic(rng):
    adjacency = random_graph(rng, 9)
    ahat = renormalized_propagation(adjacency)
    d = np.sqrt(ahat.degrees)
    row_stochastic = np.diag(1 / d) @ ahat.to_dense() @ np.diag(d)
    column_stochastic = np.diag(d) @ ahat.to_dense() @ np.diag(1 / d)
    assert_allclose(row_stochastic.sum(axis=1), np.ones(9), atol=1e-10)
    assert_allclose(column_stochastic.sum(axis=0), np.ones(9), atol=1e-10)


def test_repeated_propagation_oversmooths():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 11))
        ahat = renormalized_propagation(random_graph(rng, n, p=0.8))
        x = rng.uniform(0.5, 1.5, size=n)
        smoothed = propagate(ahat, x, 200)
        ratio = smoothed / np.sqrt(ahat.degrees)
        assert np.max(np.abs(ratio - ratio.mean())) <= 1e-6 * np.abs(ratio).max()
