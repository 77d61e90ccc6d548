"""
Spectral graph filtering, used as the reference for the fast propagation operator.

The normalized Laplacian L = I - D^-1/2 A D^-1/2 has an orthogonal decomposition
L = U diag(lambda) U^T. Filtering a node signal x with g means U g(lambda) U^T x.
With a first-order Chebyshev approximation and theta1 = -theta0 this collapses to
theta0 (I + D^-1/2 A D^-1/2) x, which needs no eigendecomposition. The GCN layer
uses the renormalized form D^-1/2 (I + A) D^-1/2 of the same operator, where D is
now the degree matrix of I + A.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from graph_fcn.errors import ConvergenceError, ParameterError, ValidationError
from graph_fcn.sparse import SparseMatrix

JACOBI_MAX_ORDER = 64


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.T


@dataclass(frozen=True)
class FilterCoeffs:
    theta0: float
    theta1: Optional[float] = None

    def __post_init__(self):
        if self.theta1 is None:
            object.__setattr__(self, 'theta1', -self.theta0)
        if not (math.isfinite(self.theta0) and math.isfinite(self.theta1)):
            raise ParameterError('filter coefficients must be finite')

    def response(self, eigenvalue):
        return self.theta0 - self.theta1 * (1.0 - eigenvalue)


class PropagationMatrix(SparseMatrix):
    """Renormalized operator D^-1/2 (I + A) D^-1/2, with D the degrees of I + A."""

    def __init__(self, matrix, degrees):
        super(PropagationMatrix, self).__init__(matrix)
        self.degrees = np.asarray(degrees, dtype=np.float64)


def _check_adjacency(A, zero_diagonal=False):
    if not A.is_symmetric(tol=1e-12):
        raise ValidationError('adjacency must be symmetric')
    if A.nnz and A.csr.data.min() < 0:
        raise ValidationError('adjacency must be nonnegative')
    if zero_diagonal and np.any(A.diagonal() != 0):
        raise ValidationError('adjacency must have a zero diagonal')


def _inverse_sqrt_degrees(A):
    degrees = A.row_sums()
    inv_sqrt = np.zeros_like(degrees)
    # isolated nodes: D^-1/2 taken as 0
    connected = degrees > 0
    inv_sqrt[connected] = degrees[connected] ** -0.5
    return inv_sqrt


def normalized_adjacency(A):
    """D^-1/2 A D^-1/2 as a scipy sparse matrix."""
    d = sp.diags(_inverse_sqrt_degrees(A))
    return (d @ A.csr @ d).tocsr()


def normalized_laplacian(A):
    _check_adjacency(A)
    n = A.shape[0]
    return np.eye(n) - normalized_adjacency(A).toarray()


def _rotate(M, V, p, q):
    """One Jacobi rotation zeroing M[p, q] (and M[q, p])."""
    apq = M[p, q]
    theta = (M[q, q] - M[p, p]) / (2.0 * apq)
    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    s = t * c

    col_p, col_q = M[:, p].copy(), M[:, q].copy()
    M[:, p] = c * col_p - s * col_q
    M[:, q] = s * col_p + c * col_q
    row_p, row_q = M[p, :].copy(), M[q, :].copy()
    M[p, :] = c * row_p - s * row_q
    M[q, :] = s * row_p + c * row_q
    M[p, q] = M[q, p] = 0.0

    vec_p, vec_q = V[:, p].copy(), V[:, q].copy()
    V[:, p] = c * vec_p - s * vec_q
    V[:, q] = s * vec_p + c * vec_q


def _off_diagonal_norm(M):
    off = M - np.diag(np.diag(M))
    return math.sqrt(float((off * off).sum()))


def eigendecompose(M, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi eigensolver for small symmetric matrices; eigenvalues ascending."""
    M = np.array(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError('matrix must be square, got shape %s' % (M.shape,))
    n = M.shape[0]
    if n > JACOBI_MAX_ORDER:
        raise ParameterError('Jacobi oracle limited to n <= %d, got %d' % (JACOBI_MAX_ORDER, n))
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10:
        raise ValidationError('matrix must be symmetric')

    M = 0.5 * (M + M.T)
    V = np.eye(n)
    # tolerance scales with the matrix norm once that exceeds 1
    threshold = tol * max(1.0, float(np.linalg.norm(M)))
    sweeps = 0
    while _off_diagonal_norm(M) >= threshold:
        if sweeps == max_sweeps:
            raise ConvergenceError('Jacobi did not converge in %d sweeps' % max_sweeps)
        for p in range(n - 1):
            for q in range(p + 1, n):
                if M[p, q] != 0.0:
                    _rotate(M, V, p, q)
        sweeps += 1

    eigenvalues = np.diag(M).copy()
    order = np.argsort(eigenvalues, kind='stable')
    return EigenSystem(eigenvalues=eigenvalues[order], eigenvectors=V[:, order])


def spectral_filter(L, x, g):
    """U g(lambda) U^T x via an exact eigendecomposition of L."""
    system = eigendecompose(L)
    U = system.eigenvectors
    response = np.array([g(lam) for lam in system.eigenvalues], dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    spectrum = U.T @ x
    if spectrum.ndim == 1:
        return U @ (response * spectrum)
    return U @ (response[:, None] * spectrum)


def chebyshev_filter(A, x, coeffs):
    """theta0 x - theta1 D^-1/2 A D^-1/2 x, no eigendecomposition."""
    _check_adjacency(A)
    x = np.asarray(x, dtype=np.float64)
    return coeffs.theta0 * x - coeffs.theta1 * (normalized_adjacency(A) @ x)


def chebyshev_first_order(A, x, theta0):
    return chebyshev_filter(A, x, FilterCoeffs(theta0))


def renormalized_propagation(A):
    _check_adjacency(A, zero_diagonal=True)
    self_looped = A.csr + sp.identity(A.shape[0], format='csr')
    degrees = np.asarray(self_looped.sum(axis=1)).ravel()
    d = sp.diags(degrees ** -0.5)
    return PropagationMatrix(d @ self_looped @ d, degrees)


def propagate(ahat, x, steps):
    """Apply the propagation matrix `steps` times (repeated Laplacian smoothing)."""
    x = np.asarray(x, dtype=np.float64)
    for _ in range(steps):
        x = ahat @ x
    return x
