"""Canonical sparse matrix shared by the graph, spectral and autodiff modules."""

import numpy as np
import scipy.sparse as sp

from graph_fcn.errors import DimensionError, ValidationError


class SparseMatrix(object):
    """CSR matrix kept canonical: sorted row-major, duplicates summed, no stored zeros."""

    def __init__(self, matrix):
        csr = sp.csr_matrix(matrix, dtype=np.float64)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        if csr.nnz and not np.all(np.isfinite(csr.data)):
            raise ValidationError('sparse matrix holds non-finite weights')
        self._csr = csr

    @classmethod
    def from_triples(cls, shape, rows, cols, weights):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        m, n = shape
        if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise DimensionError('triple index out of range for shape %s' % (tuple(shape),))
        return cls(sp.coo_matrix((weights, (rows, cols)), shape=(m, n)))

    @classmethod
    def identity(cls, n):
        return cls(sp.identity(n, format='csr'))

    @classmethod
    def zeros(cls, m, n=None):
        return cls(sp.csr_matrix((m, m if n is None else n)))

    @property
    def shape(self):
        return self._csr.shape

    @property
    def nnz(self):
        return self._csr.nnz

    @property
    def csr(self):
        return self._csr

    def triples(self):
        """(row, col, weight) entries in row-major order."""
        coo = self._csr.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def row_sums(self):
        return np.asarray(self._csr.sum(axis=1)).ravel()

    def diagonal(self):
        return self._csr.diagonal()

    def transpose(self):
        return SparseMatrix(self._csr.T)

    def to_dense(self):
        return self._csr.toarray()

    def is_symmetric(self, tol=0.0):
        if self.shape[0] != self.shape[1]:
            return False
        diff = self._csr - self._csr.T
        return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= tol

    def __matmul__(self, x):
        return self._csr @ x

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix) or other.shape != self.shape:
            return NotImplemented
        return self.triples() == other.triples()

    def __repr__(self):
        return 'SparseMatrix(shape=%s, nnz=%d)' % (self.shape, self.nnz)
