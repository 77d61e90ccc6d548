import numpy as np
import pytest
import scipy.sparse as sp

from graph_fcn.sparse import SparseMatrix


def random_graph(rng, n, p=0.5, connected=True):
    """Symmetric weighted adjacency: a random spanning tree plus Erdos-Renyi edges."""
    dense = np.zeros((n, n))
    if connected:
        for child in range(1, n):
            parent = rng.integers(0, child)
            dense[child, parent] = rng.uniform(0.5, 1.0)
    extra = np.triu(rng.uniform(size=(n, n)) < p, k=1)
    dense[extra.T] = rng.uniform(0.5, 1.0, size=int(extra.sum()))
    dense = np.tril(dense, k=-1)
    return SparseMatrix(sp.csr_matrix(dense + dense.T))


def path_graph(n):
    rows = np.arange(n - 1)
    return SparseMatrix.from_triples((n, n), np.concatenate([rows, rows + 1]),
                                     np.concatenate([rows + 1, rows]), np.ones(2 * (n - 1)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
