"""
Graph model on the backbone's feature grid.

Every cell of the h×w stride-s feature map becomes a node. A node's annotation is
the concatenation of the two backbone feature vectors at that cell plus its
normalized (row, col) location; its label is pooled from the raw label image.
Each node links to its `l` nearest other nodes, weighted by a Gaussian kernel.
"""

import functools
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import shortest_path
from sklearn.metrics.pairwise import euclidean_distances

from graph_fcn.errors import ConfigError, DimensionError, ParameterError
from graph_fcn.sparse import SparseMatrix
from graph_fcn.spectral import renormalized_propagation
from graph_fcn.tensor import Var, concat, constant, reshape, transpose

IGNORE = 255
SYMMETRIZE_MODES = ('min', 'max')


@dataclass(frozen=True)
class GraphConfig:
    neighbors: int = 4
    sigma: float = 1.0
    symmetrize: str = 'min'

    def __post_init__(self):
        if self.neighbors < 1:
            raise ConfigError('graph.neighbors must be >= 1, got %r' % self.neighbors)
        if not self.sigma > 0:
            raise ConfigError('graph.sigma must be positive, got %r' % self.sigma)
        if self.symmetrize not in SYMMETRIZE_MODES:
            raise ConfigError("graph.symmetrize must be 'min' or 'max', got %r" % (self.symmetrize,))


@dataclass(frozen=True)
class GridGraph:
    h: int
    w: int
    annotations: Var
    adjacency: SparseMatrix
    node_labels: Optional[np.ndarray]
    node_stride: int

    @property
    def num_nodes(self):
        return self.h * self.w

    def node_index(self, row, col):
        if not (0 <= row < self.h and 0 <= col < self.w):
            raise ParameterError('cell (%d, %d) outside %dx%d grid' % (row, col, self.h, self.w))
        return row * self.w + col

    def node_position(self, node):
        if not 0 <= node < self.num_nodes:
            raise ParameterError('node %d outside grid of %d nodes' % (node, self.num_nodes))
        return divmod(node, self.w)


def grid_coordinates(h, w):
    """Integer (row, col) of every node, node n at (n div w, n mod w)."""
    rows, cols = np.divmod(np.arange(h * w), w)
    return np.stack([rows, cols], axis=1).astype(np.float64)


def nearest_neighbors(h, w, l):
    """Each node's l nearest other nodes (n×l indices) and the squared distance matrix."""
    n = h * w
    if n < 2:
        raise ParameterError('grid %dx%d has fewer than 2 nodes' % (h, w))
    if not 1 <= l < n:
        raise ParameterError('neighbor count l=%d must satisfy 1 <= l < %d' % (l, n))
    coords = grid_coordinates(h, w)
    # integer coordinates keep the squared distances exact
    d2 = np.rint(euclidean_distances(coords, squared=True))
    np.fill_diagonal(d2, np.inf)
    # stable sort: equal distances keep ascending node order
    nearest = np.argsort(d2, axis=1, kind='stable')[:, :l]
    return nearest, d2


def build_adjacency(h, w, l, sigma, symmetrize='min'):
    """
    Gaussian-weighted kNN graph on the h×w grid.

    symmetrize='min' keeps an edge only when both ends chose each other (mutual kNN);
    'max' keeps it when either did. On a 3×3 grid with l=4 the corners pick the
    center among their four nearest, so only 'min' leaves the center with exactly
    its 4-neighborhood.
    """
    if not sigma > 0:
        raise ParameterError('sigma must be positive, got %r' % sigma)
    if symmetrize not in SYMMETRIZE_MODES:
        raise ParameterError("symmetrize must be 'min' or 'max', got %r" % (symmetrize,))
    nearest, d2 = nearest_neighbors(h, w, l)
    n = h * w
    rows = np.repeat(np.arange(n), l)
    cols = nearest.reshape(-1)
    weights = np.exp(-d2[rows, cols] / (2.0 * sigma * sigma))
    if np.any(weights <= 0):
        raise ParameterError('sigma=%r underflows the Gaussian kernel for l=%d' % (sigma, l))

    directed = SparseMatrix.from_triples((n, n), rows, cols, weights).csr
    if symmetrize == 'max':
        return SparseMatrix(directed.maximum(directed.T))
    return SparseMatrix(directed.minimum(directed.T))


@functools.lru_cache(maxsize=32)
def grid_propagation(h, w, l, sigma, symmetrize='min'):
    """Adjacency and renormalized propagation matrix for an h×w grid, cached per size."""
    adjacency = build_adjacency(h, w, l, sigma, symmetrize)
    return adjacency, renormalized_propagation(adjacency)


def build_node_annotations(f1, f2_up):
    if f1.value.ndim != 3 or f2_up.value.ndim != 3 or f1.shape[1:] != f2_up.shape[1:]:
        raise DimensionError('feature maps not spatially aligned: %s vs %s' % (f1.shape, f2_up.shape))
    c1, h, w = f1.shape
    c2 = f2_up.shape[0]
    rows = reshape(transpose(f1, (1, 2, 0)), (h * w, c1))
    cols = reshape(transpose(f2_up, (1, 2, 0)), (h * w, c2))
    location = grid_coordinates(h, w)
    location[:, 0] = location[:, 0] / (h - 1) if h > 1 else 0.0
    location[:, 1] = location[:, 1] / (w - 1) if w > 1 else 0.0
    return concat([rows, cols, constant(location)], axis=1)


def pool_node_labels(labels, node_stride):
    """Majority label per stride×stride cell; IGNORE pixels do not vote."""
    labels = np.asarray(labels)
    H, W = labels.shape
    s = node_stride
    if s < 1 or H < s or W < s:
        raise ParameterError('label map %dx%d smaller than node stride %d' % (H, W, s))
    h, w = -(-H // s), -(-W // s)
    padded = np.full((h * s, w * s), IGNORE, dtype=np.int64)
    padded[:H, :W] = labels
    cells = padded.reshape(h, s, w, s).transpose(0, 2, 1, 3).reshape(h, w, s * s)

    voting = labels[labels != IGNORE]
    if voting.size == 0:
        return np.full(h * w, IGNORE, dtype=np.int64)
    classes = np.arange(int(voting.max()) + 1)
    counts = (cells[..., None] == classes).sum(axis=2)
    # argmax picks the lowest class index on ties
    pooled = counts.argmax(axis=2)
    pooled[counts.sum(axis=2) == 0] = IGNORE
    return pooled.reshape(-1)


def build_grid_graph(f1, f2_up, adjacency, labels=None, node_stride=1):
    _, h, w = f1.shape
    node_labels = None
    if labels is not None:
        node_labels = pool_node_labels(labels, node_stride)
        if node_labels.shape[0] != h * w:
            raise DimensionError('label grid has %d nodes, feature grid %dx%d' % (node_labels.shape[0], h, w))
    return GridGraph(h=h, w=w, annotations=build_node_annotations(f1, f2_up), adjacency=adjacency,
                     node_labels=node_labels, node_stride=node_stride)


def receptive_field(adjacency, node, hops):
    n = adjacency.shape[0]
    if not 0 <= node < n:
        raise ParameterError('node %d outside graph of %d nodes' % (node, n))
    if hops < 0:
        raise ParameterError('hops must be >= 0, got %d' % hops)
    distances = shortest_path(adjacency.csr, directed=False, unweighted=True, indices=node)
    return set(np.flatnonzero(distances <= hops).tolist())


def format_triples(adjacency):
    return '\n'.join('%d %d %.17g' % (r, c, v) for r, c, v in adjacency.triples())
