"""Two-layer graph convolutional head: relu(Â X Θ1), then Â H Θ2 as node logits."""

from dataclasses import dataclass

from graph_fcn.errors import ConfigError, DimensionError
from graph_fcn.params import glorot_uniform
from graph_fcn.tensor import matmul, relu, sparse_dense_matmul

GCN_LAYERS = 2


@dataclass(frozen=True)
class GcnConfig:
    in_dim: int
    hidden_dim: int = 64
    num_classes: int = 4

    def __post_init__(self):
        for name in ('in_dim', 'hidden_dim', 'num_classes'):
            if getattr(self, name) < 1:
                raise ConfigError('gcn.%s must be positive, got %r' % (name, getattr(self, name)))

    def weight_shapes(self):
        return [(self.in_dim, self.hidden_dim), (self.hidden_dim, self.num_classes)]


def init_gcn_params(cfg, rng, params):
    for k, shape in enumerate(cfg.weight_shapes(), start=1):
        params.add('gcn.theta%d' % k, glorot_uniform(rng, shape, shape[0], shape[1]))
    return params


def gcn_layer(ahat, X, theta, apply_relu):
    out = sparse_dense_matmul(ahat, matmul(X, theta))
    return relu(out) if apply_relu else out


def gcn_forward(ahat, annotations, params, cfg):
    if annotations.value.ndim != 2 or annotations.shape[1] != cfg.in_dim:
        raise DimensionError('gcn layer 1: annotations %s, expected width %d' % (annotations.shape, cfg.in_dim))
    x = annotations
    for k, shape in enumerate(cfg.weight_shapes(), start=1):
        theta = params['gcn.theta%d' % k]
        if theta.shape != shape:
            raise DimensionError('gcn layer %d: weight %s, expected %s' % (k, theta.shape, shape))
        # no activation on the output layer; the losses own normalization
        x = gcn_layer(ahat, x, theta, apply_relu=k < GCN_LAYERS)
    return x
