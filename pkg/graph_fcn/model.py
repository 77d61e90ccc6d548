"""Graph-FCN assembly: backbone, grid graph and GCN head; inference uses pixel logits only."""

import os
from dataclasses import dataclass
from multiprocessing.pool import ThreadPool

import numpy as np
from dotenv import load_dotenv

from graph_fcn.backbone import BackboneConfig, backbone_forward
from graph_fcn.errors import ConfigError
from graph_fcn.gcn import GcnConfig, gcn_forward
from graph_fcn.graph import GraphConfig, build_grid_graph, grid_propagation
from graph_fcn.metrics import ConfusionMatrix
from graph_fcn.tensor import constant, no_grad

load_dotenv()


@dataclass(frozen=True)
class ModelConfig:
    backbone: BackboneConfig
    gcn: GcnConfig
    graph: GraphConfig

    @classmethod
    def build(cls, backbone=None, hidden_dim=64, graph=None):
        backbone = backbone or BackboneConfig()
        gcn = GcnConfig(in_dim=backbone.c1 + backbone.c2 + 2, hidden_dim=hidden_dim,
                        num_classes=backbone.num_classes)
        return cls(backbone=backbone, gcn=gcn, graph=graph or GraphConfig())


@dataclass(frozen=True)
class ModelOutput:
    pixel_logits: object
    node_logits: object
    graph: object


def node_head(features, params, model_cfg, labels=None):
    """Grid graph on the backbone features and GCN logits for its nodes."""
    _, h, w = features.f1.shape
    adjacency, ahat = grid_propagation(h, w, model_cfg.graph.neighbors, model_cfg.graph.sigma,
                                       model_cfg.graph.symmetrize)
    graph = build_grid_graph(features.f1, features.f2_up, adjacency, labels=labels,
                             node_stride=model_cfg.backbone.node_stride)
    return gcn_forward(ahat, graph.annotations, params, model_cfg.gcn), graph


def model_forward(image, params, model_cfg, labels=None):
    features = backbone_forward(constant(image), params, model_cfg.backbone)
    node_logits, graph = node_head(features, params, model_cfg, labels=labels)
    return ModelOutput(pixel_logits=features.pixel_logits, node_logits=node_logits, graph=graph)


def predict(image, params, backbone_cfg):
    """Argmax label map from the pixel head; the GCN head never runs at inference."""
    with no_grad():
        logits = backbone_forward(constant(image), params, backbone_cfg).pixel_logits.value
    return logits.argmax(axis=0).astype(np.uint8)


def eval_threads():
    configured = os.getenv('GRAPHFCN_THREADS')
    if configured:
        try:
            return max(1, int(configured))
        except ValueError:
            raise ConfigError('GRAPHFCN_THREADS must be an integer, got %r' % configured) from None
    return os.cpu_count() or 1


def evaluate(samples, params, backbone_cfg, threads=None):
    """Confusion matrix over `samples`, one image per worker, summed at the end."""
    threads = threads or eval_threads()

    def _one(sample):
        cm = ConfusionMatrix(backbone_cfg.num_classes)
        return cm.accumulate(predict(sample.image, params, backbone_cfg), sample.labels)

    total = ConfusionMatrix(backbone_cfg.num_classes)
    if threads == 1 or len(samples) < 2:
        partials = [_one(sample) for sample in samples]
    else:
        with ThreadPool(processes=min(threads, len(samples))) as pool:
            partials = pool.map(_one, samples)
    for cm in partials:
        total.merge(cm)
    return total
