"""
Dual-loss training: pixel cross-entropy on the backbone head (L1) plus node
cross-entropy on the GCN head (L2), optimized with Adam in two phases.

Phase 1 (the first `phase1_iters` iterations) trains only the GCN head on top of a
frozen backbone; phase 2 trains everything at `phase2_lr`. Batch size is 1.
"""

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from graph_fcn.backbone import backbone_forward, init_params
from graph_fcn.errors import ConfigError, NonFiniteError, TrainingError
from graph_fcn.graph import IGNORE
from graph_fcn.metrics import to_json
from graph_fcn.model import evaluate, node_head
from graph_fcn.tensor import backward, constant, no_grad, reshape, softmax_cross_entropy, transpose
from graph_fcn.utils import logger


@dataclass(frozen=True)
class TrainConfig:
    phase1_iters: int = 500
    phase1_lr: float = 0.01
    phase2_lr: float = 1e-4
    weight_decay: float = 1e-4
    lambda_node: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ('phase1_lr', 'phase2_lr', 'eps'):
            if not getattr(self, name) > 0:
                raise ConfigError('train.%s must be positive, got %r' % (name, getattr(self, name)))
        for name in ('weight_decay', 'lambda_node'):
            if not getattr(self, name) >= 0:
                raise ConfigError('train.%s must be >= 0, got %r' % (name, getattr(self, name)))
        for name in ('beta1', 'beta2'):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError('train.%s must lie in [0, 1), got %r' % (name, getattr(self, name)))
        for name in ('phase1_iters', 'epochs'):
            if getattr(self, name) < 0:
                raise ConfigError('train.%s must be >= 0, got %r' % (name, getattr(self, name)))

    @property
    def betas(self):
        return self.beta1, self.beta2

    def without_gcn(self):
        """Plain FCN training: no node loss and no warm-up phase."""
        return replace(self, lambda_node=0.0, phase1_iters=0)

    @classmethod
    def full_scale(cls, **overrides):
        """Full-scale hyperparameters: 8000 warm-up iterations, lr 0.1 then 1e-5, decay 0.1."""
        settings = dict(phase1_iters=8000, phase1_lr=0.1, phase2_lr=1e-5, weight_decay=0.1)
        settings.update(overrides)
        return cls(**settings)


@dataclass
class LossTerms:
    total: object
    l1: object
    l2: object


def pixel_loss(pixel_logits, label_map):
    ncl, H, W = pixel_logits.shape
    rows = reshape(transpose(pixel_logits, (1, 2, 0)), (H * W, ncl))
    return softmax_cross_entropy(rows, np.asarray(label_map).reshape(-1), ignore_index=IGNORE)


def node_loss(node_logits, node_labels):
    return softmax_cross_entropy(node_logits, node_labels, ignore_index=IGNORE)


def loss_terms(pixel_logits, label_map, node_logits, node_labels, lambda_node):
    l1 = pixel_loss(pixel_logits, label_map)
    l2 = node_loss(node_logits, node_labels)
    if lambda_node == 0:
        # exactly the FCN objective, no zero-weighted term on the tape
        return LossTerms(total=l1, l1=l1, l2=l2)
    return LossTerms(total=l1 + l2 * lambda_node, l1=l1, l2=l2)


def total_loss(pixel_logits, label_map, node_logits, node_labels, lambda_node):
    return loss_terms(pixel_logits, label_map, node_logits, node_labels, lambda_node).total


def adam_step(params, lr, weight_decay, betas=(0.9, 0.999), eps=1e-8, step_index=None, names=None):
    """Adam with bias correction and decoupled weight decay; clears all gradients."""
    beta1, beta2 = betas
    for name in (list(params) if names is None else names):
        var = params[name]
        state = params.moments_for(name)
        state.step = state.step + 1 if step_index is None else step_index
        g = var.grad
        if weight_decay:
            var.value = var.value - lr * weight_decay * var.value
        state.m = beta1 * state.m + (1 - beta1) * g
        state.v = beta2 * state.v + (1 - beta2) * g * g
        m_hat = state.m / (1 - beta1 ** state.step)
        v_hat = state.v / (1 - beta2 ** state.step)
        var.value = var.value - lr * m_hat / (np.sqrt(v_hat) + eps)
    params.zero_grad()


def epoch_order(seed, epoch, n):
    return np.random.default_rng([seed, epoch]).permutation(n)


def sample_loss(sample, params, model_cfg, lambda_node, freeze_backbone=False):
    image = constant(sample.image)
    if freeze_backbone:
        with no_grad():
            features = backbone_forward(image, params, model_cfg.backbone)
    else:
        features = backbone_forward(image, params, model_cfg.backbone)
    if lambda_node == 0:
        with no_grad():
            node_logits, graph = node_head(features, params, model_cfg, labels=sample.labels)
    else:
        node_logits, graph = node_head(features, params, model_cfg, labels=sample.labels)
    return loss_terms(features.pixel_logits, sample.labels, node_logits, graph.node_labels, lambda_node)


@dataclass(frozen=True)
class StepRecord:
    iteration: int
    phase: int
    l1: float
    l2: float
    total: float


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    iterations: int
    mean_l1: float
    mean_l2: float
    mean_total: float
    metrics: Optional[dict] = None

    def to_dict(self):
        return {'epoch': self.epoch, 'iterations': self.iterations, 'mean_l1': self.mean_l1,
                'mean_l2': self.mean_l2, 'mean_total': self.mean_total, 'test': self.metrics}


@dataclass
class TrainReport:
    steps: List[StepRecord] = field(default_factory=list)
    epochs: List[EpochRecord] = field(default_factory=list)
    params: object = None

    def to_csv(self):
        out = io.StringIO()
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(['iter', 'L1', 'L2', 'total'])
        for step in self.steps:
            writer.writerow([step.iteration, repr(step.l1), repr(step.l2), repr(step.total)])
        return out.getvalue()

    def metrics_json(self):
        return json.dumps({'epochs': [record.to_dict() for record in self.epochs]}, indent=2)


def train(dataset, model_cfg, train_cfg, test_set=None, params=None, on_epoch=None):
    """Two-phase training over `dataset`; `on_epoch(report)` runs after every epoch."""
    if not dataset:
        raise TrainingError('training set is empty')
    if params is None:
        params = init_params(model_cfg.backbone, train_cfg.seed, gcn_cfg=model_cfg.gcn)
    report = TrainReport(params=params)
    gcn_names = params.names('gcn.')

    iteration = 0
    for epoch in range(train_cfg.epochs):
        sums = np.zeros(3)
        for index in epoch_order(train_cfg.seed, epoch, len(dataset)):
            sample = dataset[index]
            phase = 1 if iteration < train_cfg.phase1_iters else 2
            if phase == 2 and iteration == train_cfg.phase1_iters and iteration > 0:
                logger.info("phase 2 from iteration %d: all parameters at lr %g" % (iteration, train_cfg.phase2_lr))
            try:
                terms = sample_loss(sample, params, model_cfg, train_cfg.lambda_node, freeze_backbone=phase == 1)
                backward(terms.total)
            except NonFiniteError as e:
                raise TrainingError('non-finite loss at iteration %d (sample %s, epoch %d): %s'
                                    % (iteration, sample.id, epoch, e))
            values = (terms.l1.item(), terms.l2.item(), terms.total.item())
            if phase == 1:
                adam_step(params, train_cfg.phase1_lr, train_cfg.weight_decay, train_cfg.betas, train_cfg.eps,
                          names=gcn_names)
            else:
                adam_step(params, train_cfg.phase2_lr, train_cfg.weight_decay, train_cfg.betas, train_cfg.eps)
            if not all(np.isfinite(params[name].value).all() for name in params):
                raise TrainingError('parameters became non-finite at iteration %d (sample %s, L1 %r, L2 %r)'
                                    % (iteration, sample.id, values[0], values[1]))
            iteration += 1
            report.steps.append(StepRecord(iteration, phase, *values))
            sums += values

        count = len(dataset)
        metrics = None
        if test_set:
            metrics = to_json(evaluate(test_set, params, model_cfg.backbone))
        record = EpochRecord(epoch, iteration, *(sums / count).tolist(), metrics=metrics)
        report.epochs.append(record)
        logger.info("training loss for %d epoch: L1 %.4f L2 %.4f total %.4f"
                    % (epoch + 1, record.mean_l1, record.mean_l2, record.mean_total))
        if metrics is not None:
            logger.info("test mIOU for %d epoch: %.4f (acc %.4f, f.w.IU %.4f)"
                        % (epoch + 1, metrics['miou'], metrics['acc'], metrics['fwiu']))
        if on_epoch is not None:
            on_epoch(report)
    return report
