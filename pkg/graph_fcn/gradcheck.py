"""Central finite-difference checks of reverse-mode gradients."""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from graph_fcn.backbone import BackboneConfig, init_params
from graph_fcn.data import Sample
from graph_fcn.graph import GraphConfig
from graph_fcn.model import ModelConfig
from graph_fcn.tensor import backward, no_grad
from graph_fcn.training import sample_loss

DEFAULT_TOLERANCE = 1e-4


def relative_error(analytic, numeric, floor=1e-5):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


@dataclass
class GradCheckResult:
    # (input index, flat element index, analytic, numeric, relative error)
    entries: List[Tuple[int, int, float, float, float]]

    @property
    def max_error(self):
        return max((e[4] for e in self.entries), default=0.0)

    def passed(self, tol=DEFAULT_TOLERANCE):
        return self.max_error < tol

    def worst(self):
        return max(self.entries, key=lambda e: e[4]) if self.entries else None


def gradient_check(fn, inputs, count=50, seed=0, step=1e-5):
    """Compare backward(fn()) against central differences on `count` sampled elements of `inputs`."""
    for var in inputs:
        var.zero_grad()
    backward(fn())
    analytic = [var.grad.copy() for var in inputs]

    sizes = np.array([var.value.size for var in inputs])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(offsets[-1], size=min(count, offsets[-1]), replace=False))

    entries = []
    with no_grad():
        for flat in picks.tolist():
            k = int(np.searchsorted(offsets, flat, side='right') - 1)
            index = flat - int(offsets[k])
            values = inputs[k].value.reshape(-1)
            original = values[index]
            values[index] = original + step
            plus = fn().item()
            values[index] = original - step
            minus = fn().item()
            values[index] = original
            numeric = (plus - minus) / (2 * step)
            a = float(analytic[k].reshape(-1)[index])
            entries.append((k, index, a, numeric, relative_error(a, numeric)))
    for var in inputs:
        var.zero_grad()
    return GradCheckResult(entries)


def check_param_gradients(loss_fn, params, count=50, seed=0, step=1e-5):
    return gradient_check(loss_fn, [params[name] for name in params], count=count, seed=seed, step=step)


def full_model_check(seed=0, count=50, lambda_node=1.0):
    """Gradient check of the complete dual loss on a random 16×16 two-class image."""
    rng = np.random.default_rng(seed)
    backbone = BackboneConfig(in_channels=3, c1=4, c2=6, node_stride=4, num_classes=2)
    model_cfg = ModelConfig.build(backbone, hidden_dim=8, graph=GraphConfig(neighbors=4, sigma=1.0))
    sample = Sample(image=rng.uniform(size=(3, 16, 16)),
                    labels=rng.integers(0, 2, size=(16, 16)).astype(np.uint8), id='gradcheck')
    params = init_params(backbone, seed, gcn_cfg=model_cfg.gcn)

    def loss_fn():
        return sample_loss(sample, params, model_cfg, lambda_node).total
    return check_param_gradients(loss_fn, params, count=count, seed=seed)
