"""
Miniature FCN-16s style encoder.

log2(s) conv/relu/pool blocks bring the image to stride s (features f1), one more
block reaches stride 2s (features f2). The pixel head scores f2 with a 1×1
convolution, upsamples it ×2, adds the 1×1-scored f1 (skip fusion) and upsamples
the sum ×s back to image resolution. Inputs whose sides are not multiples of s
are zero padded to ceil(H/s)·s first and the logits cropped back, so the node
grid is ceil(H/s) × ceil(W/s).
"""

from dataclasses import dataclass

import numpy as np

from graph_fcn.errors import ConfigError, DimensionError
from graph_fcn.gcn import init_gcn_params
from graph_fcn.params import ModelParams, glorot_uniform
from graph_fcn.tensor import Var, conv2d, crop, maxpool2d, pad2d, relu, upsample_nearest


@dataclass(frozen=True)
class BackboneConfig:
    in_channels: int = 3
    c1: int = 32
    c2: int = 64
    node_stride: int = 8
    num_classes: int = 4

    def __post_init__(self):
        for name in ('in_channels', 'c1', 'c2', 'num_classes'):
            if getattr(self, name) < 1:
                raise ConfigError('backbone.%s must be positive, got %r' % (name, getattr(self, name)))
        s = self.node_stride
        if s < 2 or s & (s - 1):
            raise ConfigError('backbone.node_stride must be a power of two >= 2, got %r' % s)

    @property
    def num_blocks(self):
        return self.node_stride.bit_length()

    def block_channels(self):
        """Output channels of each conv block; the last two are c1 and c2."""
        to_f1 = self.num_blocks - 1
        return [max(1, self.c1 >> (to_f1 - 1 - b)) for b in range(to_f1)] + [self.c2]

    def grid_shape(self, H, W):
        s = self.node_stride
        return -(-H // s), -(-W // s)

    @classmethod
    def from_params(cls, params):
        """Recover the architecture from parameter shapes (e.g. a loaded checkpoint)."""
        blocks = len(params.names('backbone.block'))
        if blocks < 4 or blocks % 2:
            raise ConfigError('parameters do not describe a backbone (%d block tensors)' % blocks)
        num_blocks = blocks // 2
        return cls(in_channels=params['backbone.block0.weight'].shape[1],
                   c1=params['backbone.block%d.weight' % (num_blocks - 2)].shape[0],
                   c2=params['backbone.block%d.weight' % (num_blocks - 1)].shape[0],
                   node_stride=2 ** (num_blocks - 1),
                   num_classes=params['backbone.score1.weight'].shape[0])


@dataclass(frozen=True)
class BackboneOutput:
    f1: Var
    f2_up: Var
    pixel_logits: Var


def init_params(cfg, seed, gcn_cfg=None, params=None):
    """Glorot-uniform kernels, zero biases; GCN weights (if requested) drawn afterwards."""
    rng = np.random.default_rng(seed)
    params = ModelParams() if params is None else params
    c_in = cfg.in_channels
    for b, c_out in enumerate(cfg.block_channels()):
        params.add('backbone.block%d.weight' % b, glorot_uniform(rng, (c_out, c_in, 3, 3), c_in * 9, c_out * 9))
        params.add('backbone.block%d.bias' % b, np.zeros(c_out))
        c_in = c_out
    for head, width in (('score1', cfg.c1), ('score2', cfg.c2)):
        params.add('backbone.%s.weight' % head,
                   glorot_uniform(rng, (cfg.num_classes, width, 1, 1), width, cfg.num_classes))
        params.add('backbone.%s.bias' % head, np.zeros(cfg.num_classes))
    if gcn_cfg is not None:
        init_gcn_params(gcn_cfg, rng, params)
    return params


def _block(x, params, b):
    x = conv2d(x, params['backbone.block%d.weight' % b], stride=1, pad=1,
               bias=params['backbone.block%d.bias' % b])
    return maxpool2d(relu(x), size=2, stride=2)


def _score(x, params, head):
    return conv2d(x, params['backbone.%s.weight' % head], bias=params['backbone.%s.bias' % head])


def backbone_forward(x, params, cfg):
    if x.value.ndim != 3 or x.shape[0] != cfg.in_channels:
        raise DimensionError('expected a %d×H×W image, got %s' % (cfg.in_channels, x.shape))
    _, H, W = x.shape
    s = cfg.node_stride
    if H < 2 * s or W < 2 * s:
        raise DimensionError('image %dx%d smaller than minimum %dx%d' % (H, W, 2 * s, 2 * s))
    h, w = cfg.grid_shape(H, W)

    feat = pad2d(x, h * s - H, w * s - W)
    for b in range(cfg.num_blocks - 1):
        feat = _block(feat, params, b)
    f1 = feat
    f2 = _block(pad2d(f1, h % 2, w % 2), params, cfg.num_blocks - 1)
    f2_up = crop(upsample_nearest(f2, 2), h, w)

    fused = _score(f1, params, 'score1') + crop(upsample_nearest(_score(f2, params, 'score2'), 2), h, w)
    pixel_logits = crop(upsample_nearest(fused, s), H, W)
    return BackboneOutput(f1=f1, f2_up=f2_up, pixel_logits=pixel_logits)
