"""
Dense tensors with reverse-mode automatic differentiation.

A `Tensor` is a float64 numpy array. A `Var` wraps one and records the op that
produced it, together with a closure mapping the output gradient onto its
parents. `backward(loss)` walks the recorded graph in reverse topological order.

Every op checks its forward result for NaN/Inf and raises `NonFiniteError`
instead of letting non-finite values flow downstream.
"""

import contextlib
import itertools
import threading

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from graph_fcn.errors import BackwardError, DimensionError, NonFiniteError, ParameterError, ValidationError
from graph_fcn.sparse import SparseMatrix

Tensor = np.ndarray

_grad_mode = threading.local()
_node_ids = itertools.count()


def as_tensor(data):
    return np.ascontiguousarray(np.array(data, dtype=np.float64))


def grad_enabled():
    return getattr(_grad_mode, 'enabled', True)


@contextlib.contextmanager
def no_grad():
    """Run ops without recording them; outputs are constants."""
    previous = grad_enabled()
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = previous


class Var(object):
    """A tensor value plus its gradient accumulator and tape node."""

    def __init__(self, value, requires_grad=True, _parents=(), _op=''):
        self.value = as_tensor(value)
        self.grad = np.zeros_like(self.value)
        self.requires_grad = requires_grad
        self.node_id = next(_node_ids)
        self._parents = _parents
        self._backward = None
        self._op = _op
        self._consumed = False

    @property
    def shape(self):
        return self.value.shape

    @property
    def is_leaf(self):
        return not self._parents

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def item(self):
        return float(self.value)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_wrap(other), -1.0))

    def __repr__(self):
        return 'Var(shape=%s, op=%r)' % (self.value.shape, self._op or 'leaf')


def constant(value):
    return Var(value, requires_grad=False)


def _wrap(x):
    return x if isinstance(x, Var) else constant(x)


def _check_finite(value, op):
    if not np.all(np.isfinite(value)):
        raise NonFiniteError('%s produced non-finite values' % op)


def _result(value, parents, op, backward_fn):
    _check_finite(value, op)
    if not grad_enabled() or not any(p.requires_grad for p in parents):
        return constant(value)
    out = Var(value, _parents=tuple(parents), _op=op)
    out._backward = backward_fn
    return out


def _accumulate(var, contribution):
    if var.requires_grad:
        var.grad = var.grad + contribution


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# === Elementwise and structural ops ===

def add(a, b):
    a, b = _wrap(a), _wrap(b)
    value = a.value + b.value

    def _backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))
    return _result(value, (a, b), 'add', _backward)


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    value = a.value * b.value

    def _backward(g):
        _accumulate(a, _unbroadcast(g * b.value, a.shape))
        _accumulate(b, _unbroadcast(g * a.value, b.shape))
    return _result(value, (a, b), 'mul', _backward)


def reduce_sum(x):
    value = np.array(x.value.sum())

    def _backward(g):
        _accumulate(x, np.broadcast_to(g, x.shape).copy())
    return _result(value, (x,), 'sum', _backward)


def reshape(x, shape):
    value = x.value.reshape(shape)

    def _backward(g):
        _accumulate(x, g.reshape(x.shape))
    return _result(value, (x,), 'reshape', _backward)


def transpose(x, axes=None):
    axes = tuple(reversed(range(x.value.ndim))) if axes is None else tuple(axes)
    value = np.ascontiguousarray(x.value.transpose(axes))
    inverse = np.argsort(axes)

    def _backward(g):
        _accumulate(x, g.transpose(inverse))
    return _result(value, (x,), 'transpose', _backward)


def concat(xs, axis=0):
    xs = [_wrap(x) for x in xs]
    value = np.concatenate([x.value for x in xs], axis=axis)
    bounds = np.cumsum([0] + [x.shape[axis] for x in xs])

    def _backward(g):
        for x, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            _accumulate(x, g[tuple(index)])
    return _result(value, xs, 'concat', _backward)


def pad2d(x, bottom, right):
    """Zero-pad a C×H×W tensor at the bottom and right edges."""
    if bottom < 0 or right < 0:
        raise ParameterError('padding must be nonnegative, got (%d, %d)' % (bottom, right))
    if bottom == 0 and right == 0:
        return x
    value = np.pad(x.value, ((0, 0), (0, bottom), (0, right)))
    _, H, W = x.shape

    def _backward(g):
        _accumulate(x, g[:, :H, :W])
    return _result(value, (x,), 'pad2d', _backward)


def crop(x, height, width):
    """Keep the top-left height×width window of a C×H×W tensor."""
    _, H, W = x.shape
    if height > H or width > W:
        raise DimensionError('cannot crop %s to %dx%d' % (x.shape, height, width))
    if height == H and width == W:
        return x
    value = np.ascontiguousarray(x.value[:, :height, :width])

    def _backward(g):
        full = np.zeros_like(x.value)
        full[:, :height, :width] = g
        _accumulate(x, full)
    return _result(value, (x,), 'crop', _backward)


def detach(x):
    return constant(x.value)


def relu(x):
    mask = x.value > 0
    value = np.where(mask, x.value, 0.0)

    def _backward(g):
        # subgradient at 0 is 0
        _accumulate(x, g * mask)
    return _result(value, (x,), 'relu', _backward)


# === Linear algebra ===

def matmul(a, b):
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError('matmul shape mismatch: %s x %s' % (a.shape, b.shape))
    value = a.value @ b.value

    def _backward(g):
        _accumulate(a, g @ b.value.T)
        _accumulate(b, a.value.T @ g)
    return _result(value, (a, b), 'matmul', _backward)


def sparse_dense_matmul(s, x):
    m, n = s.shape
    if m != n:
        raise DimensionError('sparse operand must be square, got %s' % (s.shape,))
    if x.value.ndim != 2 or x.shape[0] != m:
        raise DimensionError('sparse_dense_matmul mismatch: %s x %s' % (s.shape, x.shape))
    value = np.asarray(s.csr @ x.value)

    def _backward(g):
        _accumulate(x, np.asarray(s.csr.T @ g))
    return _result(value, (x,), 'sparse_dense_matmul', _backward)


# === Convolutional ops ===

def conv2d(x, k, stride=1, pad=0, bias=None):
    """Cross-correlation of C_in×H×W with C_out×C_in×kh×kw, zero padding."""
    if stride < 1 or pad < 0:
        raise ParameterError('conv2d needs stride >= 1 and pad >= 0, got %d, %d' % (stride, pad))
    if x.value.ndim != 3 or k.value.ndim != 4 or k.shape[1] != x.shape[0]:
        raise DimensionError('conv2d shape mismatch: input %s, kernel %s' % (x.shape, k.shape))
    c_in, H, W = x.shape
    c_out, _, kh, kw = k.shape
    if kh > H + 2 * pad or kw > W + 2 * pad:
        raise DimensionError('kernel %dx%d larger than padded input %dx%d' % (kh, kw, H + 2 * pad, W + 2 * pad))
    h_out = (H + 2 * pad - kh) // stride + 1
    w_out = (W + 2 * pad - kw) // stride + 1

    padded = np.pad(x.value, ((0, 0), (pad, pad), (pad, pad)))
    # windows: C_in × H' × W' × kh × kw
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))[:, ::stride, ::stride][:, :h_out, :w_out]
    value = np.tensordot(k.value, windows, axes=([1, 2, 3], [0, 3, 4]))
    parents = [x, k]
    if bias is not None:
        if bias.shape != (c_out,):
            raise DimensionError('conv2d bias shape %s does not match %d output channels' % (bias.shape, c_out))
        value = value + bias.value[:, None, None]
        parents.append(bias)

    def _backward(g):
        _accumulate(k, np.tensordot(g, windows, axes=([1, 2], [1, 2])))
        if bias is not None:
            _accumulate(bias, g.sum(axis=(1, 2)))
        if x.requires_grad:
            cols = np.tensordot(k.value, g, axes=([0], [0]))  # C_in × kh × kw × H' × W'
            grad_padded = np.zeros_like(padded)
            for i in range(kh):
                for j in range(kw):
                    grad_padded[:, i:i + stride * h_out:stride, j:j + stride * w_out:stride] += cols[:, i, j]
            _accumulate(x, grad_padded[:, pad:pad + H, pad:pad + W])
    return _result(value, parents, 'conv2d', _backward)


def maxpool2d(x, size, stride):
    if size < 1 or stride < 1:
        raise ParameterError('maxpool2d needs positive size and stride, got %d, %d' % (size, stride))
    C, H, W = x.shape
    h_out = (H - size) // stride + 1
    w_out = (W - size) // stride + 1
    if H < size or W < size:
        raise DimensionError('pool window %d larger than input %dx%d' % (size, H, W))
    windows = sliding_window_view(x.value, (size, size), axis=(1, 2))[:, ::stride, ::stride][:, :h_out, :w_out]
    flat = windows.reshape(C, h_out, w_out, size * size)
    # argmax returns the first maximum in row-major scan order
    arg = flat.argmax(axis=-1)
    value = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def _backward(g):
        rows = np.arange(h_out)[None, :, None] * stride + arg // size
        cols = np.arange(w_out)[None, None, :] * stride + arg % size
        chans = np.broadcast_to(np.arange(C)[:, None, None], arg.shape)
        grad = np.zeros_like(x.value)
        np.add.at(grad, (chans, rows, cols), g)
        _accumulate(x, grad)
    return _result(np.ascontiguousarray(value), (x,), 'maxpool2d', _backward)


def upsample_nearest(x, factor):
    if factor < 1:
        raise ParameterError('upsample factor must be >= 1, got %d' % factor)
    if factor == 1:
        return x
    C, H, W = x.shape
    value = np.repeat(np.repeat(x.value, factor, axis=1), factor, axis=2)

    def _backward(g):
        _accumulate(x, g.reshape(C, H, factor, W, factor).sum(axis=(2, 4)))
    return _result(value, (x,), 'upsample_nearest', _backward)


# === Loss ===

def softmax_cross_entropy(logits, labels, ignore_index=255):
    """Mean of -log softmax(logits)[label] over rows whose label is not ignored."""
    if logits.value.ndim != 2:
        raise DimensionError('logits must be n x c, got %s' % (logits.shape,))
    n, c = logits.shape
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise DimensionError('%d labels for %d logit rows' % (labels.shape[0], n))
    valid = labels != ignore_index
    bad = np.flatnonzero(valid & ((labels < 0) | (labels >= c)))
    if bad.size:
        raise ValidationError('label %d at row %d outside [0, %d)' % (labels[bad[0]], bad[0], c))
    count = int(valid.sum())
    if count == 0:
        return _result(np.array(0.0), (logits,), 'softmax_cross_entropy', lambda g: None)

    shifted = logits.value[valid] - logits.value[valid].max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(count), labels[valid]]
    value = np.array((log_norm - picked).sum() / count)

    def _backward(g):
        probs = np.exp(shifted - log_norm[:, None])
        probs[np.arange(count), labels[valid]] -= 1.0
        grad = np.zeros_like(logits.value)
        grad[valid] = probs * (g / count)
        _accumulate(logits, grad)
    return _result(value, (logits,), 'softmax_cross_entropy', _backward)


# === Backward pass ===

def _topological_order(root):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in visited:
            continue
        visited.add(node.node_id)
        stack.append((node, True))
        for parent in node._parents:
            if parent.node_id not in visited:
                stack.append((parent, False))
    return order


def backward(loss):
    """Populate `.grad` of every Var the scalar `loss` depends on."""
    if loss.value.size != 1:
        raise DimensionError('backward needs a scalar loss, got shape %s' % (loss.shape,))
    if loss._consumed:
        raise BackwardError('backward already ran on this graph; call reset(loss) first')
    order = _topological_order(loss)
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)
    loss._consumed = True


def reset(loss):
    """Zero every gradient reachable from `loss` and allow another backward."""
    for node in _topological_order(loss):
        node.zero_grad()
    loss._consumed = False
