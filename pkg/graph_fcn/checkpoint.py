"""
GFCN checkpoint container.

Layout (little endian): b'GFCN', u32 version, u32 tensor count, then per tensor
u32 name length, UTF-8 name, u32 rank, u64 dims, f64 values in row-major order.
Adam state rides along as extra tensors named adam.m/<param>, adam.v/<param> and
adam.step/<param> (rank 0).
"""

import math
import os
import struct

import numpy as np

from graph_fcn.errors import FormatError, UnsupportedVersionError
from graph_fcn.params import AdamMoments, ModelParams

MAGIC = b'GFCN'
VERSION = 1
_MOMENT_PREFIXES = ('adam.m/', 'adam.v/', 'adam.step/')


def _tensors(params):
    for name, var in params.items():
        yield name, var.value
    for name, state in params.moments.items():
        yield 'adam.m/' + name, state.m
        yield 'adam.v/' + name, state.v
        yield 'adam.step/' + name, np.float64(state.step)


def _encode(name, value):
    value = np.asarray(value, dtype='<f8')
    encoded = name.encode('utf-8')
    header = struct.pack('<I', len(encoded)) + encoded + struct.pack('<I', value.ndim)
    header += struct.pack('<%dQ' % value.ndim, *value.shape)
    return header + np.ascontiguousarray(value).tobytes()


def save_checkpoint(params, path):
    tensors = list(_tensors(params))
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(MAGIC + struct.pack('<II', VERSION, len(tensors)))
        for name, value in tensors:
            f.write(_encode(name, value))
    return path


class _Reader(object):
    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, size, what):
        if size < 0 or self.offset + size > len(self.data):
            raise FormatError('truncated checkpoint while reading %s' % what, self.offset)
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def _decode(reader):
    (name_len,) = reader.unpack('<I', 'name length')
    start = reader.offset
    try:
        name = reader.take(name_len, 'name').decode('utf-8')
    except UnicodeDecodeError:
        raise FormatError('tensor name is not valid UTF-8', start)
    (rank,) = reader.unpack('<I', 'rank of %s' % name)
    shape = reader.unpack('<%dQ' % rank, 'dims of %s' % name)
    count = math.prod(shape)
    if 8 * count > len(reader.data) - reader.offset:
        raise FormatError('%s claims %d values, more than the file holds' % (name, count), reader.offset)
    raw = reader.take(8 * count, 'values of %s' % name)
    return name, np.frombuffer(raw, dtype='<f8').astype(np.float64).reshape(shape)


def load_checkpoint(path):
    with open(path, 'rb') as f:
        reader = _Reader(f.read())
    if reader.take(4, 'magic') != MAGIC:
        raise FormatError('%s is not a GFCN checkpoint' % path, 0)
    (version,) = reader.unpack('<I', 'version')
    if version != VERSION:
        raise UnsupportedVersionError('checkpoint version %d not supported (expected %d)' % (version, VERSION), 4)
    (count,) = reader.unpack('<I', 'tensor count')

    params = ModelParams()
    state = {}
    for _ in range(count):
        name, value = _decode(reader)
        prefix = next((p for p in _MOMENT_PREFIXES if name.startswith(p)), None)
        if prefix is None:
            params.add(name, value)
        else:
            state.setdefault(name[len(prefix):], {})[prefix] = value
    if reader.offset != len(reader.data):
        raise FormatError('%d trailing bytes after last tensor' % (len(reader.data) - reader.offset), reader.offset)

    for name, parts in state.items():
        if name not in params or len(parts) != len(_MOMENT_PREFIXES):
            raise FormatError('incomplete Adam state for %s' % name)
        params.moments[name] = AdamMoments(m=parts['adam.m/'], v=parts['adam.v/'],
                                           step=int(parts['adam.step/']))
    return params
