"""
Synthetic shapes dataset and binary PNM raster I/O.

Images are P6 (8-bit RGB) and label maps P5 (8-bit grey) files. A dataset root holds
images/<id>.ppm, labels/<id>.pgm and split.json with the train and test ids.
"""

import colorsys
import json
import os
import re
from dataclasses import dataclass

import numpy as np
from PIL import Image

from graph_fcn.errors import DimensionError, FormatError, ParameterError, ValidationError
from graph_fcn.graph import IGNORE

NOISE_SIGMA = 0.05
SHAPE_KINDS = ('rectangle', 'disc', 'triangle')
MAX_SHAPES = 3
PLACEMENT_ATTEMPTS = 50

_WHITESPACE = b' \t\n\r\v\f'


@dataclass
class Sample:
    image: np.ndarray   # 3×H×W float64 in [0, 1]
    labels: np.ndarray  # H×W uint8
    id: str

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise DimensionError('sample %s: expected a 3×H×W image, got %s' % (self.id, self.image.shape))
        if self.image.shape[1:] != self.labels.shape:
            raise DimensionError('sample %s: image %s and labels %s extents differ'
                                 % (self.id, self.image.shape[1:], self.labels.shape))


def shape_kind(class_index):
    """Classes 1, 2, 3 are rectangle, disc, triangle; higher classes cycle."""
    return SHAPE_KINDS[(class_index - 1) % len(SHAPE_KINDS)]


def class_colour(class_index, num_classes):
    hue = (class_index - 1) / float(num_classes - 1)
    return np.array(colorsys.hsv_to_rgb(hue, 0.85, 0.9))


def _shape_mask(kind, rng, H, W):
    side = min(H, W)
    yy, xx = np.mgrid[0:H, 0:W]
    if kind == 'rectangle':
        h, w = rng.integers(side // 6, side // 3 + 1, size=2)
        y0, x0 = rng.integers(0, H - h + 1), rng.integers(0, W - w + 1)
        return (yy >= y0) & (yy < y0 + h) & (xx >= x0) & (xx < x0 + w)
    if kind == 'disc':
        r = rng.uniform(side / 10.0, side / 5.0)
        cy, cx = rng.uniform(r, H - r), rng.uniform(r, W - r)
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    # triangle: apex on top, base at the bottom of its bounding box
    size = rng.uniform(side / 4.0, side / 2.5)
    y0, x0 = rng.uniform(0, H - size), rng.uniform(0, W - size)
    apex = (y0, x0 + size / 2.0)
    inside = (yy <= y0 + size)
    for (ay, ax), (by, bx) in ((apex, (y0 + size, x0)), ((y0 + size, x0 + size), apex)):
        inside &= (bx - ax) * (yy - ay) - (by - ay) * (xx - ax) <= 0
    return inside


def _background(rng, H, W):
    yy, xx = np.mgrid[0:H, 0:W] / float(max(H, W))
    base = rng.uniform(0.3, 0.6, size=3)
    freq = rng.uniform(2.0, 6.0, size=2) * np.pi
    phase = rng.uniform(0, 2 * np.pi, size=3)
    texture = np.sin(freq[0] * yy[None] + freq[1] * xx[None] + phase[:, None, None])
    return base[:, None, None] + 0.08 * texture


def generate_sample(rng, H, W, num_classes, sample_id):
    image = _background(rng, H, W)
    labels = np.zeros((H, W), dtype=np.uint8)
    occupied = np.zeros((H, W), dtype=bool)
    for _ in range(int(rng.integers(1, MAX_SHAPES + 1))):
        class_index = int(rng.integers(1, num_classes))
        for _ in range(PLACEMENT_ATTEMPTS):
            mask = _shape_mask(shape_kind(class_index), rng, H, W)
            if mask.any() and not (mask & occupied).any():
                break
        else:
            continue
        colour = np.clip(class_colour(class_index, num_classes) + rng.uniform(-0.08, 0.08, size=3), 0, 1)
        image[:, mask] = colour[:, None]
        labels[mask] = class_index
        occupied |= mask
    image = image + rng.normal(0.0, NOISE_SIGMA, size=image.shape)
    return Sample(image=np.clip(image, 0.0, 1.0), labels=labels, id=sample_id)


def generate_shapes(count, H, W, num_classes, seed):
    if num_classes < 2:
        raise ParameterError('num_classes must be >= 2 (background plus shapes), got %d' % num_classes)
    if num_classes > IGNORE:
        raise ParameterError('num_classes must be < %d, got %d' % (IGNORE, num_classes))
    if H < 32 or W < 32:
        raise ParameterError('image size %dx%d below the 32x32 minimum' % (H, W))
    if count < 0:
        raise ParameterError('count must be >= 0, got %d' % count)
    return [generate_sample(np.random.default_rng([seed, i]), H, W, num_classes, '%05d' % i)
            for i in range(count)]


def split_ids(ids, test_fraction, seed):
    """(train_ids, test_ids); a seeded permutation picks round(fraction·n) test ids."""
    if not 0.0 <= test_fraction < 1.0:
        raise ParameterError('test fraction must lie in [0, 1), got %r' % test_fraction)
    ids = list(ids)
    n_test = int(round(test_fraction * len(ids)))
    order = np.random.default_rng(seed).permutation(len(ids))
    test = sorted(ids[k] for k in order[:n_test])
    held_out = set(test)
    train = [i for i in ids if i not in held_out]
    return train, test


# --- PNM rasters ---

def _parse_header(data, magic):
    if data[:2] != magic:
        raise FormatError('expected magic %s, got %r' % (magic.decode(), data[:2]), 0)
    fields = []
    pos = 2
    while len(fields) < 3:
        if pos >= len(data):
            raise FormatError('header ended early', pos)
        byte = data[pos:pos + 1]
        if byte in _WHITESPACE:
            pos += 1
        elif byte == b'#':
            end = data.find(b'\n', pos)
            pos = len(data) if end < 0 else end + 1
        else:
            match = re.match(rb'[0-9]+', data[pos:])
            if match is None:
                raise FormatError('malformed header field %r' % data[pos:pos + 1], pos)
            fields.append(int(match.group()))
            pos += len(match.group())
    if pos >= len(data) or data[pos:pos + 1] not in _WHITESPACE:
        raise FormatError('missing whitespace after header', pos)
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError('invalid extent %dx%d' % (width, height), pos)
    if not 1 <= maxval <= 255:
        raise FormatError('maxval %d not in [1, 255]' % maxval, pos)
    return width, height, maxval, pos + 1


def _read_raster(path, magic, channels):
    with open(path, 'rb') as f:
        data = f.read()
    width, height, maxval, start = _parse_header(data, magic)
    size = width * height * channels
    if len(data) < start + size:
        raise FormatError('raster truncated: %d of %d bytes' % (len(data) - start, size), len(data))
    raster = np.frombuffer(data, dtype=np.uint8, count=size, offset=start)
    if maxval < 255 and raster.max() > maxval:
        first = int(np.argmax(raster > maxval))
        raise FormatError('sample value %d exceeds maxval %d' % (raster[first], maxval), start + first)
    return raster.reshape(height, width, channels), maxval


def read_image(path):
    raster, maxval = _read_raster(path, b'P6', 3)
    return raster.transpose(2, 0, 1).astype(np.float64) / maxval


def read_labels(path, num_classes=None):
    raster, _ = _read_raster(path, b'P5', 1)
    labels = raster[..., 0].copy()
    if num_classes is not None:
        bad = (labels >= num_classes) & (labels != IGNORE)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise ValidationError('%s: label %d at (%d, %d) not below %d classes'
                                  % (path, labels[row, col], row, col, num_classes))
    return labels


def _write_raster(path, mode, raster):
    Image.fromarray(np.ascontiguousarray(raster, dtype=np.uint8), mode=mode).save(path, format='PPM')


def write_image(image, path):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise DimensionError('expected a 3×H×W image, got %s' % (image.shape,))
    quantized = np.rint(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
    _write_raster(path, 'RGB', quantized.transpose(1, 2, 0))


def write_prediction(label_map, path):
    label_map = np.asarray(label_map)
    if label_map.ndim != 2:
        raise DimensionError('expected an H×W label map, got %s' % (label_map.shape,))
    if label_map.size and (label_map.min() < 0 or label_map.max() > 255):
        raise ValidationError('label values must fit in 8 bits')
    _write_raster(path, 'L', label_map)


def read_sample(image_path, label_path, num_classes=None, sample_id=None):
    if sample_id is None:
        sample_id = os.path.splitext(os.path.basename(image_path))[0]
    return Sample(image=read_image(image_path), labels=read_labels(label_path, num_classes), id=sample_id)


# --- dataset layout ---

def write_dataset(root, samples, test_ids=()):
    os.makedirs(os.path.join(root, 'images'), exist_ok=True)
    os.makedirs(os.path.join(root, 'labels'), exist_ok=True)
    for sample in samples:
        write_image(sample.image, os.path.join(root, 'images', '%s.ppm' % sample.id))
        write_prediction(sample.labels, os.path.join(root, 'labels', '%s.pgm' % sample.id))
    test_ids = set(test_ids)
    split = {'train': [s.id for s in samples if s.id not in test_ids],
             'test': [s.id for s in samples if s.id in test_ids]}
    with open(os.path.join(root, 'split.json'), 'w') as f:
        json.dump(split, f, indent=2)
    return split


def load_split(root, split, num_classes=None):
    with open(os.path.join(root, 'split.json'), 'r') as f:
        try:
            splits = json.load(f)
        except ValueError as e:
            raise FormatError('%s/split.json is not valid JSON: %s' % (root, e))
    if split not in splits:
        raise ParameterError("split '%s' not in %s (have %s)" % (split, root, ', '.join(sorted(splits))))
    return [read_sample(os.path.join(root, 'images', '%s.ppm' % sample_id),
                        os.path.join(root, 'labels', '%s.pgm' % sample_id),
                        num_classes=num_classes, sample_id=sample_id)
            for sample_id in splits[split]]
