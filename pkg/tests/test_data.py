import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from PIL import Image

from graph_fcn.data import (Sample, generate_shapes, load_split, read_image, read_labels, read_sample, shape_kind,
                            split_ids, write_dataset, write_image, write_prediction)
from graph_fcn.errors import DimensionError, FormatError, ParameterError, ValidationError
from graph_fcn.graph import IGNORE


def write_bytes(path, data):
    with open(path, 'wb') as f:
        f.write(data)
    return str(path)


def test_generate_zero_samples():
    assert generate_shapes(0, 32, 32, 4, seed=0) == []


def test_generation_is_deterministic():
    first = generate_shapes(3, 40, 36, 4, seed=11)
    second = generate_shapes(3, 40, 36, 4, seed=11)
    for a, b in zip(first, second):
        assert a.id == b.id
        assert_array_equal(a.image, b.image)
        assert_array_equal(a.labels, b.labels)
    assert [s.id for s in first] == ['00000', '00001', '00002']
    assert not np.array_equal(first[0].image, generate_shapes(1, 40, 36, 4, seed=12)[0].image)


def test_generated_sample_ranges():
    for sample in generate_shapes(20, 32, 48, 5, seed=1):
        assert sample.image.shape == (3, 32, 48)
        assert sample.labels.shape == (32, 48) and sample.labels.dtype == np.uint8
        assert sample.image.min() >= 0.0 and sample.image.max() <= 1.0
        assert sample.labels.max() < 5
        assert (sample.labels > 0).any()


def test_every_class_covers_enough_pixels():
    samples = generate_shapes(500, 32, 32, 4, seed=0)
    counts = np.bincount(np.concatenate([s.labels.ravel() for s in samples]), minlength=4)
    assert np.all(counts / counts.sum() >= 0.02)


def test_generation_parameter_errors():
    with pytest.raises(ParameterError):
        generate_shapes(1, 32, 32, 1, seed=0)
    with pytest.raises(ParameterError):
        generate_shapes(1, 31, 32, 4, seed=0)
    with pytest.raises(ParameterError):
        generate_shapes(-1, 32, 32, 4, seed=0)


def test_shape_kinds_cycle():
    assert [shape_kind(c) for c in range(1, 5)] == ['rectangle', 'disc', 'triangle', 'rectangle']


def test_sample_extents_must_agree():
    with pytest.raises(DimensionError):
        Sample(image=np.zeros((3, 4, 4)), labels=np.zeros((4, 5), dtype=np.uint8), id='x')


def test_split_ids():
    ids = ['%05d' % i for i in range(10)]
    train, test = split_ids(ids, 0.2, seed=4)
    assert len(test) == 2 and test == sorted(test)
    assert set(train).isdisjoint(test)
    assert sorted(train + test) == ids
    assert split_ids(ids, 0.2, seed=4) == (train, test)
    assert split_ids(ids, 0.0, seed=4) == (ids, [])
    with pytest.raises(ParameterError):
        split_ids(ids, 1.0, seed=0)


def test_solid_image_round_trip(tmp_path):
    path = str(tmp_path / 'solid.ppm')
    write_image(np.full((3, 5, 7), 0.2), path)
    with open(path, 'rb') as f:
        assert f.read().startswith(b'P6\n7 5\n255\n')
    image = read_image(path)
    assert image.shape == (3, 5, 7)
    assert_allclose(image, 51 / 255.0)


def test_read_image_scales_by_maxval(tmp_path):
    full = write_bytes(tmp_path / 'full.ppm', b'P6\n1 1\n255\n' + bytes([255, 0, 128]))
    assert_array_equal(read_image(full)[:, 0, 0], [1.0, 0.0, 128 / 255.0])
    small = write_bytes(tmp_path / 'small.ppm', b'P6 1 1 15\n' + bytes([15, 5, 0]))
    assert_allclose(read_image(small)[:, 0, 0], [1.0, 1 / 3.0, 0.0])


def test_sample_above_maxval_is_rejected(tmp_path):
    path = write_bytes(tmp_path / 'hot.ppm', b'P6\n1 1\n15\n' + bytes([15, 16, 0]))
    with pytest.raises(FormatError, match='exceeds maxval 15') as info:
        read_image(path)
    assert info.value.offset == 11


def test_written_rasters_open_in_pillow(tmp_path):
    labels = np.array([[0, 1, 2], [3, IGNORE, 1]], dtype=np.uint8)
    path = str(tmp_path / 'labels.pgm')
    write_prediction(labels, path)
    with Image.open(path) as im:
        assert (im.format, im.mode, im.size) == ('PPM', 'L', (3, 2))
        assert_array_equal(np.asarray(im), labels)


def test_header_comments_are_skipped(tmp_path):
    path = write_bytes(tmp_path / 'c.ppm', b'P6\n# made by hand\n2 1 # width height\n255\n' + bytes(range(6)))
    assert read_image(path).shape == (3, 1, 2)


def test_malformed_header_offset(tmp_path):
    path = write_bytes(tmp_path / 'bad.ppm', b'P6\n2 x 255\n')
    with pytest.raises(FormatError) as info:
        read_image(path)
    assert info.value.offset == 5


def test_wrong_magic_and_truncation(tmp_path):
    with pytest.raises(FormatError) as info:
        read_image(write_bytes(tmp_path / 'grey.ppm', b'P5\n1 1\n255\n\x00'))
    assert info.value.offset == 0
    data = b'P5\n2 2\n255\n\x00\x01\x02'
    with pytest.raises(FormatError) as info:
        read_labels(write_bytes(tmp_path / 'short.pgm', data))
    assert info.value.offset == len(data)


def test_label_round_trip_and_validation(tmp_path):
    labels = np.array([[0, 1, 2], [3, IGNORE, 1]], dtype=np.uint8)
    path = str(tmp_path / 'labels.pgm')
    write_prediction(labels, path)
    assert_array_equal(read_labels(path, num_classes=4), labels)
    with pytest.raises(ValidationError, match=r'\(1, 0\)'):
        read_labels(path, num_classes=3)


def test_write_prediction_rejects_wide_labels(tmp_path):
    with pytest.raises(ValidationError):
        write_prediction(np.array([[256]]), str(tmp_path / 'wide.pgm'))


def test_dataset_layout_round_trip(tmp_path):
    samples = generate_shapes(5, 32, 32, 3, seed=2)
    split = write_dataset(str(tmp_path), samples, test_ids=['00001', '00003'])
    assert split == {'train': ['00000', '00002', '00004'], 'test': ['00001', '00003']}
    loaded = load_split(str(tmp_path), 'test', num_classes=3)
    assert [s.id for s in loaded] == ['00001', '00003']
    for sample in loaded:
        original = samples[int(sample.id)]
        assert_array_equal(sample.labels, original.labels)
        assert np.max(np.abs(sample.image - original.image)) <= 0.5 / 255 + 1e-12
    one = read_sample(str(tmp_path / 'images' / '00000.ppm'), str(tmp_path / 'labels' / '00000.pgm'))
    assert one.id == '00000'
    with pytest.raises(ParameterError):
        load_split(str(tmp_path), 'val')
