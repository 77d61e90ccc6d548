import os
import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from graph_fcn.backbone import BackboneConfig, init_params
from graph_fcn.checkpoint import MAGIC, _Reader, load_checkpoint, save_checkpoint
from graph_fcn.errors import FormatError, UnsupportedVersionError
from graph_fcn.gcn import GcnConfig
from graph_fcn.params import ModelParams
from graph_fcn.training import adam_step

CFG = BackboneConfig(in_channels=3, c1=4, c2=6, node_stride=4, num_classes=3)


@pytest.fixture
def trained_params(rng):
    params = init_params(CFG, seed=2, gcn_cfg=GcnConfig(in_dim=12, hidden_dim=5, num_classes=3))
    for _, var in params.items():
        var.grad = rng.normal(size=var.value.shape)
    adam_step(params, lr=0.01, weight_decay=1e-4)
    return params


def test_round_trip_keeps_values_and_adam_state(tmp_path, trained_params):
    path = save_checkpoint(trained_params, str(tmp_path / 'ckpt' / 'model.gfcn'))
    restored = load_checkpoint(path)
    assert restored == trained_params
    assert list(restored) == list(trained_params)
    for name in trained_params:
        original = trained_params.moments[name]
        loaded = restored.moments[name]
        assert_array_equal(loaded.m, original.m)
        assert_array_equal(loaded.v, original.v)
        assert loaded.step == original.step == 1
    assert BackboneConfig.from_params(restored) == CFG


def test_empty_params_round_trip(tmp_path):
    path = save_checkpoint(ModelParams(), str(tmp_path / 'empty.gfcn'))
    with open(path, 'rb') as f:
        assert f.read() == MAGIC + struct.pack('<II', 1, 0)
    assert len(load_checkpoint(path)) == 0


def test_scalar_and_special_values(tmp_path):
    params = ModelParams()
    params.add('scale', np.float64(-0.0))
    params.add('tiny', np.array([5e-324, 1e308]))
    restored = load_checkpoint(save_checkpoint(params, str(tmp_path / 'x.gfcn')))
    assert restored['scale'].shape == ()
    assert np.signbit(restored['scale'].value)
    assert_array_equal(restored['tiny'].value, [5e-324, 1e308])


def test_truncated_file_reports_offset(tmp_path, trained_params):
    path = save_checkpoint(trained_params, str(tmp_path / 'model.gfcn'))
    size = os.path.getsize(path)
    with open(path, 'rb') as f:
        data = f.read()
    cut = str(tmp_path / 'cut.gfcn')
    with open(cut, 'wb') as f:
        f.write(data[:size - 3])
    with pytest.raises(FormatError) as info:
        load_checkpoint(cut)
    assert 0 < info.value.offset < size


def test_trailing_bytes_are_rejected(tmp_path, trained_params):
    path = save_checkpoint(trained_params, str(tmp_path / 'model.gfcn'))
    with open(path, 'ab') as f:
        f.write(b'\x00')
    with pytest.raises(FormatError, match='trailing'):
        load_checkpoint(path)


def test_bad_magic(tmp_path):
    path = str(tmp_path / 'bad.gfcn')
    with open(path, 'wb') as f:
        f.write(b'NOPE' + struct.pack('<II', 1, 0))
    with pytest.raises(FormatError) as info:
        load_checkpoint(path)
    assert info.value.offset == 0


def test_version_mismatch(tmp_path):
    path = str(tmp_path / 'future.gfcn')
    with open(path, 'wb') as f:
        f.write(MAGIC + struct.pack('<II', 2, 0))
    with pytest.raises(UnsupportedVersionError) as info:
        load_checkpoint(path)
    assert info.value.offset == 4


def test_oversized_dims_are_a_format_error(tmp_path, trained_params):
    path = save_checkpoint(trained_params, str(tmp_path / 'model.gfcn'))
    with open(path, 'rb') as f:
        data = bytearray(f.read())
    name = b'backbone.block0.weight'
    dims = data.find(name) + len(name) + 4
    data[dims:dims + 8] = struct.pack('<Q', 2 ** 62)
    corrupt = write_corrupt(tmp_path, data)
    with pytest.raises(FormatError) as info:
        load_checkpoint(corrupt)
    assert info.value.offset == dims + 4 * 8


def test_negative_reads_are_rejected():
    reader = _Reader(b'GFCN')
    with pytest.raises(FormatError):
        reader.take(-4, 'values')
    assert reader.offset == 0


def write_corrupt(tmp_path, data):
    path = str(tmp_path / 'corrupt.gfcn')
    with open(path, 'wb') as f:
        f.write(bytes(data))
    return path
