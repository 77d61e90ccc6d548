"""Run configuration: packaged YAML defaults overlaid with a user file, built into typed configs."""

import dataclasses
import os
from dataclasses import dataclass

from graph_fcn.backbone import BackboneConfig
from graph_fcn.errors import ConfigError
from graph_fcn.graph import GraphConfig
from graph_fcn.model import ModelConfig
from graph_fcn.training import TrainConfig
from graph_fcn.utils.hparams import HParams

DEFAULT_CONFIG = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'run_config.yaml')


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    train: TrainConfig


@dataclass
class _GcnFields:
    # in_dim and num_classes follow from the backbone
    hidden_dim: int = 64


def _typed_fields(section, cls, values):
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    checked = {}
    for key, value in values.items():
        if key not in types:
            raise ConfigError("unknown config field '%s.%s'" % (section, key))
        expected = types[key]
        if expected is str:
            if not isinstance(value, str):
                raise ConfigError("config field '%s.%s' must be a string, got %r" % (section, key, value))
            checked[key] = value
            continue
        # bool is an int subclass but never a valid count or rate
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("config field '%s.%s' must be a number, got %r" % (section, key, value))
        if expected is int and not isinstance(value, int):
            raise ConfigError("config field '%s.%s' must be an integer, got %r" % (section, key, value))
        checked[key] = float(value) if expected is float else value
    return checked


def build_run_config(hparams):
    sections = hparams.to_dict()
    backbone = BackboneConfig(**_typed_fields('backbone', BackboneConfig, sections['backbone']))
    gcn = _typed_fields('gcn', _GcnFields, sections['gcn'])
    graph = GraphConfig(**_typed_fields('graph', GraphConfig, sections['graph']))
    model = ModelConfig.build(backbone, hidden_dim=gcn['hidden_dim'], graph=graph)
    train = TrainConfig(**_typed_fields('train', TrainConfig, sections['train']))
    return RunConfig(model=model, train=train)


def load_run_config(path=None):
    """Defaults from run_config.yaml, overlaid with `path` (YAML or JSON) when given."""
    hparams = HParams.load(DEFAULT_CONFIG)
    if path is not None:
        hparams.merge(HParams.load(path))
    return build_run_config(hparams)
