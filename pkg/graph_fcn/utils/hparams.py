import json

import yaml

from graph_fcn.errors import ConfigError


class HParams(object):
    # Hyperparameter class using yaml; .json files go through the json parser
    # (PyYAML reads exponent floats such as 1e-4 as strings).
    def __init__(self, **kwargs):
        self.__dict__ = kwargs

    def merge(self, other):
        """Overlay `other` section by section; keys missing from self are rejected."""
        for section, values in other.__dict__.items():
            if section not in self.__dict__:
                raise ConfigError("unknown config section '%s'" % section)
            if not isinstance(values, dict):
                raise ConfigError("config section '%s' must be a mapping" % section)
            current = dict(self.__dict__[section])
            for key, value in values.items():
                if key not in current:
                    raise ConfigError("unknown config field '%s.%s'" % (section, key))
                current[key] = value
            self.__dict__[section] = current
        return self

    def to_dict(self):
        return {k: dict(v) if isinstance(v, dict) else v for k, v in self.__dict__.items()}

    def __repr__(self):
        return '\nHyperparameters:\n' + '\n'.join([' {}={}'.format(k, v) for k, v in self.__dict__.items()])

    @classmethod
    def load(cls, path):
        try:
            with open(path, 'r') as f:
                content = json.load(f) if path.endswith('.json') else yaml.safe_load(f)
        except (yaml.YAMLError, ValueError) as e:
            raise ConfigError('malformed config file %s: %s' % (path, e))
        if content is None:
            content = {}
        if not isinstance(content, dict):
            raise ConfigError('config file %s must contain a mapping at top level' % path)
        return cls(**content)
