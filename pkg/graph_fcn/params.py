from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from graph_fcn.errors import ParameterError
from graph_fcn.tensor import Var


@dataclass
class AdamMoments:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


class ModelParams(object):
    """Ordered name -> Var collection plus per-parameter Adam moments."""

    def __init__(self):
        self._vars = OrderedDict()
        self.moments = {}

    def add(self, name, value):
        if name in self._vars:
            raise ParameterError("duplicate parameter name '%s'" % name)
        self._vars[name] = Var(value)
        return self._vars[name]

    def names(self, prefix=''):
        return [name for name in self._vars if name.startswith(prefix)]

    def moments_for(self, name):
        if name not in self.moments:
            value = self._vars[name].value
            self.moments[name] = AdamMoments(m=np.zeros_like(value), v=np.zeros_like(value))
        return self.moments[name]

    def zero_grad(self):
        for var in self._vars.values():
            var.zero_grad()

    def num_values(self):
        return sum(var.value.size for var in self._vars.values())

    def __getitem__(self, name):
        try:
            return self._vars[name]
        except KeyError:
            raise ParameterError("no parameter named '%s'" % name)

    def __contains__(self, name):
        return name in self._vars

    def __iter__(self):
        return iter(self._vars)

    def __len__(self):
        return len(self._vars)

    def items(self):
        return self._vars.items()

    def __eq__(self, other):
        if not isinstance(other, ModelParams) or list(self) != list(other):
            return False
        return all(np.array_equal(self[n].value, other[n].value) for n in self)

    def __repr__(self):
        return 'ModelParams(%d tensors, %d values)' % (len(self), self.num_values())


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
