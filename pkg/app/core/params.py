import logging

import numpy as np

from core.autograd import Tensor

logger = logging.getLogger(__name__)


class Param(Tensor):
    """Named trainable array. Frozen params never record gradients."""

    def __init__(self, name, data, frozen=False):
        super().__init__(np.array(data, dtype=np.float64),
                         requires_grad=not frozen, name=name)
        self.frozen = frozen

    def __repr__(self):
        state = 'frozen' if self.frozen else 'trainable'
        return f'<Param {self.name!r} shape={self.shape} {state}>'

    @property
    def group(self):
        """Component the param belongs to: the prefix before the first dot."""
        return self.name.split('.', 1)[0]


class ParamStore:
    """Ordered registry of every Param of a model.

    Params are created in a fixed order from one seeded generator, so a
    seed fully determines the initial values. Shared weights are the same
    Param object registered once.
    """

    def __init__(self, seed=0):
        self.rng = np.random.default_rng(seed)
        self._params = {}

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name):
        return self._params[name]

    def names(self):
        return list(self._params)

    def create(self, name, shape, std, frozen=False):
        """Register a new Param drawn from N(0, std^2)."""
        if name in self._params:
            raise ValueError(f'Parameter {name!r} is already registered.')
        data = self.rng.normal(0.0, std, size=shape)
        param = Param(name, data, frozen=frozen)
        self._params[name] = param
        logger.debug('created %r', param)
        return param

    def trainable(self):
        return [p for p in self if not p.frozen]

    def group(self, prefix):
        return [p for p in self if p.group == prefix]

    def groups(self):
        seen = []
        for param in self:
            if param.group not in seen:
                seen.append(param.group)
        return seen

    def count(self, prefix=None, trainable_only=True):
        """Number of scalar values, optionally restricted to one group."""
        params = self.group(prefix) if prefix else list(self)
        return sum(
            p.data.size for p in params if not (trainable_only and p.frozen)
        )

    def zero_grad(self):
        for param in self:
            param.zero_grad()
