import numpy as np


class Adam:
    """Adam with a fixed learning rate.

    Frozen params and params without a gradient are left untouched, so
    their arrays stay bitwise identical across steps.
    """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        if lr <= 0:
            raise ValueError('Learning rate must be positive.')
        self.params = [p for p in params if not p.frozen]
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.steps = 0
        self._m = {id(p): np.zeros_like(p.data) for p in self.params}
        self._v = {id(p): np.zeros_like(p.data) for p in self.params}

    def step(self):
        self.steps += 1
        bias1 = 1.0 - self.beta1 ** self.steps
        bias2 = 1.0 - self.beta2 ** self.steps
        for param in self.params:
            if param.grad is None:
                continue
            m, v = self._m[id(param)], self._v[id(param)]
            m *= self.beta1
            m += (1.0 - self.beta1) * param.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * param.grad ** 2
            step = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            param.data -= self.lr * step

    def zero_grad(self):
        for param in self.params:
            param.zero_grad()
