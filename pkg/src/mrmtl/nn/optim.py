"""Adam optimizer over one or more networks."""

from __future__ import annotations

import numpy as np


class NumericError(ArithmeticError):
    """A gradient or update became non-finite."""


class Adam:
    """Adam with bias correction. State is keyed by parameter name per network.

    step() consumes the gradients left by the most recent backward pass.
    With zero gradients or lr=0 the parameters are unchanged exactly.
    """

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, nets) -> None:
        """Apply one update to every parameter of the given network(s)."""
        if not isinstance(nets, (list, tuple)):
            nets = [nets]
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for ni, net in enumerate(nets):
            params = dict(net.param_items())
            for name, grad in net.grad_items():
                key = f"net{ni}.{name}"
                if not np.all(np.isfinite(grad)):
                    raise NumericError(f"non-finite gradient in {key}")
                m = self._m.get(key)
                if m is None:
                    m = np.zeros_like(grad)
                    self._v[key] = np.zeros_like(grad)
                v = self._v[key]
                m = self.beta1 * m + (1.0 - self.beta1) * grad
                v = self.beta2 * v + (1.0 - self.beta2) * grad * grad
                self._m[key] = m
                self._v[key] = v
                params[name] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
