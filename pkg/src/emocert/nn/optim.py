"""Optimizers (RMSprop, AdamW with decoupled weight decay) and gradient clipping."""

from __future__ import annotations

import math

import numpy as np


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float = 1.0) -> float:
    """Scale all gradients in place so the global L2 norm is <= max_norm.

    Returns the pre-clip global norm.  Gradients below the threshold are
    left untouched; scaling is by a positive scalar so direction is kept.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be > 0")
    total = math.fsum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads.values())
    norm = math.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


class RMSprop:
    def __init__(self, lr: float = 5e-4, alpha: float = 0.9, eps: float = 1e-8):
        self.lr = lr
        self.alpha = alpha
        self.eps = eps
        self.t = 0
        self._v: dict[str, np.ndarray] = {}

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        a = self.alpha
        for name, theta in tensors.items():
            g = grads[name]
            if g.shape != theta.shape:
                raise ValueError(f"gradient shape mismatch for {name}")
            v = self._v.setdefault(name, np.zeros_like(theta))
            v *= a
            v += (1 - a) * g * g
            theta -= self.lr * g / (np.sqrt(v) + self.eps)


class AdamW:
    """Adam with decoupled weight decay applied directly to the parameters."""

    def __init__(
        self,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1 - b1**self.t
        bc2 = 1 - b2**self.t
        for name, theta in tensors.items():
            g = grads[name]
            if g.shape != theta.shape:
                raise ValueError(f"gradient shape mismatch for {name}")
            m = self._m.setdefault(name, np.zeros_like(theta))
            v = self._v.setdefault(name, np.zeros_like(theta))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            theta -= self.lr * self.weight_decay * theta
            theta -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
