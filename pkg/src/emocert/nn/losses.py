"""Training losses: cosine proximity and weighted cross-entropy.

Both return ``(scalar_loss, gradient, entry_point)`` where entry_point names
the tensor the gradient is taken with respect to: the cosine loss consumes
the pre-softmax activations ("logits"), weighted cross-entropy consumes the
class probabilities ("probs").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# small enough that a perfect one-hot match scores -1.0 to within 1e-9
_COSINE_EPS = 1e-12
_CE_EPS = 1e-12


@dataclass(frozen=True)
class LossSpec:
    variant: str  # "cosine_proximity" | "weighted_cross_entropy"
    class_weights: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if self.variant not in ("cosine_proximity", "weighted_cross_entropy"):
            raise ValueError(f"unknown loss variant {self.variant!r}")
        if self.variant == "weighted_cross_entropy":
            if self.class_weights is None or len(self.class_weights) != 4:
                raise ValueError("weighted_cross_entropy needs 4 class weights")
            if any(w <= 0 for w in self.class_weights):
                raise ValueError("class weights must all be > 0")


def cosine_proximity(outputs: np.ndarray, targets: np.ndarray):
    """Mean over the batch of -(y.h)/(|y||h| + eps), gradient w.r.t. h."""
    b = outputs.shape[0]
    dot = (outputs * targets).sum(axis=1)
    ny = np.sqrt((targets * targets).sum(axis=1))
    nh = np.sqrt((outputs * outputs).sum(axis=1))
    denom = ny * nh + _COSINE_EPS
    loss = float(np.mean(-dot / denom))
    # d/dh [-dot/denom] = -y/denom + (dot*ny/denom^2) * (h/|h|)
    safe_nh = np.maximum(nh, np.finfo(outputs.dtype).tiny)
    unit = outputs / safe_nh[:, None]  # zero rows stay zero, and dot==0 there
    second = (dot * ny / (denom * denom))[:, None] * unit
    grad = (-targets / denom[:, None] + second) / b
    return loss, grad


def weighted_cross_entropy(probs: np.ndarray, targets: np.ndarray, class_weights):
    """Sum_i w_{y_i} * (-log p_i[y_i]) / sum_i w_{y_i}, gradient w.r.t. probs."""
    w = np.asarray(class_weights, dtype=probs.dtype)
    sample_w = (targets * w[None, :]).sum(axis=1)
    total_w = sample_w.sum()
    p_true = (probs * targets).sum(axis=1)
    loss = float((sample_w * -np.log(p_true + _CE_EPS)).sum() / total_w)
    grad = -targets * (sample_w / (p_true + _CE_EPS) / total_w)[:, None]
    return loss, grad


def wce_softmax_grad(probs: np.ndarray, targets: np.ndarray, class_weights) -> np.ndarray:
    """Fused gradient of weighted cross-entropy w.r.t. the softmax input."""
    w = np.asarray(class_weights, dtype=probs.dtype)
    sample_w = (targets * w[None, :]).sum(axis=1)
    return (probs - targets) * (sample_w / sample_w.sum())[:, None]


def loss_eval(spec: LossSpec, logits: np.ndarray, probs: np.ndarray, targets: np.ndarray):
    """Evaluate a LossSpec against one-hot targets.

    Returns (loss, gradient, entry_point) ready for ``Network.backward``.
    """
    if targets.shape != probs.shape:
        raise ValueError("targets must be one-hot with the same shape as the output")
    if spec.variant == "cosine_proximity":
        loss, grad = cosine_proximity(logits, targets)
        return loss, grad, "logits"
    loss, grad = weighted_cross_entropy(probs, targets, spec.class_weights)
    return loss, grad, "probs"


def one_hot(labels: np.ndarray, num_classes: int = 4, dtype=np.float32) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes})")
    out = np.zeros((labels.shape[0], num_classes), dtype=dtype)
    out[np.arange(labels.shape[0]), labels] = 1
    return out
