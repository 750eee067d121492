"""Model spec, parameter container and the forward/backward orchestrator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from emocert.nn.layers import Layer, Softmax
from emocert.rng import Rng


@dataclass
class ModelSpec:
    arch_id: str
    layers: list[Layer]
    input_shape: tuple[int, int, int] = (1, 48, 48)
    num_classes: int = 4

    def layer_names(self) -> list[str]:
        return [f"{i:02d}_{layer.kind}" for i, layer in enumerate(self.layers)]


@dataclass
class Parameters:
    """Named trainable tensors plus batch-norm running statistics."""

    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    running: dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "Parameters":
        return Parameters(
            tensors={k: v.copy() for k, v in self.tensors.items()},
            running={k: v.copy() for k, v in self.running.items()},
        )

    def assert_finite(self) -> None:
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t)):
                raise FloatingPointError(f"non-finite values in parameter {name}")


class Network:
    """Runs a ModelSpec's layer stack over an external Parameters store.

    ``forward`` returns class probabilities (softmax output) and a cache;
    the cache also records the pre-softmax activations under ``"logits"``
    because the cosine loss consumes those rather than probabilities.
    """

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self.names = spec.layer_names()
        if not isinstance(spec.layers[-1], Softmax):
            raise ValueError("model layer stack must end with softmax")

    # -- parameter plumbing ------------------------------------------------

    def init_params(self, rng: Rng) -> Parameters:
        params = Parameters()
        for name, layer in zip(self.names, self.spec.layers):
            for local, tensor in layer.init_params(rng.spawn(name)).items():
                params.tensors[f"{name}/{local}"] = tensor
            for local, tensor in layer.init_running().items():
                params.running[f"{name}/{local}"] = tensor
        return params

    def _local_params(self, params: Parameters, name: str, layer: Layer) -> dict[str, np.ndarray]:
        return {local: params.tensors[f"{name}/{local}"] for local in layer.param_shapes()}

    def _local_running(self, params: Parameters, name: str, layer: Layer) -> dict[str, np.ndarray]:
        return {local: params.running[f"{name}/{local}"] for local in layer.running_shapes()}

    # -- execution ---------------------------------------------------------

    def forward(self, params: Parameters, x: np.ndarray, mode: str = "eval", rng: Rng | None = None):
        if mode not in ("train", "eval"):
            raise ValueError(f"unknown mode {mode!r}")
        if x.ndim != 4 or x.shape[1:] != tuple(self.spec.input_shape):
            raise ValueError(
                f"input shape {x.shape} does not match model input {self.spec.input_shape}"
            )
        lo, hi = float(x.min(initial=0.0)), float(x.max(initial=0.0))
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"pixel values must lie in [0, 1], got [{lo}, {hi}]")
        cache: dict = {"mode": mode, "layers": []}
        # feature maps run channels-last internally
        out = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
        for name, layer in zip(self.names, self.spec.layers):
            if isinstance(layer, Softmax):
                cache["logits"] = out
            layer_cache: dict = {}
            out = layer.forward(
                out,
                self._local_params(params, name, layer),
                self._local_running(params, name, layer),
                mode,
                rng.spawn(name) if rng is not None else None,
                layer_cache,
            )
            cache["layers"].append(layer_cache)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite activations in forward pass")
        cache["probs"] = out
        return out, cache

    def backward(self, params: Parameters, cache: dict, grad: np.ndarray, wrt: str = "probs"):
        """Backpropagate a loss gradient.

        ``wrt="probs"`` enters after the softmax layer (gradient w.r.t. the
        class probabilities); ``wrt="logits"`` enters just before it, for
        losses defined on the pre-softmax activations.
        Returns (gradients by parameter name, gradient w.r.t. the input).
        """
        if wrt not in ("probs", "logits"):
            raise ValueError(f"unknown gradient entry point {wrt!r}")
        grads: dict[str, np.ndarray] = {}
        dy = grad
        stack = list(zip(self.names, self.spec.layers, cache["layers"]))
        if wrt == "logits":
            stack = stack[:-1]  # softmax is skipped; grad already at its input
        for name, layer, layer_cache in reversed(stack):
            dy, layer_grads = layer.backward(dy, self._local_params(params, name, layer), layer_cache)
            for local, g in layer_grads.items():
                grads[f"{name}/{local}"] = g
        # back to the API's channels-first layout
        return grads, np.ascontiguousarray(dy.transpose(0, 3, 1, 2))
