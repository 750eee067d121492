"""The two canonical model architectures and parameter counting.

baseline   two conv blocks of 10 filters with 4x4 valid kernels, 4x4 max
           pooling, flatten into a single dense layer, ReLU on the final
           layer, softmax on top for probabilities.  1,944 trainable
           parameters.
enhanced   three conv blocks (two 3x3/pad-1 convs each, batch norm after
           every conv) with 32/64/128 filters, 2x2 max pooling and dropout
           0.2/0.3/0.4 per block, global average pooling, dense head
           128 -> 256 -> 4.  321,380 trainable parameters.
"""

from __future__ import annotations

import numpy as np

from emocert.nn.layers import (
    BatchNorm2d,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    GlobalAvgPool,
    Layer,
    MaxPool2d,
    ReLU,
    Softmax,
)
from emocert.nn.network import ModelSpec, Network, Parameters
from emocert.rng import Rng, derive_seed

ARCH_IDS = ("baseline", "enhanced")

# the two kernel/padding combinations used by the canonical architectures
CANONICAL_CONV = ((3, 1), (4, 0))


def baseline_layers() -> list[Layer]:
    return [
        Conv2d(1, 10, kernel=4, padding=0),
        ReLU(),
        MaxPool2d(4),
        Conv2d(10, 10, kernel=4, padding=0),
        ReLU(),
        MaxPool2d(4),
        Flatten(),
        # positive bias keeps all four ReLU output units active early in
        # training; with the cosine loss a unit whose pre-activation goes
        # negative receives no gradient and never recovers, and smaller
        # budgets let one class die before convergence
        Dense(40, 4, bias_init=1.0),
        ReLU(),  # final-layer ReLU; probabilities come from the softmax below
        Softmax(),
    ]


def enhanced_layers() -> list[Layer]:
    layers: list[Layer] = []
    in_ch = 1
    for filters, rate in ((32, 0.2), (64, 0.3), (128, 0.4)):
        layers += [
            Conv2d(in_ch, filters, kernel=3, padding=1),
            BatchNorm2d(filters),
            ReLU(),
            Conv2d(filters, filters, kernel=3, padding=1),
            BatchNorm2d(filters),
            ReLU(),
            MaxPool2d(2),
            Dropout(rate),
        ]
        in_ch = filters
    layers += [
        GlobalAvgPool(),
        Dense(128, 256),
        ReLU(),
        Dense(256, 4),
        Softmax(),
    ]
    return layers


def model_spec(arch_id: str) -> ModelSpec:
    if arch_id == "baseline":
        return ModelSpec(arch_id="baseline", layers=baseline_layers())
    if arch_id == "enhanced":
        return ModelSpec(arch_id="enhanced", layers=enhanced_layers())
    raise ValueError(f"unknown arch_id {arch_id!r}, expected one of {ARCH_IDS}")


def build_model(arch_id: str, seed: int = 0) -> tuple[ModelSpec, Parameters]:
    """Canonical spec plus parameters initialised from the seed.

    Conv and dense weights are fan-average-scaled uniform draws
    U(-L, L) with L = sqrt(6/(fan_in + fan_out)); biases zero, batch-norm
    scale 1 and shift 0.  Each tensor uses its own child stream keyed on
    (seed, "init", layer_name, tensor_name), so initialisation order is
    irrelevant.
    """
    spec = model_spec(arch_id)
    params = Network(spec).init_params(Rng(derive_seed(seed, "init")))
    return spec, params


def count_parameters(spec: ModelSpec) -> int:
    """Trainable scalars: weights, biases, batch-norm scale/shift.

    Batch-norm running statistics are not trainable and are excluded.
    """
    return sum(
        int(np.prod(shape))
        for layer in spec.layers
        for shape in layer.param_shapes().values()
    )


def noncanonical_conv_warnings(spec: ModelSpec) -> list[str]:
    """Flags conv layers whose kernel/padding combo differs from the two
    canonical ones.  Such specs still run; they are just not the shapes the
    stock architectures were validated with."""
    warnings = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv2d) and (layer.kernel, layer.padding) not in CANONICAL_CONV:
            warnings.append(
                f"layer {i}: conv2d kernel={layer.kernel} padding={layer.padding} is non-canonical"
            )
    return warnings


def validate_spec(spec: ModelSpec) -> None:
    if spec.num_classes != 4:
        raise ValueError("models are fixed to the 4 emotion classes")
    c, h, w = spec.input_shape
    shape: tuple[int, ...] = (h, w, c)  # layers run channels-last
    for layer in spec.layers[:-1]:  # softmax keeps the vector shape
        if not isinstance(layer, Softmax):
            shape = layer.out_shape(shape)
    if shape != (4,):
        raise ValueError(f"layer stack produces {shape}, expected (4,)")
