"""Per-layer forward semantics and finite-difference gradient checks.

Every layer variant is checked in float64 against central differences
(h=1e-5) over multiple random configurations; the conv layer is checked on
both of its execution paths (patch-matrix and chunked shifted GEMM).
"""

import numpy as np
import pytest

import emocert.nn.layers as layers_mod
from emocert.nn.layers import (
    BatchNorm2d,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    GlobalAvgPool,
    MaxPool2d,
    ReLU,
    Softmax,
)
from emocert.rng import Rng
from gradcheck_utils import TOLERANCE, check_layer, rel_error

RNG = np.random.default_rng(20240811)


def conv_params(rng, cin, cout, k):
    return {
        "weight": rng.normal(scale=0.5, size=(k, k, cin, cout)),
        "bias": rng.normal(scale=0.5, size=cout),
    }


@pytest.mark.parametrize("force_shifted", [False, True], ids=["gather", "shifted"])
@pytest.mark.parametrize(
    "cin,cout,k,p,size,seed",
    [
        (1, 3, 3, 1, 6, 0),
        (3, 5, 3, 1, 7, 1),
        (2, 4, 4, 0, 9, 2),
        (1, 2, 4, 0, 8, 3),
        (4, 3, 3, 1, 5, 4),
        (2, 2, 2, 0, 6, 5),
    ],
)
def test_conv2d_gradcheck(monkeypatch, force_shifted, cin, cout, k, p, size, seed):
    if force_shifted:
        monkeypatch.setattr(layers_mod, "_GATHER_LIMIT_BYTES", 0)
    rng = np.random.default_rng(seed)
    layer = Conv2d(cin, cout, kernel=k, padding=p)
    x = rng.normal(size=(2, size, size, cin))
    worst = check_layer(layer, x, conv_params(rng, cin, cout, k), seed_upstream=seed)
    assert worst < TOLERANCE


def test_conv2d_paths_agree(monkeypatch):
    rng = np.random.default_rng(9)
    layer = Conv2d(3, 4, kernel=3, padding=1)
    params = conv_params(rng, 3, 4, 3)
    x = rng.normal(size=(2, 8, 8, 3))
    y_gather = layer.forward(x, params, {}, "eval", None, {})
    monkeypatch.setattr(layers_mod, "_GATHER_LIMIT_BYTES", 0)
    y_shifted = layer.forward(x, params, {}, "eval", None, {})
    np.testing.assert_allclose(y_gather, y_shifted, rtol=1e-12)


def test_conv2d_identity_kernel_passes_gradient_through():
    # 3x3 kernel that is a centered delta: output == input, so the input
    # gradient must equal the upstream gradient exactly
    layer = Conv2d(1, 1, kernel=3, padding=1)
    weight = np.zeros((3, 3, 1, 1))
    weight[1, 1, 0, 0] = 1.0
    params = {"weight": weight, "bias": np.zeros(1)}
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 6, 6, 1))
    cache = {}
    y = layer.forward(x, params, {}, "eval", None, cache)
    np.testing.assert_allclose(y, x, atol=1e-12)
    upstream = rng.normal(size=y.shape)
    dx, _ = layer.backward(upstream, params, cache)
    np.testing.assert_allclose(dx, upstream, atol=1e-12)


@pytest.mark.parametrize("mode", ["train", "eval"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_batchnorm_gradcheck(mode, seed):
    rng = np.random.default_rng(seed)
    layer = BatchNorm2d(3)
    params = {"scale": rng.normal(size=3) + 1.5, "shift": rng.normal(size=3)}
    running = {
        "running_mean": rng.normal(size=3) * 0.2,
        "running_var": np.abs(rng.normal(size=3)) + 0.5,
    }
    x = rng.normal(size=(3, 4, 4, 3))
    worst = check_layer(layer, x, params, running=running, mode=mode, seed_upstream=seed)
    assert worst < TOLERANCE


def test_batchnorm_running_stats_move_in_train_and_freeze_in_eval():
    layer = BatchNorm2d(2)
    params = layer.init_params(Rng(0))
    running = {k: v.astype(np.float64) for k, v in layer.init_running().items()}
    x = np.random.default_rng(0).normal(loc=2.0, size=(4, 3, 3, 2))
    layer.forward(x, params, running, "train", None, {})
    assert not np.allclose(running["running_mean"], 0.0)
    frozen = {k: v.copy() for k, v in running.items()}
    layer.forward(x, params, running, "eval", None, {})
    for k in running:
        np.testing.assert_array_equal(running[k], frozen[k])


def test_batchnorm_backward_leaves_running_stats_unchanged():
    layer = BatchNorm2d(2)
    params = layer.init_params(Rng(0))
    running = {k: v.astype(np.float64) for k, v in layer.init_running().items()}
    x = np.random.default_rng(1).normal(size=(4, 3, 3, 2))
    cache = {}
    y = layer.forward(x, params, running, "train", None, cache)
    snapshot = {k: v.copy() for k, v in running.items()}
    layer.backward(np.ones_like(y), params, cache)
    for k in running:
        np.testing.assert_array_equal(running[k], snapshot[k])


@pytest.mark.parametrize("seed", [0, 1])
def test_relu_gradcheck(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 4, 4, 2)) + 0.05  # keep clear of the kink
    worst = check_layer(ReLU(), x, {}, seed_upstream=seed)
    assert worst < TOLERANCE


@pytest.mark.parametrize("rate,seed", [(0.3, 0), (0.5, 1)])
def test_dropout_gradcheck_fixed_mask(rate, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, 3, 3, 2))
    worst = check_layer(
        Dropout(rate), x, {}, mode="train", rng_factory=lambda: Rng(123), seed_upstream=seed
    )
    assert worst < TOLERANCE


def test_dropout_eval_is_identity():
    x = np.random.default_rng(0).normal(size=(2, 4, 4, 3))
    y = Dropout(0.4).forward(x, {}, {}, "eval", None, {})
    np.testing.assert_array_equal(y, x)


def test_dropout_scales_surviving_elements():
    x = np.ones((1, 10, 10, 4), dtype=np.float64)
    y = Dropout(0.25).forward(x, {}, {}, "train", Rng(5), {})
    survivors = y[y > 0]
    np.testing.assert_allclose(survivors, 1.0 / 0.75)
    assert 0.5 < (y > 0).mean() < 0.95


def test_dropout_rejects_bad_rate():
    with pytest.raises(ValueError):
        Dropout(1.0)
    with pytest.raises(ValueError):
        Dropout(-0.1)


@pytest.mark.parametrize("size,dim,seed", [(2, 6, 0), (4, 9, 1), (3, 7, 2)])
def test_maxpool_gradcheck(size, dim, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, dim, dim, 2))
    worst = check_layer(MaxPool2d(size), x, {}, seed_upstream=seed)
    assert worst < TOLERANCE


def test_maxpool_floors_incomplete_windows():
    x = np.arange(2 * 5 * 5 * 1, dtype=np.float64).reshape(2, 5, 5, 1)
    y = MaxPool2d(2).forward(x, {}, {}, "eval", None, {})
    assert y.shape == (2, 2, 2, 1)
    assert y[0, 0, 0, 0] == x[0, :2, :2, 0].max()


def test_maxpool_tie_routes_gradient_to_first():
    x = np.zeros((1, 2, 2, 1))
    layer = MaxPool2d(2)
    cache = {}
    layer.forward(x, {}, {}, "eval", None, cache)
    dx, _ = layer.backward(np.ones((1, 1, 1, 1)), {}, cache)
    assert dx[0, 0, 0, 0] == 1.0
    assert dx.sum() == 1.0


@pytest.mark.parametrize("seed", [0, 1])
def test_global_avg_pool_gradcheck(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, 5, 5, 3))
    worst = check_layer(GlobalAvgPool(), x, {}, seed_upstream=seed)
    assert worst < TOLERANCE


def test_flatten_roundtrip_gradient():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 3, 3, 2))
    worst = check_layer(Flatten(), x, {}, seed_upstream=0)
    assert worst < TOLERANCE


@pytest.mark.parametrize("bias,seed", [(True, 0), (True, 1), (False, 2)])
def test_dense_gradcheck(bias, seed):
    rng = np.random.default_rng(seed)
    layer = Dense(7, 4, bias=bias)
    params = {"weight": rng.normal(size=(7, 4))}
    if bias:
        params["bias"] = rng.normal(size=4)
    x = rng.normal(size=(3, 7))
    worst = check_layer(layer, x, params, seed_upstream=seed)
    assert worst < TOLERANCE


def test_dense_zero_upstream_gives_zero_parameter_gradients():
    layer = Dense(5, 3)
    rng = np.random.default_rng(0)
    params = {"weight": rng.normal(size=(5, 3)), "bias": rng.normal(size=3)}
    x = rng.normal(size=(4, 5))
    cache = {}
    layer.forward(x, params, {}, "eval", None, cache)
    dx, grads = layer.backward(np.zeros((4, 3)), params, cache)
    assert not grads["weight"].any()
    assert not grads["bias"].any()
    assert not dx.any()


@pytest.mark.parametrize("seed", [0, 1])
def test_softmax_gradcheck(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(3, 4))
    worst = check_layer(Softmax(), x, {}, seed_upstream=seed)
    assert worst < TOLERANCE


def test_softmax_rows_are_probability_vectors():
    x = np.random.default_rng(0).normal(scale=5, size=(10, 4))
    y = Softmax().forward(x, {}, {}, "eval", None, {})
    assert (y >= 0).all()
    np.testing.assert_allclose(y.sum(axis=1), 1.0, atol=1e-12)
