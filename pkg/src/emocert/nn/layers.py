"""Network layers with hand-derived forward and backward passes.

Every layer is an immutable spec object; trainable tensors live in an
external name -> array mapping so the same layer code serves float32
training and float64 gradient checking.  ``forward`` fills a per-call cache
dict with whatever ``backward`` needs; backward never touches batch-norm
running statistics.

Feature maps use channels-last layout (batch, height, width, channels).
Convolutions never materialise an im2col matrix: the padded plane is
flattened to (positions, channels) and each kernel tap becomes one small
GEMM at a fixed row offset, accumulated over L2-sized row chunks.  On the
low-memory-bandwidth machines this targets, that is several times faster
than im2col because the input is read essentially once.  Chunk size is a
fixed constant so results are bit-stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from emocert.rng import Rng

# fixed GEMM chunk (rows of the flattened image plane); never autotuned,
# so accumulation order and therefore results are reproducible
_CONV_CHUNK = 4096


class Layer:
    """Base layer: stateless spec with forward/backward over external params."""

    kind = "layer"

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        return {}

    def running_shapes(self) -> dict[str, tuple[int, ...]]:
        return {}

    def init_params(self, rng: Rng) -> dict[str, np.ndarray]:
        return {}

    def init_running(self) -> dict[str, np.ndarray]:
        return {}

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        """Shape transform on (h, w, c) or (features,) tuples."""
        return in_shape

    def forward(self, x, params, running, mode, rng, cache):
        raise NotImplementedError

    def backward(self, dy, params, cache):
        """Returns (dx, grads) where grads maps local param name -> gradient."""
        raise NotImplementedError


def _fan_scaled_uniform(
    rng: Rng, shape: tuple[int, ...], fan_in: int, fan_out: int, dtype=np.float32
) -> np.ndarray:
    """U(-L, L) with L = sqrt(6 / (fan_in + fan_out)) (fan-average scaling).

    Pure fan-in scaling makes the untrained baseline's post-ReLU logits
    large enough to saturate the softmax on some seeds; fan-average keeps
    the untrained networks in the near-uniform-probability regime.
    """
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng.uniform_array(int(np.prod(shape)), -limit, limit).reshape(shape).astype(dtype)


def _shifted_matmul(plane: np.ndarray, taps, n_out: int, c_out: int) -> np.ndarray:
    """sum over taps of plane[offset : offset + n_out] @ matrix.

    ``plane`` is (n, c_in); each tap is (row offset, (c_in, c_out) matrix).
    Accumulates in fixed chunk order so results are reproducible.  Rows
    beyond n_out are left uninitialised; callers slice them away.
    """
    out = np.empty((plane.shape[0], c_out), dtype=plane.dtype)
    tmp = np.empty((_CONV_CHUNK, c_out), dtype=plane.dtype)
    first_off, first_mat = taps[0]
    for start in range(0, n_out, _CONV_CHUNK):
        stop = min(start + _CONV_CHUNK, n_out)
        acc = out[start:stop]
        t = tmp[: stop - start]
        np.matmul(plane[start + first_off : stop + first_off], first_mat, out=acc)
        for offset, mat in taps[1:]:
            np.matmul(plane[start + offset : stop + offset], mat, out=t)
            acc += t
    return out


# an im2col patch matrix is cheaper than shifted GEMMs while it stays
# small; the cutoff is in bytes and depends only on shapes, never timing,
# so the choice of path is deterministic
_GATHER_LIMIT_BYTES = 32 * 2**20


def _gather_cols(xp: np.ndarray, k: int) -> np.ndarray:
    """(B, Hp, Wp, C) -> (B*Ho*Wo, k*k*C) patch matrix for stride-1 windows."""
    b, hp, wp, c = xp.shape
    ho, wo = hp - k + 1, wp - k + 1
    cols = np.empty((b, ho, wo, k, k, c), dtype=xp.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, :, i, j, :] = xp[:, i : i + ho, j : j + wo, :]
    return cols.reshape(b * ho * wo, k * k * c)


@dataclass(frozen=True)
class Conv2d(Layer):
    """Stride-1 cross-correlation; weight layout (k, k, c_in, c_out)."""

    in_channels: int
    out_channels: int
    kernel: int
    padding: int
    bias: bool = True
    kind = "conv2d"

    def param_shapes(self):
        shapes = {"weight": (self.kernel, self.kernel, self.in_channels, self.out_channels)}
        if self.bias:
            shapes["bias"] = (self.out_channels,)
        return shapes

    def init_params(self, rng):
        k2 = self.kernel * self.kernel
        params = {
            "weight": _fan_scaled_uniform(
                rng.spawn("weight"),
                self.param_shapes()["weight"],
                self.in_channels * k2,
                self.out_channels * k2,
            )
        }
        if self.bias:
            params["bias"] = np.zeros(self.out_channels, dtype=np.float32)
        return params

    def out_shape(self, in_shape):
        h, w, c = in_shape
        if c != self.in_channels:
            raise ValueError(f"conv2d expects {self.in_channels} input channels, got {c}")
        k, p = self.kernel, self.padding
        return (h + 2 * p - k + 1, w + 2 * p - k + 1, self.out_channels)

    def forward(self, x, params, running, mode, rng, cache):
        k, p = self.kernel, self.padding
        b, h, w, _ = x.shape
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
        hp, wp = h + 2 * p, w + 2 * p
        ho, wo = hp - k + 1, wp - k + 1
        weight = params["weight"]
        cache["dims"] = (b, h, w, hp, wp, ho, wo)
        kk_cin = k * k * self.in_channels
        if b * ho * wo * kk_cin * xp.itemsize <= _GATHER_LIMIT_BYTES:
            cols = _gather_cols(xp, k)
            y = (cols @ weight.reshape(kk_cin, self.out_channels)).reshape(
                b, ho, wo, self.out_channels
            )
            cache["cols"] = cols
        else:
            plane = xp.reshape(b * hp * wp, self.in_channels)
            taps = [(i * wp + j, weight[i, j]) for i in range(k) for j in range(k)]
            n_out = b * hp * wp - (k - 1) * wp - (k - 1)
            yacc = _shifted_matmul(plane, taps, n_out, self.out_channels)
            y = np.ascontiguousarray(
                yacc.reshape(b, hp, wp, self.out_channels)[:, :ho, :wo, :]
            )
            cache["plane"] = plane
        if self.bias:
            y += params["bias"]
        return y

    def backward(self, dy, params, cache):
        k, p = self.kernel, self.padding
        b, h, w, hp, wp, ho, wo = cache["dims"]
        weight = params["weight"]
        cin, cout = self.in_channels, self.out_channels
        n_plane = b * hp * wp
        max_off = (k - 1) * wp + (k - 1)
        itemsize = dy.itemsize

        dw_chunked = "cols" not in cache
        dx_shifted = b * h * w * k * k * cout * itemsize > _GATHER_LIMIT_BYTES or p > k - 1
        if dw_chunked or dx_shifted:
            # dy on the padded-plane grid behind a zero guard; guard rows,
            # junk and pad positions contribute nothing
            guarded = np.zeros((max_off + n_plane, cout), dtype=dy.dtype)
            dyfull = guarded[max_off:]
            dyfull.reshape(b, hp, wp, cout)[:, :ho, :wo, :] = dy

        # -- weight/bias gradients ----------------------------------------
        if dw_chunked:
            # chunked so the shifted plane reads stay cache-resident
            plane = cache["plane"]
            n_valid = n_plane - max_off
            dweight = np.zeros_like(weight)
            tmp = np.empty((cin, cout), dtype=dy.dtype)
            for start in range(0, n_valid, _CONV_CHUNK):
                stop = min(start + _CONV_CHUNK, n_valid)
                dyc = dyfull[start:stop]
                for i in range(k):
                    for j in range(k):
                        off = i * wp + j
                        np.matmul(plane[start + off : stop + off].T, dyc, out=tmp)
                        dweight[i, j] += tmp
            grads = {"weight": dweight}
        else:
            dym = dy.reshape(b * ho * wo, cout)
            grads = {"weight": (cache["cols"].T @ dym).reshape(weight.shape)}
        if self.bias:
            grads["bias"] = dy.sum(axis=(0, 1, 2))

        # -- input gradient: correlate dy with the flipped kernel ----------
        if dx_shifted:
            taps = [
                (max_off - (i * wp + j), weight[i, j].T) for i in range(k) for j in range(k)
            ]
            dxp = _shifted_matmul(guarded, taps, n_plane, cin)[:n_plane].reshape(
                b, hp, wp, cin
            )
            dx = np.ascontiguousarray(dxp[:, p : p + h, p : p + w, :]) if p else dxp
        else:
            g = k - 1 - p
            dyp = np.pad(dy, ((0, 0), (g, g), (g, g), (0, 0))) if g else dy
            wflip = weight[::-1, ::-1].transpose(0, 1, 3, 2).reshape(k * k * cout, cin)
            dx = (_gather_cols(dyp, k) @ wflip).reshape(b, h, w, cin)
        return dx, grads


@dataclass(frozen=True)
class BatchNorm2d(Layer):
    channels: int
    eps: float = 1e-5
    momentum: float = 0.1
    kind = "batch_norm"

    def param_shapes(self):
        return {"scale": (self.channels,), "shift": (self.channels,)}

    def running_shapes(self):
        return {"running_mean": (self.channels,), "running_var": (self.channels,)}

    def init_params(self, rng):
        return {
            "scale": np.ones(self.channels, dtype=np.float32),
            "shift": np.zeros(self.channels, dtype=np.float32),
        }

    def init_running(self):
        return {
            "running_mean": np.zeros(self.channels, dtype=np.float32),
            "running_var": np.ones(self.channels, dtype=np.float32),
        }

    def forward(self, x, params, running, mode, rng, cache):
        n = x.shape[0] * x.shape[1] * x.shape[2]
        if mode == "train":
            mean = x.mean(axis=(0, 1, 2))
            var = x.var(axis=(0, 1, 2))  # biased, used for normalisation
            m = self.momentum
            # running_var keeps the unbiased estimate (torch convention)
            unbiased = var * (n / (n - 1)) if n > 1 else var
            running["running_mean"][...] = (1 - m) * running["running_mean"] + m * mean
            running["running_var"][...] = (1 - m) * running["running_var"] + m * unbiased
        else:
            mean = running["running_mean"].astype(x.dtype)
            var = running["running_var"].astype(x.dtype)
        inv_std = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype)
        # y = a*x + b; xhat is rebuilt in backward from the cached input
        a = params["scale"] * inv_std
        cache["x"] = x
        cache["mean"] = mean
        cache["inv_std"] = inv_std
        cache["mode"] = mode
        return a * x + (params["shift"] - mean * a)

    def backward(self, dy, params, cache):
        inv_std = cache["inv_std"]
        xhat = (cache["x"] - cache["mean"]) * inv_std
        grads = {
            "scale": np.einsum("bhwc,bhwc->c", dy, xhat),
            "shift": dy.sum(axis=(0, 1, 2)),
        }
        coeff = params["scale"] * inv_std
        if cache["mode"] == "train":
            # the batch-stat terms reuse the per-channel sums from the
            # parameter gradients: mean(dxhat) = scale*shift_grad/n etc.
            n = dy.shape[0] * dy.shape[1] * dy.shape[2]
            dx = (dy - grads["shift"] / n - xhat * (grads["scale"] / n)) * coeff
        else:
            dx = dy * coeff
        return dx, grads


@dataclass(frozen=True)
class ReLU(Layer):
    kind = "relu"

    def forward(self, x, params, running, mode, rng, cache):
        y = np.maximum(x, 0)
        cache["mask"] = x > 0
        return y

    def backward(self, dy, params, cache):
        return dy * cache["mask"], {}


@dataclass(frozen=True)
class Dropout(Layer):
    """Inverted dropout: element dropped when its u64 draw < rate * 2**64."""

    rate: float
    kind = "dropout"

    def __post_init__(self):
        if not 0 <= self.rate < 1:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.rate}")

    def forward(self, x, params, running, mode, rng, cache):
        if mode != "train":
            cache["mask"] = None
            return x
        if rng is None:
            raise ValueError("train-mode dropout requires an rng")
        threshold = np.uint64(int(self.rate * 2.0**64))
        keep = rng.u64_array(x.size) >= threshold
        mask = keep.reshape(x.shape).astype(x.dtype)
        mask /= 1.0 - self.rate
        cache["mask"] = mask
        return x * mask

    def backward(self, dy, params, cache):
        mask = cache["mask"]
        return (dy if mask is None else dy * mask), {}


@dataclass(frozen=True)
class MaxPool2d(Layer):
    size: int
    kind = "max_pool"

    def out_shape(self, in_shape):
        h, w, c = in_shape
        return (h // self.size, w // self.size, c)

    def forward(self, x, params, running, mode, rng, cache):
        s = self.size
        b, h, w, c = x.shape
        ho, wo = h // s, w // s
        # incomplete edge windows are dropped (floor semantics)
        windows = np.ascontiguousarray(
            x[:, : ho * s, : wo * s, :]
            .reshape(b, ho, s, wo, s, c)
            .transpose(0, 1, 3, 5, 2, 4)
        ).reshape(b, ho, wo, c, s * s)
        idx = windows.argmax(axis=-1)  # first max wins on ties
        cache["idx"] = idx
        cache["x_shape"] = x.shape
        return np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]

    def backward(self, dy, params, cache):
        s = self.size
        b, h, w, c = cache["x_shape"]
        ho, wo = h // s, w // s
        dwin = np.zeros((b, ho, wo, c, s * s), dtype=dy.dtype)
        np.put_along_axis(dwin, cache["idx"][..., None], dy[..., None], axis=-1)
        dx = np.zeros((b, h, w, c), dtype=dy.dtype)
        dx[:, : ho * s, : wo * s, :] = (
            dwin.reshape(b, ho, wo, c, s, s)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(b, ho * s, wo * s, c)
        )
        return dx, {}


@dataclass(frozen=True)
class GlobalAvgPool(Layer):
    kind = "global_avg_pool"

    def out_shape(self, in_shape):
        return (in_shape[2],)

    def forward(self, x, params, running, mode, rng, cache):
        cache["x_shape"] = x.shape
        return x.mean(axis=(1, 2))

    def backward(self, dy, params, cache):
        b, h, w, c = cache["x_shape"]
        return np.broadcast_to(dy[:, None, None, :] / (h * w), (b, h, w, c)).astype(dy.dtype), {}


@dataclass(frozen=True)
class Flatten(Layer):
    kind = "flatten"

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, params, running, mode, rng, cache):
        cache["x_shape"] = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy, params, cache):
        return dy.reshape(cache["x_shape"]), {}


@dataclass(frozen=True)
class Dense(Layer):
    """y = x @ weight + bias; weight layout (in_features, out_features)."""

    in_features: int
    out_features: int
    bias: bool = True
    bias_init: float = 0.0
    kind = "dense"

    def param_shapes(self):
        shapes = {"weight": (self.in_features, self.out_features)}
        if self.bias:
            shapes["bias"] = (self.out_features,)
        return shapes

    def init_params(self, rng):
        params = {
            "weight": _fan_scaled_uniform(
                rng.spawn("weight"),
                self.param_shapes()["weight"],
                self.in_features,
                self.out_features,
            )
        }
        if self.bias:
            params["bias"] = np.full(self.out_features, self.bias_init, dtype=np.float32)
        return params

    def out_shape(self, in_shape):
        if in_shape != (self.in_features,):
            raise ValueError(f"dense expects {self.in_features} features, got {in_shape}")
        return (self.out_features,)

    def forward(self, x, params, running, mode, rng, cache):
        cache["x"] = x
        y = x @ params["weight"]
        if self.bias:
            y += params["bias"]
        return y

    def backward(self, dy, params, cache):
        grads = {"weight": cache["x"].T @ dy}
        if self.bias:
            grads["bias"] = dy.sum(axis=0)
        return dy @ params["weight"].T, grads


@dataclass(frozen=True)
class Softmax(Layer):
    kind = "softmax"

    def forward(self, x, params, running, mode, rng, cache):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        cache["p"] = p
        return p

    def backward(self, dy, params, cache):
        p = cache["p"]
        return p * (dy - (dy * p).sum(axis=1, keepdims=True)), {}
