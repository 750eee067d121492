"""Binary model weight files.

Layout, little-endian throughout:

    magic  b"EMOC"
    u16    format version (currently 1)
    u8     arch id (0 = baseline, 1 = enhanced)
    repeated tensor records until end of file:
        u16  name length, then that many UTF-8 name bytes
        u8   rank
        u32  dims[rank]
        f32  row-major data

Trainable tensors are written first, then batch-norm running statistics,
both in layer order.  Weights are stored and kept in memory as float32, so
save -> load round-trips are bit-identical.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from emocert.nn.architectures import model_spec
from emocert.nn.network import ModelSpec, Network, Parameters

MAGIC = b"EMOC"
FORMAT_VERSION = 1
_ARCH_TO_BYTE = {"baseline": 0, "enhanced": 1}
_BYTE_TO_ARCH = {v: k for k, v in _ARCH_TO_BYTE.items()}


class ModelFileError(ValueError):
    """Structurally invalid model file (bad magic, truncation, bad tensors)."""


class UnsupportedVersionError(ModelFileError):
    pass


def _write_tensor(out: bytearray, name: str, tensor: np.ndarray) -> None:
    raw = name.encode("utf-8")
    out += struct.pack("<H", len(raw))
    out += raw
    out += struct.pack("<B", tensor.ndim)
    out += struct.pack(f"<{tensor.ndim}I", *tensor.shape)
    out += np.ascontiguousarray(tensor, dtype="<f4").tobytes()


def save_model(spec: ModelSpec, params: Parameters, path: str | Path) -> None:
    if spec.arch_id not in _ARCH_TO_BYTE:
        raise ValueError(f"unknown arch_id {spec.arch_id!r}")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", FORMAT_VERSION)
    out += struct.pack("<B", _ARCH_TO_BYTE[spec.arch_id])
    for name, tensor in params.tensors.items():
        _write_tensor(out, name, tensor)
    for name, tensor in params.running.items():
        _write_tensor(out, name, tensor)
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFileError(f"truncated model file while reading {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def done(self) -> bool:
        return self.pos >= len(self.data)


def load_model(path: str | Path) -> tuple[ModelSpec, Parameters]:
    reader = _Reader(Path(path).read_bytes())
    if reader.take(4, "magic") != MAGIC:
        raise ModelFileError("not a model file (bad magic bytes)")
    (version,) = struct.unpack("<H", reader.take(2, "version"))
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"unsupported model format version {version}, expected {FORMAT_VERSION}"
        )
    (arch_byte,) = struct.unpack("<B", reader.take(1, "arch id"))
    if arch_byte not in _BYTE_TO_ARCH:
        raise ModelFileError(f"unknown arch id byte {arch_byte}")
    spec = model_spec(_BYTE_TO_ARCH[arch_byte])

    tensors: dict[str, np.ndarray] = {}
    while not reader.done():
        (name_len,) = struct.unpack("<H", reader.take(2, "tensor name length"))
        name = reader.take(name_len, "tensor name").decode("utf-8")
        (rank,) = struct.unpack("<B", reader.take(1, f"rank of {name}"))
        dims = struct.unpack(f"<{rank}I", reader.take(4 * rank, f"dims of {name}"))
        count = int(np.prod(dims)) if rank else 1
        raw = reader.take(4 * count, f"data of {name}")
        if name in tensors:
            raise ModelFileError(f"duplicate tensor {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()

    # split into trainable / running and validate against the architecture
    reference = Network(spec).init_params(_ZeroRng())
    params = Parameters()
    problems = []
    for store, expected in (("tensors", reference.tensors), ("running", reference.running)):
        for name, ref in expected.items():
            if name not in tensors:
                problems.append(f"missing tensor {name}")
                continue
            got = tensors.pop(name)
            if got.shape != ref.shape:
                problems.append(f"tensor {name} has shape {got.shape}, expected {ref.shape}")
                continue
            getattr(params, store)[name] = got
    for name in tensors:
        problems.append(f"unexpected tensor {name}")
    if problems:
        raise ModelFileError("invalid model file: " + "; ".join(problems))
    return spec, params


class _ZeroRng:
    """Shape-only stand-in rng for building reference parameter layouts."""

    def spawn(self, *parts):
        return self

    def uniform_array(self, n, lo=0.0, hi=1.0):
        return np.zeros(n)
