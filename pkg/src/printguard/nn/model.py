"""Model assembly, initialization, prediction, and file format.

The classifier is a fixed stack: conv -> [bn] -> relu -> pool -> conv ->
[bn] -> relu -> flatten -> dense -> relu -> dense, with two output classes
(good = 0, bad = 1). Filter shapes, channel counts and the batch-norm
toggle are architecture parameters so the ablation variants share all code.

Model files are self-describing: magic ``PGDM``, version, a sequence of
named tensors (u8 name length + name, u32 rank, u32 dims, little-endian
float32 data) and a trailing CRC32 of everything before it.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..core import Rng
from ..preprocess import STANDARD_HEIGHT, STANDARD_WIDTH
from .layers import BatchNorm, Conv2D, Dense, Flatten, Layer, MaxPool, ReLU, softmax

MODEL_MAGIC = b"PGDM"
MODEL_VERSION = 1

LABEL_GOOD = 0
LABEL_BAD = 1


class ModelFormatError(ValueError):
    """Corrupt or incompatible model file."""


@dataclass(frozen=True)
class Architecture:
    conv1_shape: tuple[int, int] = (5, 10)
    conv1_channels: int = 3
    conv2_shape: tuple[int, int] = (10, 5)
    conv2_channels: int = 5
    hidden: int = 100
    batchnorm: bool = True
    epsilon: float = 1e-5
    input_shape: tuple[int, int, int] = (STANDARD_HEIGHT, STANDARD_WIDTH, 1)

    def __post_init__(self):
        # epsilon lives in the float32 metadata record; canonicalize now so
        # a saved-and-reloaded architecture compares equal
        object.__setattr__(self, "epsilon", float(np.float32(self.epsilon)))
        object.__setattr__(self, "conv1_shape", tuple(self.conv1_shape))
        object.__setattr__(self, "conv2_shape", tuple(self.conv2_shape))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))

    def with_square_filters(self, size: int = 5) -> "Architecture":
        return Architecture(conv1_shape=(size, size), conv2_shape=(size, size),
                            conv1_channels=self.conv1_channels,
                            conv2_channels=self.conv2_channels,
                            hidden=self.hidden, batchnorm=self.batchnorm,
                            epsilon=self.epsilon, input_shape=self.input_shape)

    def without_batchnorm(self) -> "Architecture":
        return Architecture(conv1_shape=self.conv1_shape,
                            conv2_shape=self.conv2_shape,
                            conv1_channels=self.conv1_channels,
                            conv2_channels=self.conv2_channels,
                            hidden=self.hidden, batchnorm=False,
                            epsilon=self.epsilon, input_shape=self.input_shape)


class Model:
    """Layer stack plus architecture metadata.

    `input_mean` standardizes incoming images (training-set mean image,
    subtracted on every forward pass); it is zero until training sets it
    and is persisted with the parameters.
    """

    def __init__(self, arch: Architecture, dtype=np.float32):
        self.arch = arch
        self.dtype = np.dtype(dtype)
        h, w, cin = arch.input_shape
        self.input_mean = np.zeros((h, w, cin), dtype=np.float32)
        self.conv1 = Conv2D("conv1", *arch.conv1_shape, cin, arch.conv1_channels,
                            dtype=dtype)
        self.pool = MaxPool(3)
        c1h, c1w, _ = self.conv1.out_shape(h, w)
        p1h, p1w, _ = self.pool.out_shape(c1h, c1w, arch.conv1_channels)
        self.conv2 = Conv2D("conv2", *arch.conv2_shape, arch.conv1_channels,
                            arch.conv2_channels, dtype=dtype)
        c2h, c2w, _ = self.conv2.out_shape(p1h, p1w)
        self.flat_size = c2h * c2w * arch.conv2_channels
        self.dense1 = Dense("dense1", self.flat_size, arch.hidden, dtype=dtype)
        self.dense2 = Dense("dense2", arch.hidden, 2, dtype=dtype)

        self.layers: list[Layer] = [self.conv1]
        if arch.batchnorm:
            self.bn1 = BatchNorm("bn1", arch.conv1_channels, eps=arch.epsilon,
                                 dtype=dtype)
            self.layers.append(self.bn1)
        self.layers += [ReLU(), self.pool, self.conv2]
        if arch.batchnorm:
            self.bn2 = BatchNorm("bn2", arch.conv2_channels, eps=arch.epsilon,
                                 dtype=dtype)
            self.layers.append(self.bn2)
        self.layers += [ReLU(), Flatten(), self.dense1, ReLU(), self.dense2]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = x - self.input_mean
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        g = dlogits
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def release_caches(self) -> None:
        for layer in self.layers:
            layer.release_cache()

    def params(self) -> list[tuple[str, np.ndarray, np.ndarray, bool]]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def tensors(self) -> list[tuple[str, np.ndarray]]:
        """All persistent tensors (parameters, input mean, batch-norm stats)."""
        out = [(name, p) for name, p, _, _ in self.params()]
        out.append(("input_mean", self.input_mean))
        for layer in self.layers:
            if isinstance(layer, BatchNorm):
                out.extend(layer.state())
        return out

    def predict_proba(self, images: np.ndarray) -> np.ndarray:
        logits = self.forward(images, train=False)
        self.release_caches()
        return softmax(logits.astype(np.float64))


def init_model(arch: Architecture, seed: int, dtype=np.float32) -> Model:
    """He-initialized model; same seed always yields a bit-identical model.

    Weights are drawn from Normal(0, sqrt(2/fan_in)) in a fixed order
    (conv1, conv2, dense1, dense2, each flat row-major); biases start at 0,
    batch-norm at gamma=1, beta=0, running mean 0, running variance 1.
    """
    model = Model(arch, dtype=dtype)
    rng = Rng(seed, stream=1)

    def he_fill(w: np.ndarray, fan_in: int) -> None:
        std = (2.0 / fan_in) ** 0.5
        flat = w.reshape(-1)
        for i in range(flat.size):
            flat[i] = rng.normal(0.0, std)

    c1 = model.conv1
    he_fill(c1.w, c1.fh * c1.fw * c1.cin)
    c2 = model.conv2
    he_fill(c2.w, c2.fh * c2.fw * c2.cin)
    he_fill(model.dense1.w, model.dense1.n_in)
    he_fill(model.dense2.w, model.dense2.n_in)
    return model


def _meta_tensor(arch: Architecture) -> np.ndarray:
    return np.array([
        arch.conv1_shape[0], arch.conv1_shape[1], arch.conv1_channels,
        arch.conv2_shape[0], arch.conv2_shape[1], arch.conv2_channels,
        arch.hidden, 1.0 if arch.batchnorm else 0.0, arch.epsilon,
        arch.input_shape[0], arch.input_shape[1], arch.input_shape[2],
    ], dtype=np.float32)


def _arch_from_meta(meta: np.ndarray) -> Architecture:
    if meta.shape != (12,):
        raise ModelFormatError(f"bad architecture record shape {meta.shape}")
    v = meta.astype(np.float64)
    return Architecture(
        conv1_shape=(int(v[0]), int(v[1])), conv1_channels=int(v[2]),
        conv2_shape=(int(v[3]), int(v[4])), conv2_channels=int(v[5]),
        hidden=int(v[6]), batchnorm=bool(v[7] != 0), epsilon=float(v[8]),
        input_shape=(int(v[9]), int(v[10]), int(v[11])),
    )


def save_model(model: Model, path) -> None:
    chunks = [MODEL_MAGIC, struct.pack("<I", MODEL_VERSION)]

    def add(name: str, arr: np.ndarray) -> None:
        data = np.ascontiguousarray(arr, dtype="<f4")
        encoded = name.encode("ascii")
        chunks.append(struct.pack("<B", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.tobytes())

    add("meta", _meta_tensor(model.arch))
    for name, tensor in model.tensors():
        add(name, tensor)
    body = b"".join(chunks)
    with open(path, "wb") as f:
        f.write(body)
        f.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def _parse_tensors(body: bytes) -> list[tuple[str, np.ndarray]]:
    tensors = []
    pos = 0
    while pos < len(body):
        try:
            (name_len,) = struct.unpack_from("<B", body, pos)
            pos += 1
            name = body[pos:pos + name_len].decode("ascii")
            pos += name_len
            (rank,) = struct.unpack_from("<I", body, pos)
            pos += 4
            if rank > 8:
                raise ModelFormatError(f"implausible tensor rank {rank}")
            dims = struct.unpack_from(f"<{rank}I", body, pos)
            pos += 4 * rank
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            raw = body[pos:pos + 4 * count]
            if len(raw) != 4 * count:
                raise ModelFormatError(f"tensor {name!r} truncated")
            pos += 4 * count
        except struct.error:
            raise ModelFormatError("truncated tensor record") from None
        tensors.append((name, np.frombuffer(raw, dtype="<f4").reshape(dims).copy()))
    return tensors


def load_model(path) -> Model:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(MODEL_MAGIC) + 8 or not blob.startswith(MODEL_MAGIC):
        raise ModelFormatError(f"{path}: not a model file")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ModelFormatError(f"{path}: CRC mismatch")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    tensors = dict(_parse_tensors(blob[8:-4]))
    if "meta" not in tensors:
        raise ModelFormatError(f"{path}: missing architecture record")
    model = Model(_arch_from_meta(tensors.pop("meta")))
    expected = dict(model.tensors())
    if set(expected) != set(tensors):
        missing = sorted(set(expected) - set(tensors))
        extra = sorted(set(tensors) - set(expected))
        raise ModelFormatError(f"{path}: tensor set mismatch "
                               f"(missing {missing}, unexpected {extra})")
    for name, target in expected.items():
        src = tensors[name]
        if src.shape != target.shape:
            raise ModelFormatError(f"{path}: tensor {name!r} has shape "
                                   f"{src.shape}, expected {target.shape}")
        target[:] = src
    return model


def predict(model: Model, image) -> tuple[str, np.ndarray]:
    """Label one 45x132 binary segment; exact ties classify as bad."""
    from ..preprocess import image_to_tensor

    x = image_to_tensor(image)[None, ...]
    probs = model.predict_proba(x)[0]
    label = "bad" if probs[LABEL_BAD] >= probs[LABEL_GOOD] else "good"
    return label, probs
