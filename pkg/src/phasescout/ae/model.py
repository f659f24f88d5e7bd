"""The two-stage encoder-decoder with symmetric shortcut connections.

The shape is fixed: two conv+pool encoding stages and the mirrored
upsample+conv decoding stages, 64 filters of size 3 by default, so the
latent space holds (spatial extent / 4) positions of ``filters`` channels.
Each shortcut adds the encoder activation (the relu output feeding a
pool) to the equally shaped decoder activation right after the mirrored
upsampling, before the decoder convolution. The final convolution stays
linear because spectra and correlator entries may carry either sign.

Inputs whose spatial extent is not a multiple of four are zero-padded up
to it internally and the reconstruction is cropped back, so callers only
ever see their own shape and the loss refers to the original entries.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from ..errors import DomainError, RecordError
from .layers import Conv, MaxPool, Relu, Upsample

MODEL_MAGIC = b"AEMODEL1"
MODEL_VERSION = 1


def reconstruction_loss(x: np.ndarray, xbar: np.ndarray) -> float:
    """Mean squared error over all entries of the sample."""
    if x.shape != xbar.shape:
        raise DomainError(f"shape mismatch in loss: {x.shape} vs {xbar.shape}")
    diff = np.asarray(xbar, dtype=np.float64) - np.asarray(x, dtype=np.float64)
    return float(np.mean(diff * diff))


class Autoencoder:
    def __init__(
        self,
        channels: int,
        spatial: tuple[int, ...],
        filters: int = 64,
        kernel: int = 3,
        pool: int = 2,
        shortcuts: bool = True,
        seed: int = 0,
    ):
        if channels < 1 or filters < 1:
            raise DomainError("channel and filter counts must be positive")
        spatial = tuple(int(s) for s in spatial)
        if len(spatial) not in (1, 2) or any(s < pool * pool for s in spatial):
            raise DomainError(f"unsupported input extent {spatial}")
        dim = len(spatial)
        unit = pool * pool
        self.channels = channels
        self.spatial = spatial
        self.filters = filters
        self.kernel = kernel
        self.pool = pool
        self.shortcuts = shortcuts
        self.seed = seed
        self.padded = tuple(-(-s // unit) * unit for s in spatial)

        rng = np.random.default_rng(seed)
        self.enc1 = Conv(dim, channels, filters, kernel, rng)
        self.enc2 = Conv(dim, filters, filters, kernel, rng)
        self.dec1 = Conv(dim, filters, filters, kernel, rng)
        self.dec2 = Conv(dim, filters, channels, kernel, rng)
        self._relu_e1 = Relu()
        self._relu_e2 = Relu()
        self._relu_d1 = Relu()
        self._pool1 = MaxPool(dim, pool)
        self._pool2 = MaxPool(dim, pool)
        self._up1 = Upsample(dim)
        self._up2 = Upsample(dim)
        self._r1: np.ndarray | None = None
        self._r2: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return len(self.spatial)

    @property
    def input_shape(self) -> tuple[int, ...]:
        return (self.channels, *self.spatial)

    @property
    def latent_shape(self) -> tuple[int, ...]:
        unit = self.pool * self.pool
        return (self.filters, *(p // unit for p in self.padded))

    def _pad(self, x: np.ndarray) -> np.ndarray:
        if self.padded == self.spatial:
            return np.ascontiguousarray(x, dtype=np.float64)
        out = np.zeros((self.channels, *self.padded))
        out[self._inner] = x
        return out

    def _crop(self, y: np.ndarray) -> np.ndarray:
        if self.padded == self.spatial:
            return y
        return np.ascontiguousarray(y[self._inner])

    def _embed(self, g: np.ndarray) -> np.ndarray:
        if self.padded == self.spatial:
            return g
        out = np.zeros((self.channels, *self.padded))
        out[self._inner] = g
        return out

    @property
    def _inner(self):
        return (slice(None), *(slice(0, s) for s in self.spatial))

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape != self.input_shape:
            raise DomainError(
                f"input shape {x.shape} does not match the model's {self.input_shape}"
            )
        xp = self._pad(x)
        r1 = self._relu_e1.forward(self.enc1.forward(xp))
        p1 = self._pool1.forward(r1)
        r2 = self._relu_e2.forward(self.enc2.forward(p1))
        z = self._pool2.forward(r2)
        u1 = self._up1.forward(z)
        if self.shortcuts:
            u1 = u1 + r2
        r3 = self._relu_d1.forward(self.dec1.forward(u1))
        u2 = self._up2.forward(r3)
        if self.shortcuts:
            u2 = u2 + r1
        self._r1, self._r2 = r1, r2
        return self._crop(self.dec2.forward(u2))

    def backward(self, x: np.ndarray, xbar: np.ndarray) -> None:
        """Accumulate loss gradients for the forward pass that made xbar."""
        if self._r1 is None:
            raise DomainError("backward without a stored forward pass")
        d = xbar.size
        g = self._embed(2.0 * (xbar - x) / d)
        gu2 = self.dec2.backward(g)
        gr3 = self._up2.backward(gu2)
        gu1 = self.dec1.backward(self._relu_d1.backward(gr3))
        gz = self._up1.backward(gu1)
        gr2 = self._pool2.backward(gz)
        if self.shortcuts:
            gr2 = gr2 + gu1
        gp1 = self.enc2.backward(self._relu_e2.backward(gr2))
        gr1 = self._pool1.backward(gp1)
        if self.shortcuts:
            gr1 = gr1 + gu2
        self.enc1.backward(self._relu_e1.backward(gr1))

    def sample_loss(self, x: np.ndarray) -> float:
        return reconstruction_loss(x, self.forward(x))

    # -- parameter plumbing for the optimizer ---------------------------

    def conv_layers(self) -> tuple[Conv, Conv, Conv, Conv]:
        return (self.enc1, self.enc2, self.dec1, self.dec2)

    def parameters(self) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        for conv in self.conv_layers():
            out.append((conv.weight, conv.grad_weight))
            out.append((conv.bias, conv.grad_bias))
        return out

    def zero_grads(self) -> None:
        for conv in self.conv_layers():
            conv.grad_weight[...] = 0.0
            conv.grad_bias[...] = 0.0

    def state_arrays(self) -> list[np.ndarray]:
        out = []
        for conv in self.conv_layers():
            out.append(conv.weight.copy())
            out.append(conv.bias.copy())
        return out

    def load_state_arrays(self, arrays: list[np.ndarray]) -> None:
        expected = [p.shape for p, _ in self.parameters()]
        if [a.shape for a in arrays] != expected:
            raise DomainError("parameter arrays do not match the architecture")
        for (param, _), arr in zip(self.parameters(), arrays):
            np.copyto(param, arr)

    def digest(self) -> str:
        h = hashlib.sha256()
        for param, _ in self.parameters():
            h.update(param.tobytes())
        return h.hexdigest()


# ----------------------------------------------------------------------
# checkpoint format: magic, version, architecture header, then the four
# convolution layers as length-prefixed little-endian float64 arrays
# ----------------------------------------------------------------------


def _write_array(fh, arr: np.ndarray) -> None:
    fh.write(struct.pack("<B", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(fh) -> np.ndarray:
    raw = fh.read(1)
    if len(raw) != 1:
        raise RecordError("checkpoint truncated in array header")
    (ndim,) = struct.unpack("<B", raw)
    raw = fh.read(4 * ndim)
    if len(raw) != 4 * ndim:
        raise RecordError("checkpoint truncated in array shape")
    shape = struct.unpack(f"<{ndim}I", raw)
    count = int(np.prod(shape)) if shape else 1
    raw = fh.read(8 * count)
    if len(raw) != 8 * count:
        raise RecordError("checkpoint truncated in array data")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def save_model(path, model: Autoencoder) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(
            struct.pack(
                "<BBBB",
                MODEL_VERSION,
                model.dim,
                1 if model.shortcuts else 0,
                len(model.spatial),
            )
        )
        fh.write(
            struct.pack(
                "<IIII",
                model.channels,
                model.filters,
                model.kernel,
                model.pool,
            )
        )
        fh.write(struct.pack(f"<{len(model.spatial)}I", *model.spatial))
        for conv in model.conv_layers():
            _write_array(fh, conv.weight)
            _write_array(fh, conv.bias)
    tmp.replace(path)


def load_model(path) -> Autoencoder:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise RecordError(f"{path} is not a model checkpoint")
        version, dim, shortcuts, nspatial = struct.unpack("<BBBB", fh.read(4))
        if version != MODEL_VERSION:
            raise RecordError(f"unsupported checkpoint version {version}")
        if dim != nspatial or dim not in (1, 2):
            raise RecordError("inconsistent checkpoint header")
        channels, filters, kernel, pool = struct.unpack("<IIII", fh.read(16))
        spatial = struct.unpack(f"<{nspatial}I", fh.read(4 * nspatial))
        model = Autoencoder(
            channels,
            tuple(spatial),
            filters=filters,
            kernel=kernel,
            pool=pool,
            shortcuts=bool(shortcuts),
        )
        arrays = [_read_array(fh) for _ in range(8)]
        if fh.read(1):
            raise RecordError("trailing bytes after checkpoint payload")
    model.load_state_arrays(arrays)
    return model
