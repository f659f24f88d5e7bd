"""Differentiable building blocks: convolution, relu, pooling, upsampling.

Layers work on single samples shaped (channels, *spatial) with one or two
spatial axes. Each layer keeps whatever forward state its backward pass
needs (inputs, relu masks, pool argmax routes); calling backward without
a matching forward is a contract violation. Convolution gradients
accumulate into ``grad_weight``/``grad_bias`` so a batch can sum
contributions before the optimizer step.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import DomainError


class Conv:
    """Cross-correlation with same-size zero padding and a bias per filter.

    Weights start uniform in +-sqrt(6 / (fan_in + fan_out)), biases at
    zero; the generator is passed in so a whole model initializes from
    one seeded stream.
    """

    def __init__(
        self, dim: int, c_in: int, c_out: int, kernel: int, rng: np.random.Generator
    ):
        if dim not in (1, 2):
            raise DomainError(f"convolution supports 1 or 2 spatial axes, not {dim}")
        if kernel % 2 == 0 or kernel < 1:
            raise DomainError(f"kernel size must be odd and positive, got {kernel}")
        fan_in = c_in * kernel**dim
        fan_out = c_out * kernel**dim
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        self.dim = dim
        self.weight = rng.uniform(-limit, limit, (c_out, c_in) + (kernel,) * dim)
        self.bias = np.zeros(c_out)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != self.dim + 1 or x.shape[0] != self.weight.shape[1]:
            raise DomainError(
                f"input of shape {x.shape} does not fit a "
                f"{self.weight.shape[1]}-channel {self.dim}d convolution"
            )
        self._x = np.ascontiguousarray(x, dtype=np.float64)
        if self.dim == 1:
            return kernels.conv1d_forward(self._x, self.weight, self.bias)
        return kernels.conv2d_forward(self._x, self.weight, self.bias)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise DomainError("backward without a stored forward pass")
        gy = np.ascontiguousarray(gy, dtype=np.float64)
        if self.dim == 1:
            gx, gw, gb = kernels.conv1d_backward(self._x, self.weight, gy)
        else:
            gx, gw, gb = kernels.conv2d_backward(self._x, self.weight, gy)
        self.grad_weight += gw
        self.grad_bias += gb
        return gx


class Relu:
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0.0
        return np.where(self._mask, x, 0.0)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        return np.where(self._mask, gy, 0.0)


class MaxPool:
    """Non-overlapping windowed maximum; remembers argmax for routing."""

    def __init__(self, dim: int, size: int = 2):
        if dim not in (1, 2):
            raise DomainError(f"pooling supports 1 or 2 spatial axes, not {dim}")
        if size < 1:
            raise DomainError(f"pool size must be positive, got {size}")
        self.dim = dim
        self.size = size

    def forward(self, x: np.ndarray) -> np.ndarray:
        if any(s % self.size for s in x.shape[1:]):
            raise DomainError(
                f"spatial extent {x.shape[1:]} is not divisible by pool size {self.size}"
            )
        x = np.ascontiguousarray(x, dtype=np.float64)
        self._in_shape = x.shape
        if self.dim == 1:
            y, self._idx = kernels.maxpool1d_forward(x, self.size)
        else:
            y, self._idx = kernels.maxpool2d_forward(x, self.size)
        return y

    def backward(self, gy: np.ndarray) -> np.ndarray:
        gy = np.ascontiguousarray(gy, dtype=np.float64)
        if self.dim == 1:
            return kernels.maxpool1d_backward(gy, self._idx, self._in_shape[1])
        return kernels.maxpool2d_backward(
            gy, self._idx, self._in_shape[1], self._in_shape[2]
        )


class Upsample:
    """Nearest-neighbor upsampling by a factor of two."""

    def __init__(self, dim: int):
        if dim not in (1, 2):
            raise DomainError(f"upsampling supports 1 or 2 spatial axes, not {dim}")
        self.dim = dim

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if self.dim == 1:
            return kernels.upsample1d_forward(x)
        return kernels.upsample2d_forward(x)

    def backward(self, gy: np.ndarray) -> np.ndarray:
        gy = np.ascontiguousarray(gy, dtype=np.float64)
        if self.dim == 1:
            return kernels.upsample1d_backward(gy)
        return kernels.upsample2d_backward(gy)
