"""Convolution, pooling, and upsampling kernels behind the autoencoder.

Two interchangeable implementations live here. The numpy one builds on
sliding windows and einsum; the numba one compiles explicit loops. Which
set is active is decided once at import time from the PHASESCOUT_KERNELS
environment variable: "numpy" or "numba" force one backend for all twelve
kernels, and "auto" (the default) picks per kernel. The benchmark in
benchmarks/bench_kernels.py shows einsum routing the convolutions through
BLAS at 10-30x the speed of the compiled loops at our filter counts, while
the loop versions of pooling and upsampling win by 2-4x because they skip
the intermediate window views. So auto means: convolutions from numpy,
pooling and upsampling from numba when it imports cleanly, everything from
numpy otherwise. The selected functions are re-exported at module level;
both raw sets stay reachable through ``backend_functions`` for tests and
the benchmark.

Conventions shared by every kernel: arrays are float64 with a leading
channel axis and no batch axis, convolutions are cross-correlations with
same-size zero padding and an odd kernel, pooling windows do not overlap
(the spatial extent must divide by the pool size), and upsampling repeats
entries (nearest neighbor, factor 2). Pooling forward returns the flat
spatial argmax per window so the backward pass can route gradients; ties
go to the first entry in row-major window order on both backends.
"""

from __future__ import annotations

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def decorate(func):
            return func

        return decorate


# ----------------------------------------------------------------------
# numpy backend
# ----------------------------------------------------------------------


def _np_conv1d_forward(x, w, b):
    k = w.shape[2]
    pad = k // 2
    xp = np.zeros((x.shape[0], x.shape[1] + 2 * pad))
    xp[:, pad : pad + x.shape[1]] = x
    win = sliding_window_view(xp, k, axis=1)
    return np.einsum("ilk,oik->ol", win, w, optimize=True) + b[:, None]


def _np_conv1d_backward(x, w, gy):
    k = w.shape[2]
    pad = k // 2
    xp = np.zeros((x.shape[0], x.shape[1] + 2 * pad))
    xp[:, pad : pad + x.shape[1]] = x
    win = sliding_window_view(xp, k, axis=1)
    gb = gy.sum(axis=1)
    gw = np.einsum("ol,ilk->oik", gy, win, optimize=True)
    gyp = np.zeros((gy.shape[0], gy.shape[1] + 2 * pad))
    gyp[:, pad : pad + gy.shape[1]] = gy
    wing = sliding_window_view(gyp, k, axis=1)
    gx = np.einsum("olk,oik->il", wing, w[:, :, ::-1], optimize=True)
    return gx, gw, gb


def _np_conv2d_forward(x, w, b):
    k = w.shape[2]
    pad = k // 2
    xp = np.zeros((x.shape[0], x.shape[1] + 2 * pad, x.shape[2] + 2 * pad))
    xp[:, pad : pad + x.shape[1], pad : pad + x.shape[2]] = x
    win = sliding_window_view(xp, (k, k), axis=(1, 2))
    return np.einsum("ihwpq,oipq->ohw", win, w, optimize=True) + b[:, None, None]


def _np_conv2d_backward(x, w, gy):
    k = w.shape[2]
    pad = k // 2
    xp = np.zeros((x.shape[0], x.shape[1] + 2 * pad, x.shape[2] + 2 * pad))
    xp[:, pad : pad + x.shape[1], pad : pad + x.shape[2]] = x
    win = sliding_window_view(xp, (k, k), axis=(1, 2))
    gb = gy.sum(axis=(1, 2))
    gw = np.einsum("ohw,ihwpq->oipq", gy, win, optimize=True)
    gyp = np.zeros((gy.shape[0], gy.shape[1] + 2 * pad, gy.shape[2] + 2 * pad))
    gyp[:, pad : pad + gy.shape[1], pad : pad + gy.shape[2]] = gy
    wing = sliding_window_view(gyp, (k, k), axis=(1, 2))
    gx = np.einsum("ohwpq,oipq->ihw", wing, w[:, :, ::-1, ::-1], optimize=True)
    return gx, gw, gb


def _np_maxpool1d_forward(x, size):
    c, length = x.shape
    r = x.reshape(c, length // size, size)
    local = r.argmax(axis=2)
    y = np.take_along_axis(r, local[:, :, None], axis=2)[:, :, 0]
    idx = local + np.arange(0, length, size)[None, :]
    return y, idx


def _np_maxpool1d_backward(gy, idx, length):
    gx = np.zeros((gy.shape[0], length))
    np.put_along_axis(gx, idx, gy, axis=1)
    return gx


def _np_maxpool2d_forward(x, size):
    c, h, w = x.shape
    hh, ww = h // size, w // size
    r = x.reshape(c, hh, size, ww, size).transpose(0, 1, 3, 2, 4)
    r = np.ascontiguousarray(r).reshape(c, hh, ww, size * size)
    local = r.argmax(axis=3)
    y = np.take_along_axis(r, local[..., None], axis=3)[..., 0]
    pi, pj = np.divmod(local, size)
    rows = pi + size * np.arange(hh)[None, :, None]
    cols = pj + size * np.arange(ww)[None, None, :]
    idx = rows * w + cols
    return y, idx


def _np_maxpool2d_backward(gy, idx, h, w):
    c = gy.shape[0]
    gx = np.zeros((c, h * w))
    np.put_along_axis(gx, idx.reshape(c, -1), gy.reshape(c, -1), axis=1)
    return gx.reshape(c, h, w)


def _np_upsample1d_forward(x):
    return np.repeat(x, 2, axis=1)


def _np_upsample1d_backward(gy):
    c, length = gy.shape
    return gy.reshape(c, length // 2, 2).sum(axis=2)


def _np_upsample2d_forward(x):
    return x.repeat(2, axis=1).repeat(2, axis=2)


def _np_upsample2d_backward(gy):
    c, h, w = gy.shape
    return gy.reshape(c, h // 2, 2, w // 2, 2).sum(axis=(2, 4))


# ----------------------------------------------------------------------
# numba backend
# ----------------------------------------------------------------------


@njit(cache=True)
def _nb_conv1d_forward(x, w, b):
    cin, length = x.shape
    cout, _, k = w.shape
    pad = k // 2
    y = np.empty((cout, length))
    for o in range(cout):
        for l in range(length):
            acc = b[o]
            for i in range(cin):
                for t in range(k):
                    p = l + t - pad
                    if 0 <= p < length:
                        acc += w[o, i, t] * x[i, p]
            y[o, l] = acc
    return y


@njit(cache=True)
def _nb_conv1d_backward(x, w, gy):
    cin, length = x.shape
    cout, _, k = w.shape
    pad = k // 2
    gx = np.zeros((cin, length))
    gw = np.zeros((cout, cin, k))
    gb = np.zeros(cout)
    for o in range(cout):
        for l in range(length):
            g = gy[o, l]
            gb[o] += g
            for i in range(cin):
                for t in range(k):
                    p = l + t - pad
                    if 0 <= p < length:
                        gw[o, i, t] += g * x[i, p]
                        gx[i, p] += g * w[o, i, t]
    return gx, gw, gb


@njit(cache=True)
def _nb_conv2d_forward(x, w, b):
    cin, h, ww = x.shape
    cout, _, k, _ = w.shape
    pad = k // 2
    y = np.empty((cout, h, ww))
    for o in range(cout):
        for r in range(h):
            for c in range(ww):
                acc = b[o]
                for i in range(cin):
                    for p in range(k):
                        rr = r + p - pad
                        if rr < 0 or rr >= h:
                            continue
                        for q in range(k):
                            cc = c + q - pad
                            if 0 <= cc < ww:
                                acc += w[o, i, p, q] * x[i, rr, cc]
                y[o, r, c] = acc
    return y


@njit(cache=True)
def _nb_conv2d_backward(x, w, gy):
    cin, h, ww = x.shape
    cout, _, k, _ = w.shape
    pad = k // 2
    gx = np.zeros((cin, h, ww))
    gw = np.zeros((cout, cin, k, k))
    gb = np.zeros(cout)
    for o in range(cout):
        for r in range(h):
            for c in range(ww):
                g = gy[o, r, c]
                gb[o] += g
                for i in range(cin):
                    for p in range(k):
                        rr = r + p - pad
                        if rr < 0 or rr >= h:
                            continue
                        for q in range(k):
                            cc = c + q - pad
                            if 0 <= cc < ww:
                                gw[o, i, p, q] += g * x[i, rr, cc]
                                gx[i, rr, cc] += g * w[o, i, p, q]
    return gx, gw, gb


@njit(cache=True)
def _nb_maxpool1d_forward(x, size):
    c, length = x.shape
    n = length // size
    y = np.empty((c, n))
    idx = np.empty((c, n), dtype=np.int64)
    for i in range(c):
        for j in range(n):
            best = j * size
            for t in range(j * size + 1, (j + 1) * size):
                if x[i, t] > x[i, best]:
                    best = t
            y[i, j] = x[i, best]
            idx[i, j] = best
    return y, idx


@njit(cache=True)
def _nb_maxpool1d_backward(gy, idx, length):
    c, n = gy.shape
    gx = np.zeros((c, length))
    for i in range(c):
        for j in range(n):
            gx[i, idx[i, j]] = gy[i, j]
    return gx


@njit(cache=True)
def _nb_maxpool2d_forward(x, size):
    c, h, w = x.shape
    hh, ww = h // size, w // size
    y = np.empty((c, hh, ww))
    idx = np.empty((c, hh, ww), dtype=np.int64)
    for i in range(c):
        for bi in range(hh):
            for bj in range(ww):
                br, bc = bi * size, bj * size
                best_r, best_c = br, bc
                for p in range(size):
                    for q in range(size):
                        if x[i, br + p, bc + q] > x[i, best_r, best_c]:
                            best_r, best_c = br + p, bc + q
                y[i, bi, bj] = x[i, best_r, best_c]
                idx[i, bi, bj] = best_r * w + best_c
    return y, idx


@njit(cache=True)
def _nb_maxpool2d_backward(gy, idx, h, w):
    c, hh, ww = gy.shape
    gx = np.zeros((c, h * w))
    for i in range(c):
        for bi in range(hh):
            for bj in range(ww):
                gx[i, idx[i, bi, bj]] = gy[i, bi, bj]
    return gx.reshape(c, h, w)


@njit(cache=True)
def _nb_upsample1d_forward(x):
    c, length = x.shape
    y = np.empty((c, 2 * length))
    for i in range(c):
        for j in range(length):
            y[i, 2 * j] = x[i, j]
            y[i, 2 * j + 1] = x[i, j]
    return y


@njit(cache=True)
def _nb_upsample1d_backward(gy):
    c, length = gy.shape
    gx = np.empty((c, length // 2))
    for i in range(c):
        for j in range(length // 2):
            gx[i, j] = gy[i, 2 * j] + gy[i, 2 * j + 1]
    return gx


@njit(cache=True)
def _nb_upsample2d_forward(x):
    c, h, w = x.shape
    y = np.empty((c, 2 * h, 2 * w))
    for i in range(c):
        for r in range(h):
            for s in range(w):
                v = x[i, r, s]
                y[i, 2 * r, 2 * s] = v
                y[i, 2 * r, 2 * s + 1] = v
                y[i, 2 * r + 1, 2 * s] = v
                y[i, 2 * r + 1, 2 * s + 1] = v
    return y


@njit(cache=True)
def _nb_upsample2d_backward(gy):
    c, h, w = gy.shape
    gx = np.empty((c, h // 2, w // 2))
    for i in range(c):
        for r in range(h // 2):
            for s in range(w // 2):
                gx[i, r, s] = (
                    gy[i, 2 * r, 2 * s]
                    + gy[i, 2 * r, 2 * s + 1]
                    + gy[i, 2 * r + 1, 2 * s]
                    + gy[i, 2 * r + 1, 2 * s + 1]
                )
    return gx


# ----------------------------------------------------------------------
# backend selection
# ----------------------------------------------------------------------

_NAMES = (
    "conv1d_forward",
    "conv1d_backward",
    "conv2d_forward",
    "conv2d_backward",
    "maxpool1d_forward",
    "maxpool1d_backward",
    "maxpool2d_forward",
    "maxpool2d_backward",
    "upsample1d_forward",
    "upsample1d_backward",
    "upsample2d_forward",
    "upsample2d_backward",
)

_BACKENDS = {
    "numpy": {name: globals()["_np_" + name] for name in _NAMES},
    "numba": {name: globals()["_nb_" + name] for name in _NAMES},
}


def backend_functions(name: str) -> dict:
    """Kernel set of one backend, independent of the active selection."""
    if name == "numba" and not HAVE_NUMBA:
        raise ConfigError("the numba backend was requested but numba is not installed")
    if name not in _BACKENDS:
        raise ConfigError(f"unknown kernel backend {name!r}")
    return _BACKENDS[name]


def _select() -> str:
    flag = os.environ.get("PHASESCOUT_KERNELS", "auto").strip().lower()
    if flag == "auto":
        return "mixed" if HAVE_NUMBA else "numpy"
    if flag in ("numpy", "numba"):
        backend_functions(flag)  # raises when forced but unavailable
        return flag
    raise ConfigError(
        f"PHASESCOUT_KERNELS={flag!r} is not one of auto, numba, numpy"
    )


def _active_table(backend: str) -> dict:
    if backend != "mixed":
        return _BACKENDS[backend]
    # Benchmarked blend: BLAS-backed convolutions, compiled loops elsewhere.
    table = dict(_BACKENDS["numba"])
    for name in _NAMES:
        if name.startswith("conv"):
            table[name] = _BACKENDS["numpy"][name]
    return table


ACTIVE_BACKEND = _select()
_ACTIVE = _active_table(ACTIVE_BACKEND)

conv1d_forward = _ACTIVE["conv1d_forward"]
conv1d_backward = _ACTIVE["conv1d_backward"]
conv2d_forward = _ACTIVE["conv2d_forward"]
conv2d_backward = _ACTIVE["conv2d_backward"]
maxpool1d_forward = _ACTIVE["maxpool1d_forward"]
maxpool1d_backward = _ACTIVE["maxpool1d_backward"]
maxpool2d_forward = _ACTIVE["maxpool2d_forward"]
maxpool2d_backward = _ACTIVE["maxpool2d_backward"]
upsample1d_forward = _ACTIVE["upsample1d_forward"]
upsample1d_backward = _ACTIVE["upsample1d_backward"]
upsample2d_forward = _ACTIVE["upsample2d_forward"]
upsample2d_backward = _ACTIVE["upsample2d_backward"]
