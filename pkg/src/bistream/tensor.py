"""Dense float32 tensor kernels.

A tensor is a C-contiguous ``numpy.ndarray`` of shape (channels, height,
width) and dtype float32.  Every operation here is pure and deterministic:
the same inputs produce bitwise-identical outputs on every call, which is
what lets the streaming engine and the offline reference be compared with
max-abs-diff == 0 instead of a tolerance.

conv2d accumulates in a fixed order per output pixel: input channels in the
outer loop, kernel rows then columns inside, bias added last, all in float32.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError

# Running count of conv2d invocations, read by the profiler.
_conv_calls = 0


def conv_call_count() -> int:
    return _conv_calls


def reset_conv_call_count() -> None:
    global _conv_calls
    _conv_calls = 0


@dataclass
class ConvWeights:
    """Weights of one 2-d convolution: kernel (out, in, k, k) + bias (out,)."""

    kernel: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        self.kernel = np.ascontiguousarray(self.kernel, dtype=np.float32)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float32)
        if self.kernel.ndim != 4:
            raise ConfigError(f"kernel must be rank 4, got rank {self.kernel.ndim}")
        k = self.kernel.shape[2]
        if self.kernel.shape[3] != k or k not in (1, 3):
            raise ConfigError(f"kernel must be square 1x1 or 3x3, got {self.kernel.shape[2:]}")
        if self.bias.shape != (self.kernel.shape[0],):
            raise ConfigError("bias length must equal out_channels")
        if self.stride not in (1, 2):
            raise ConfigError(f"stride must be 1 or 2, got {self.stride}")
        if self.padding < 0:
            raise ConfigError("padding must be >= 0")

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    @property
    def ksize(self) -> int:
        return self.kernel.shape[2]


def _require_tensor(x, name="input"):
    if not isinstance(x, np.ndarray) or x.ndim != 3:
        raise ConfigError(f"{name} must be a rank-3 ndarray (C, H, W)")
    if x.dtype != np.float32:
        raise ConfigError(f"{name} must be float32, got {x.dtype}")
    return x


@njit(cache=True)
def _conv2d_kernel(xp, kern, bias, stride, out):
    # Fixed accumulation order: ci outer, then ky, kx; bias last.  float32
    # throughout so the result is bit-identical to the naive loop reference.
    co_n, ci_n, kh, kw = kern.shape
    _, ho, wo = out.shape
    for co in range(co_n):
        for oy in range(ho):
            for ox in range(wo):
                acc = np.float32(0.0)
                iy = oy * stride
                ix = ox * stride
                for ci in range(ci_n):
                    for ky in range(kh):
                        for kx in range(kw):
                            acc += kern[co, ci, ky, kx] * xp[ci, iy + ky, ix + kx]
                out[co, oy, ox] = acc + bias[co]


def conv2d(x: np.ndarray, w: ConvWeights) -> np.ndarray:
    """Cross-correlate ``x`` with ``w`` under zero spatial padding.

    Output spatial dims are floor((H + 2p - k) / stride) + 1.
    """
    global _conv_calls
    _require_tensor(x)
    c, h, wd = x.shape
    if c != w.in_channels:
        raise ConfigError(f"input has {c} channels, weights expect {w.in_channels}")
    k, p, s = w.ksize, w.padding, w.stride
    ho = (h + 2 * p - k) // s + 1
    wo = (wd + 2 * p - k) // s + 1
    if ho <= 0 or wo <= 0:
        raise ConfigError(f"conv output would be empty for input {h}x{wd}, k={k}, p={p}, s={s}")
    if p:
        xp = np.zeros((c, h + 2 * p, wd + 2 * p), np.float32)
        xp[:, p:p + h, p:p + wd] = x
    else:
        xp = np.ascontiguousarray(x)
    out = np.empty((w.out_channels, ho, wo), np.float32)
    _conv2d_kernel(xp, w.kernel, w.bias, s, out)
    _conv_calls += 1
    return out


def relu6(x: np.ndarray) -> np.ndarray:
    """Clamp elementwise to [0, 6]."""
    _require_tensor(x)
    return np.clip(x, np.float32(0.0), np.float32(6.0))


def pixel_shuffle(x: np.ndarray, factor: int) -> np.ndarray:
    """Rearrange channels into space: (C, H, W) -> (C/f^2, H*f, W*f).

    Channel-to-space mapping is row major:
    out[c, y*f + dy, x*f + dx] = in[c*f*f + dy*f + dx, y, x].
    """
    _require_tensor(x)
    c, h, w = x.shape
    if factor < 1:
        raise ConfigError(f"pixel_shuffle factor must be >= 1, got {factor}")
    if c % (factor * factor) != 0:
        raise ConfigError(f"{c} channels not divisible by factor^2 = {factor * factor}")
    if factor == 1:
        return x.copy()
    co = c // (factor * factor)
    out = x.reshape(co, factor, factor, h, w).transpose(0, 3, 1, 4, 2)
    return np.ascontiguousarray(out.reshape(co, h * factor, w * factor))


def concat_channels(parts) -> np.ndarray:
    """Stack tensors along the channel axis in list order."""
    parts = list(parts)
    if not parts:
        raise ConfigError("concat_channels needs at least one tensor")
    for p in parts:
        _require_tensor(p)
    hw = parts[0].shape[1:]
    for p in parts[1:]:
        if p.shape[1:] != hw:
            raise ConfigError(f"spatial mismatch in concat: {p.shape[1:]} vs {hw}")
    if len(parts) == 1:
        return parts[0].copy()
    return np.concatenate(parts, axis=0)


def slice_channels(x: np.ndarray, start: int, end: int) -> np.ndarray:
    """Copy channels [start, end); spatial dims unchanged."""
    _require_tensor(x)
    if not (0 <= start < end <= x.shape[0]):
        raise ConfigError(f"channel slice [{start}, {end}) out of range for {x.shape[0]} channels")
    return x[start:end].copy()


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise sum of two tensors with identical dims."""
    _require_tensor(a, "a")
    _require_tensor(b, "b")
    if a.shape != b.shape:
        raise ConfigError(f"add dim mismatch: {a.shape} vs {b.shape}")
    return a + b


def zeros(channels: int, height: int, width: int) -> np.ndarray:
    return np.zeros((channels, height, width), np.float32)
