"""Synthetic degradation: fixed-sigma Gaussian noise and the signal-dependent
raw-sensor model with per-pixel variance a*x + b on the [0, 1] intensity scale.

Sampling is deterministic under a seed: uniforms come from numpy's PCG64
stream and are turned into normals with the Box-Muller transform, so the
sampler is fully documented and reproducible.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def gaussian_samples(n: int, seed: int) -> np.ndarray:
    """n standard-normal samples: u1, u2 ~ PCG64(seed) uniforms,
    z = sqrt(-2 ln u1) * (cos, sin)(2 pi u2) interleaved pairwise."""
    if n < 0:
        raise ConfigError("sample count must be >= 0")
    m = (n + 1) // 2
    rng = np.random.Generator(np.random.PCG64(seed))
    u1 = 1.0 - rng.random(m)  # (0, 1], keeps the log finite
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(2.0 * math.pi * u2)
    z[1::2] = r * np.sin(2.0 * math.pi * u2)
    return z[:n]


@dataclass
class NoiseSpec:
    """Either awgn (sigma on the 0-255 scale) or heteroscedastic (a, b)."""

    kind: str
    sigma: float = 0.0
    a: float = 0.0
    b: float = 0.0
    seed: int = 0

    @classmethod
    def awgn(cls, sigma: float, seed: int = 0):
        return cls("awgn", sigma=sigma, seed=seed).validate()

    @classmethod
    def heteroscedastic(cls, a: float, b: float, seed: int = 0):
        return cls("heteroscedastic", a=a, b=b, seed=seed).validate()

    def validate(self):
        if self.kind not in ("awgn", "heteroscedastic"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.kind == "awgn":
            if self.sigma < 0:
                raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        else:
            if self.a < 0 or self.b < 0:
                raise ConfigError("noise parameters a and b must be >= 0")
            if self.a + self.b > 1.0:
                raise ConfigError(
                    f"a + b = {self.a + self.b} gives variance > 1 at unit intensity"
                )
        return self


def add_noise(frames, spec: NoiseSpec):
    """Degrade a list of [0, 1] frames; output clamped back to [0, 1]."""
    spec.validate()
    frames = list(frames)
    for i, fr in enumerate(frames):
        if fr.dtype != np.float32 or fr.ndim != 3:
            raise ConfigError(f"frame {i} must be a float32 (C, H, W) array")
        if fr.min() < 0.0 or fr.max() > 1.0:
            raise ConfigError(f"frame {i} intensities must lie in [0, 1]")
    if spec.kind == "awgn" and spec.sigma == 0.0:
        return [fr.copy() for fr in frames]
    total = sum(fr.size for fr in frames)
    z = gaussian_samples(total, spec.seed)
    out = []
    pos = 0
    for fr in frames:
        zi = z[pos:pos + fr.size].reshape(fr.shape)
        pos += fr.size
        if spec.kind == "awgn":
            noisy = fr + (spec.sigma / 255.0) * zi
        else:
            std = np.sqrt(spec.a * fr.astype(np.float64) + spec.b)
            noisy = fr + std * zi
        out.append(np.clip(noisy, 0.0, 1.0).astype(np.float32))
    return out
