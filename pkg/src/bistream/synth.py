"""Deterministic synthetic test sequences (desk-scale stand-in for real footage)."""

import numpy as np

from .errors import ConfigError

PATTERNS = ("translate", "static")


def _texture(channels: int, height: int, width: int, seed: int) -> np.ndarray:
    """Smooth gradient plus seeded random texture, values well inside [0, 1]."""
    rng = np.random.Generator(np.random.PCG64(seed))
    y = np.arange(height)[None, :, None]
    x = np.arange(width)[None, None, :]
    c = np.arange(channels)[:, None, None]
    grad = 0.5 + 0.35 * np.sin(2.0 * np.pi * (x / 17.0 + y / 29.0 + c / max(channels, 1)))
    tex = 0.65 * grad + 0.3 * rng.random((channels, height, width))
    return np.clip(tex, 0.0, 1.0).astype(np.float32)


def generate_sequence(t: int, height: int, width: int, channels: int = 3,
                      pattern: str = "translate", seed: int = 0):
    """Clean frames: a wide texture panned 1 px/frame (``translate``) or held
    still (``static``).  Same seed, same frames, bitwise."""
    if t < 1:
        raise ConfigError("sequence length must be >= 1")
    if height < 4 or width < 4 or height % 4 or width % 4:
        raise ConfigError(f"frame size {height}x{width} must be divisible by 4")
    if pattern not in PATTERNS:
        raise ConfigError(f"pattern must be one of {PATTERNS}, got {pattern!r}")
    if pattern == "static":
        base = _texture(channels, height, width, seed)
        return [base.copy() for _ in range(t)]
    tex = _texture(channels, height, width + t - 1, seed)
    return [np.ascontiguousarray(tex[:, :, k:k + width]) for k in range(t)]
