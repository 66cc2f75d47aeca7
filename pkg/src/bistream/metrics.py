"""Fidelity metrics: PSNR, single-scale SSIM, per-frame comparison reports."""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(ref: np.ndarray, test: np.ndarray) -> float:
    """10 * log10(1 / MSE) with peak 1.0; returns inf when the frames match."""
    if ref.shape != test.shape:
        raise ConfigError(f"psnr shape mismatch: {ref.shape} vs {test.shape}")
    mse = float(np.mean((ref.astype(np.float64) - test.astype(np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    y, x = np.mgrid[0:size, 0:size]
    g = np.exp(-(((y - half) ** 2 + (x - half) ** 2) / (2.0 * sigma * sigma)))
    return g / g.sum()


def _windowed_mean(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(img, win.shape)
    return np.tensordot(view, win, axes=([2, 3], [0, 1]))


def ssim(ref: np.ndarray, test: np.ndarray) -> float:
    """Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01,
    K2=0.03, peak 1.0, averaged over valid pixels and channels."""
    if ref.shape != test.shape:
        raise ConfigError(f"ssim shape mismatch: {ref.shape} vs {test.shape}")
    if ref.ndim != 3:
        raise ConfigError("ssim expects (C, H, W) frames")
    if ref.shape[1] < SSIM_WINDOW or ref.shape[2] < SSIM_WINDOW:
        raise ConfigError(f"frames must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for ssim")
    win = gaussian_window()
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    vals = []
    for ch in range(ref.shape[0]):
        x = ref[ch].astype(np.float64)
        y = test[ch].astype(np.float64)
        mx = _windowed_mean(x, win)
        my = _windowed_mean(y, win)
        vx = _windowed_mean(x * x, win) - mx * mx
        vy = _windowed_mean(y * y, win) - my * my
        cov = _windowed_mean(x * y, win) - mx * my
        num = (2.0 * mx * my + c1) * (2.0 * cov + c2)
        den = (mx * mx + my * my + c1) * (vx + vy + c2)
        vals.append(num / den)
    return float(np.mean(vals))


@dataclass
class FidelityReport:
    """Per-frame PSNR of one or two reconstructions against a clean reference."""

    psnr_a: list
    psnr_b: list | None = None
    delta: list | None = None
    maxabs: list | None = None
    mean_psnr_a: float = 0.0
    mean_psnr_b: float | None = None
    mean_ssim_a: float | None = None

    @property
    def frames(self) -> int:
        return len(self.psnr_a)

    def to_csv(self) -> str:
        lines = ["frame,psnr_a,psnr_b,delta,maxabs"]
        for i in range(self.frames):
            b = f"{self.psnr_b[i]:.6f}" if self.psnr_b is not None else ""
            d = f"{self.delta[i]:.6f}" if self.delta is not None else ""
            m = f"{self.maxabs[i]:.9g}" if self.maxabs is not None else ""
            lines.append(f"{i},{self.psnr_a[i]:.6f},{b},{d},{m}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "frames": self.frames,
            "mean_psnr_a": self.mean_psnr_a,
            "mean_psnr_b": self.mean_psnr_b,
            "mean_ssim_a": self.mean_ssim_a,
        }
        return json.dumps(payload)


def per_frame_report(ref_frames, a_frames, b_frames=None, with_ssim: bool = True) -> FidelityReport:
    """PSNR series of a (and b, if given) against the clean frames, the
    per-index difference, and per-frame max |a - b|."""
    if len(a_frames) != len(ref_frames):
        raise ConfigError(f"frame count mismatch: {len(a_frames)} vs {len(ref_frames)}")
    if b_frames is not None and len(b_frames) != len(ref_frames):
        raise ConfigError(f"frame count mismatch: {len(b_frames)} vs {len(ref_frames)}")
    pa = [psnr(r, a) for r, a in zip(ref_frames, a_frames)]
    report = FidelityReport(psnr_a=pa, mean_psnr_a=float(np.mean(pa)))
    if with_ssim:
        report.mean_ssim_a = float(np.mean([ssim(r, a) for r, a in zip(ref_frames, a_frames)]))
    if b_frames is not None:
        pb = [psnr(r, b) for r, b in zip(ref_frames, b_frames)]
        report.psnr_b = pb
        report.mean_psnr_b = float(np.mean(pb))
        # equal values give exactly 0 (inf - inf would be nan)
        report.delta = [0.0 if x == y else x - y for x, y in zip(pa, pb)]
        report.maxabs = [float(np.max(np.abs(a - b))) for a, b in zip(a_frames, b_frames)]
    return report
