"""Offline reference forward passes over whole sequences and clips.

This module is the golden oracle for the streaming engine: it runs temporal
fusion across a materialized feature clip, exactly as a training-time forward
would, with zero feature padding at both temporal ends.  The streaming path
must reproduce it bit for bit.
"""

import numpy as np

from .errors import ConfigError
from .model import Conv, FusionPoint, NetDef, PixelShuffle, Relu6, SkipJoin, SkipSource
from .tensor import add, concat_channels, conv2d, pixel_shuffle, relu6, slice_channels

__all__ = [
    "tsm_fuse",
    "uni_fuse",
    "forward_full_sequence",
    "forward_clipped_mimo",
    "check_frames",
]


def tsm_fuse(past, cur, future, f: int) -> np.ndarray:
    """Shift-concatenate three adjacent frames' features.

    Output channels [0, f) come from ``past``, [f, C-f) from ``cur`` and
    [C-f, C) from ``future``; an absent neighbor (temporal boundary)
    contributes zeros.
    """
    c = cur.shape[0]
    if f < 1 or 2 * f >= c:
        raise ConfigError(f"shift width {f} invalid for {c} channels (need 1 <= f < C/2)")
    blank = np.zeros((f,) + cur.shape[1:], np.float32)
    head = blank if past is None else slice_channels(past, 0, f)
    tail = blank if future is None else slice_channels(future, c - f, c)
    return concat_channels([head, slice_channels(cur, f, c - f), tail])


def uni_fuse(prev, cur, f: int) -> np.ndarray:
    """Causal variant: channels [0, 2f) from the previous frame, rest from ``cur``."""
    c = cur.shape[0]
    if f < 1 or 2 * f >= c:
        raise ConfigError(f"shift width {f} invalid for {c} channels")
    head = np.zeros((2 * f,) + cur.shape[1:], np.float32) if prev is None \
        else slice_channels(prev, 0, 2 * f)
    return concat_channels([head, slice_channels(cur, 2 * f, c)])


def check_frames(net: NetDef, frames):
    if not frames:
        raise ConfigError("need at least one frame")
    c, h, w = frames[0].shape
    if c != net.input_channels:
        raise ConfigError(f"frames have {c} channels, network expects {net.input_channels}")
    d = net.spatial_divisor
    if h % d or w % d:
        raise ConfigError(f"frame size {h}x{w} must be divisible by {d}")
    for i, fr in enumerate(frames):
        if fr.shape != (c, h, w):
            raise ConfigError(f"frame {i} has shape {fr.shape}, expected {(c, h, w)}")
        if fr.dtype != np.float32:
            raise ConfigError(f"frame {i} must be float32")


def _fuse_clip(feats, fp: FusionPoint, mode: str):
    t_n = len(feats)
    if mode == "bidirectional":
        return [
            tsm_fuse(feats[t - 1] if t > 0 else None, feats[t],
                     feats[t + 1] if t + 1 < t_n else None, fp.shifted)
            for t in range(t_n)
        ]
    if mode == "unidirectional":
        return [uni_fuse(feats[t - 1] if t > 0 else None, feats[t], fp.shifted)
                for t in range(t_n)]
    return feats  # mode "none": pass-through


def _live_bytes(*groups) -> int:
    seen = {}
    for lst in groups:
        for a in lst:
            seen[id(a)] = a.nbytes
    return sum(seen.values())


def _run_clip(net: NetDef, store: dict, feats, stats=None):
    bank = {}
    peak = _live_bytes(feats)
    for st in net.stages:
        if isinstance(st, Conv):
            w = store[st.name]
            out = [conv2d(x, w) for x in feats]
        elif isinstance(st, Relu6):
            out = [relu6(x) for x in feats]
        elif isinstance(st, PixelShuffle):
            out = [pixel_shuffle(x, st.factor) for x in feats]
        elif isinstance(st, FusionPoint):
            out = _fuse_clip(feats, st, net.fusion_mode)
        elif isinstance(st, SkipSource):
            bank[st.tag] = feats
            out = feats
        elif isinstance(st, SkipJoin):
            src = bank.pop(st.tag)
            out = [add(feats[t], src[t]) for t in range(len(feats))]
        else:
            raise ConfigError(f"unknown stage type {type(st).__name__}")
        if stats is not None:
            peak = max(peak, _live_bytes(feats, out, *bank.values()))
        feats = out
    if stats is not None:
        stats["peak_activation_bytes"] = max(stats.get("peak_activation_bytes", 0), peak)
    return feats


def forward_full_sequence(net: NetDef, store: dict, frames, stats=None):
    """Run the whole sequence as one clip; returns one output frame per input.

    Every fusion point exchanges channel slices between adjacent time steps,
    with zero feature padding before frame 0 and after the last frame.
    """
    check_frames(net, frames)
    if net.fusion_mode not in ("bidirectional", "unidirectional", "none"):
        raise ConfigError(f"unknown fusion mode {net.fusion_mode!r}")
    return _run_clip(net, store, list(frames), stats)


def forward_clipped_mimo(net: NetDef, store: dict, frames, t_clip: int, stats=None):
    """Split the sequence into consecutive clips of ``t_clip`` frames (the last
    may be short), run each independently, and concatenate the outputs.

    Each clip sees zero temporal padding at its own edges, so outputs near
    interior clip boundaries differ from the full-sequence reference.
    """
    if t_clip < 1:
        raise ConfigError(f"t_clip must be >= 1, got {t_clip}")
    check_frames(net, frames)
    outs = []
    for start in range(0, len(frames), t_clip):
        outs.extend(_run_clip(net, store, list(frames[start:start + t_clip]), stats))
    return outs
