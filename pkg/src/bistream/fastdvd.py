"""Two-stage sliding-window cascade and its buffered pipeline form.

The cascade denoises frame i by running a frame-level stage on three
adjacent frames, three times, and a second stage once on the three
intermediates (4 stage evaluations per output).  The buffered form caches
each stage's last two outputs instead, so every stage runs exactly once per
frame: 2 evaluations per output, at a fixed latency of one frame per stage.

Temporal edges use replicate padding applied per stage: each stage's
input sequence is extended by repeating its own first and last element.
The pipeline reproduces that by initializing both stage buffers with the
first input and, at end of stream, re-feeding the last one.
"""

import numpy as np

from .errors import ConfigError, StateError
from .model import NetDef
from .offline import forward_full_sequence
from .tensor import concat_channels

__all__ = ["CascadeStage", "CascadePipeline", "sliding_forward", "streaming_forward",
           "op_count_report"]


class CascadeStage:
    """A frame-level denoiser: concatenates three frames (plus an optional
    noise map) along channels and runs a frame-wise network once."""

    def __init__(self, net: NetDef, store: dict):
        if net.fusion_mode != "none":
            raise ConfigError("cascade stages must be frame-wise (fusion_mode='none')")
        self.net = net
        self.store = store
        self.evals = 0

    def run(self, past, cur, future, noise_map=None):
        parts = [past, cur, future]
        if noise_map is not None:
            parts.append(noise_map)
        x = concat_channels(parts)
        if x.shape[0] != self.net.input_channels:
            raise ConfigError(
                f"stage expects {self.net.input_channels} input channels, got {x.shape[0]}"
            )
        self.evals += 1
        return forward_full_sequence(self.net, self.store, [x])[0]


def sliding_forward(stage1: CascadeStage, stage2: CascadeStage, frames, noise_map=None):
    """Naive window-5 reference: 3 stage-1 evaluations and 1 stage-2
    evaluation per output frame, recomputed from scratch every time."""
    t_n = len(frames)
    if t_n < 1:
        raise ConfigError("need at least one frame")

    def clamp(j):
        return min(max(j, 0), t_n - 1)

    def mid(c):
        return stage1.run(frames[clamp(c - 1)], frames[c], frames[clamp(c + 1)], noise_map)

    outs = []
    for i in range(t_n):
        parts = [mid(clamp(i - 1)), mid(i), mid(clamp(i + 1))]
        outs.append(stage2.run(*parts, noise_map))
    return outs


class _Replicate:
    def __repr__(self):
        return "REPLICATE"


_REP = _Replicate()


class _StageState:
    __slots__ = ("bm1", "b0", "drained")

    def __init__(self):
        self.bm1 = None
        self.b0 = None
        self.drained = False


class CascadePipeline:
    """Buffered pipeline over a chain of cascade stages (1-frame latency each)."""

    def __init__(self, stages, noise_map=None):
        self.stages = list(stages)
        self.noise_map = noise_map
        self.states = [_StageState() for _ in self.stages]
        self.step_index = 0
        self.frames_fed = 0
        self.closed = False

    @property
    def latency(self) -> int:
        return len(self.stages)

    def _stage_step(self, stage, st, item):
        if item is _REP:
            if st.drained or st.b0 is None:
                st.drained = True
                return _REP
            out = stage.run(st.bm1, st.b0, st.b0, self.noise_map)
            st.drained = True
            return out
        if st.drained:
            raise StateError("cascade stage received input after end of stream")
        if st.b0 is None:
            st.bm1 = item
            st.b0 = item
            return None
        out = stage.run(st.bm1, st.b0, item, self.noise_map)
        st.bm1 = st.b0
        st.b0 = item
        return out

    def _advance(self, item):
        val = item
        for stage, st in zip(self.stages, self.states):
            val = self._stage_step(stage, st, val)
            if val is None:
                return None
        if val is _REP:
            return None
        return val

    def step(self, frame):
        if self.closed:
            raise StateError("cascade already flushed")
        out = self._advance(frame)
        self.step_index += 1
        self.frames_fed += 1
        if out is None:
            return None
        index = self.step_index - 1 - self.latency
        return index, out

    def flush(self):
        if self.closed:
            raise StateError("cascade already flushed")
        outs = []
        for _ in range(self.latency):
            out = self._advance(_REP)
            self.step_index += 1
            if out is not None:
                outs.append((self.step_index - 1 - self.latency, out))
        self.closed = True
        return outs


def streaming_forward(stage1: CascadeStage, stage2: CascadeStage, frames, noise_map=None):
    """Run the buffered two-stage pipeline over a finite sequence."""
    pipe = CascadePipeline([stage1, stage2], noise_map)
    outs = []
    for fr in frames:
        out = pipe.step(fr)
        if out is not None:
            outs.append(out)
    outs.extend(pipe.flush())
    for i, (index, _) in enumerate(outs):
        assert index == i, f"output {i} carries index {index}"
    return [frame for _, frame in outs]


def op_count_report(mode: str, frames: int, stage1_evals: int, stage2_evals: int) -> dict:
    """Per-frame stage-evaluation accounting, JSON-serializable."""
    per_frame = (stage1_evals + stage2_evals) / frames if frames else 0.0
    return {
        "mode": mode,
        "frames": frames,
        "stage1_evals": stage1_evals,
        "stage2_evals": stage2_evals,
        "per_frame": per_frame,
    }
