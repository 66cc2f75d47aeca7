"""Streaming pipeline: buffer blocks, delay-balanced compilation, sessions.

A compiled pipeline consumes one frame per step.  Each bidirectional buffer
block caches the previous frame's full feature and the frame-before's first
f channels, so the fusion that the offline path performs across a
materialized clip happens here against two cached tensors, one frame late.
With N blocks on the path the denoised frame for input i emerges at step
i + N; the retained state is a function of the model alone, never of the
stream length.

Skip connections are realized as FIFO queues whose depth is the difference
in buffer-block count between the two paths, so both join operands always
carry the same temporal index.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CompileError, ConfigError, StateError
from .model import Conv, FusionPoint, NetDef, PixelShuffle, Relu6, SkipJoin, SkipSource
from .tensor import ConvWeights, add, conv2d, pixel_shuffle, relu6


class _EndOfStream:
    """Sentinel fed after the last real frame; blocks zero-fill the future
    slice instead of fusing features of a dummy frame."""

    def __repr__(self):
        return "EOS"


EOS = _EndOfStream()

TRACE_HEADER = "step,activated_blocks,emitted_index,state_bytes"


class FeatureMap(NamedTuple):
    """A feature tensor tagged with the temporal index it belongs to."""

    index: int
    data: np.ndarray


class StepOutput(NamedTuple):
    index: int
    frame: np.ndarray


class BidirectionalBufferBlock:
    """Stateful equivalent of one temporal-shift-plus-conv group.

    Holds ``past`` (first f channels of the frame before last) and ``cur``
    (the full previous feature).  Feeding input z completes the fusion for
    ``cur``'s frame: concat[past, cur[f:-f], z[-f:]], convolve, then shift
    the buffers.  The first input only activates the block.
    """

    def __init__(self, weights: ConvWeights, f: int):
        if f < 1 or 2 * f >= weights.in_channels:
            raise ConfigError(f"shift width {f} invalid for {weights.in_channels} channels")
        self.weights = weights
        self.f = f
        self.past = None
        self.cur = None
        self.drained = False

    @property
    def active(self) -> bool:
        return self.cur is not None

    def state_bytes(self) -> int:
        n = self.past.nbytes if self.past is not None else 0
        if self.cur is not None:
            n += self.cur.data.nbytes
        return n

    def step(self, item):
        f = self.f
        if item is EOS:
            if self.cur is None:
                self.drained = True
                return EOS
            c = self.cur.data.shape[0]
            blank = np.zeros((f,) + self.cur.data.shape[1:], np.float32)
            fused = np.concatenate([self.past, self.cur.data[f:c - f], blank], axis=0)
            out = FeatureMap(self.cur.index, conv2d(fused, self.weights))
            self.past = self.cur.data[0:f].copy()
            self.cur = None  # phantom advance: nothing left to complete
            self.drained = True
            return out
        if self.drained:
            raise StateError("buffer block received input after end of stream")
        z = item
        c = z.data.shape[0]
        if c != self.weights.in_channels:
            raise ConfigError(f"block expects {self.weights.in_channels} channels, got {c}")
        if self.cur is None:
            # Activation step: cache the input, emit nothing.
            self.past = np.zeros((f,) + z.data.shape[1:], np.float32)
            self.cur = z
            return None
        fused = np.concatenate([self.past, self.cur.data[f:c - f], z.data[c - f:]], axis=0)
        out = FeatureMap(self.cur.index, conv2d(fused, self.weights))
        self.past = self.cur.data[0:f].copy()
        self.cur = z
        return out


class UnidirectionalBufferBlock:
    """Causal stream buffer: caches the previous frame's first 2f channels and
    fuses them ahead of the current frame's remainder.  Zero latency."""

    def __init__(self, weights: ConvWeights, f: int):
        if f < 1 or 2 * f >= weights.in_channels:
            raise ConfigError(f"shift width {f} invalid for {weights.in_channels} channels")
        self.weights = weights
        self.f = f
        self.buf = None

    @property
    def active(self) -> bool:
        return self.buf is not None

    def state_bytes(self) -> int:
        return self.buf.nbytes if self.buf is not None else 0

    def step(self, item):
        if item is EOS:
            return EOS
        z = item
        c = z.data.shape[0]
        f2 = 2 * self.f
        if self.buf is None:
            self.buf = np.zeros((f2,) + z.data.shape[1:], np.float32)
        fused = np.concatenate([self.buf, z.data[f2:]], axis=0)
        out = FeatureMap(z.index, conv2d(fused, self.weights))
        self.buf = z.data[0:f2].copy()
        return out


# --- compiled graph ---------------------------------------------------------


@dataclass(frozen=True)
class _ConvOp:
    stage: Conv


@dataclass(frozen=True)
class _ReluOp:
    pass


@dataclass(frozen=True)
class _ShuffleOp:
    factor: int


@dataclass(frozen=True)
class _BlockOp:
    conv: Conv       # the convolution fused into this block
    f: int
    channels: int
    hdiv: int
    wdiv: int


@dataclass(frozen=True)
class _SourceOp:
    tag: str


@dataclass(frozen=True)
class _JoinOp:
    tag: str
    depth: int
    channels: int
    hdiv: int
    wdiv: int


@dataclass
class PipelineGraph:
    """Stage plan with per-stage temporal offsets and auto-sized skip FIFOs."""

    ops: list
    n_blocks: int
    fusion_mode: str
    input_channels: int
    spatial_divisor: int


def compile_pipeline(net: NetDef) -> PipelineGraph:
    """Plan the stream execution of ``net``.

    Assigns every stage the count of buffer blocks between it and the input,
    and inserts a FIFO at each skip join whose depth is the offset difference
    of its two operands.  FIFO depths are always derived, never specified by
    hand, so joins cannot be misaligned.
    """
    from .model import _trace_shapes

    try:
        shapes = _trace_shapes(net)  # revalidate: stage lists are plain data
    except ConfigError as exc:
        raise CompileError(str(exc)) from exc
    mode = net.fusion_mode
    if mode not in ("bidirectional", "unidirectional", "none"):
        raise CompileError(f"unknown fusion mode {mode!r}")
    ops = []
    offset = 0
    n_blocks = 0
    src_offset = {}
    stages = net.stages
    i = 0
    while i < len(stages):
        st = stages[i]
        if isinstance(st, FusionPoint):
            if mode == "none":
                i += 1
                continue
            if i + 1 >= len(stages) or not isinstance(stages[i + 1], Conv):
                raise CompileError("fusion point must be immediately followed by a conv stage")
            conv = stages[i + 1]
            if conv.in_channels != st.channels:
                raise CompileError(
                    f"conv {conv.name!r} after fusion point expects {conv.in_channels} "
                    f"channels, fusion provides {st.channels}"
                )
            shp = shapes[i]
            ops.append(_BlockOp(conv, st.shifted, st.channels, shp.hdiv, shp.wdiv))
            n_blocks += 1
            if mode == "bidirectional":
                offset += 1
            i += 2
            continue
        if isinstance(st, Conv):
            ops.append(_ConvOp(st))
        elif isinstance(st, Relu6):
            ops.append(_ReluOp())
        elif isinstance(st, PixelShuffle):
            ops.append(_ShuffleOp(st.factor))
        elif isinstance(st, SkipSource):
            if st.tag in src_offset:
                raise CompileError(f"duplicate skip source {st.tag!r}")
            src_offset[st.tag] = offset
            ops.append(_SourceOp(st.tag))
        elif isinstance(st, SkipJoin):
            if st.tag not in src_offset:
                raise CompileError(f"skip join {st.tag!r} has no matching source")
            depth = offset - src_offset.pop(st.tag)
            shp = shapes[i]
            ops.append(_JoinOp(st.tag, depth, shp.channels, shp.hdiv, shp.wdiv))
        else:
            raise CompileError(f"unknown stage type {type(st).__name__}")
        i += 1
    if src_offset:
        raise CompileError(f"skip sources without a join: {sorted(src_offset)}")
    return PipelineGraph(ops, n_blocks, mode, net.input_channels, net.spatial_divisor)


def analyze(graph: PipelineGraph, height: int | None = None, width: int | None = None) -> dict:
    """Closed-form latency, temporal receptive field and retained state size.

    ``state_bytes`` needs the frame size and is omitted when none is given.
    """
    n = graph.n_blocks
    if graph.fusion_mode == "unidirectional":
        report = {"n_blocks": n, "latency": 0, "receptive_field": n + 1}
    else:  # bidirectional (or none, where n == 0)
        report = {"n_blocks": n, "latency": n, "receptive_field": 2 * n + 1}
    if height is None or width is None:
        return report
    if height % graph.spatial_divisor or width % graph.spatial_divisor:
        raise ConfigError(f"frame size {height}x{width} must be divisible by {graph.spatial_divisor}")
    total = 0
    for op in graph.ops:
        if isinstance(op, _BlockOp):
            hw = (height // op.hdiv) * (width // op.wdiv)
            per_dir = 2 * op.f if graph.fusion_mode == "unidirectional" else op.f + op.channels
            total += per_dir * hw * 4
        elif isinstance(op, _JoinOp):
            hw = (height // op.hdiv) * (width // op.wdiv)
            total += op.depth * op.channels * hw * 4
    report["state_bytes"] = total
    return report


FLUSH_MODES = ("exact_eos", "paper_zero_frames")


class StreamSession:
    """Single-owner state of one stream running through a compiled pipeline.

    ``step`` accepts one frame (or EOS) and returns the completed output
    frame, if any, as (index, data).  ``flush`` drains the final in-flight
    frames: exact_eos propagates end markers so every block zero-fills only
    its future shift channels (bit-equal to the offline reference);
    paper_zero_frames feeds all-zero input frames instead.
    """

    def __init__(self, graph: PipelineGraph, store: dict, flush_mode: str = "exact_eos",
                 trace=None):
        if flush_mode not in FLUSH_MODES:
            raise ConfigError(f"flush_mode must be one of {FLUSH_MODES}, got {flush_mode!r}")
        self.graph = graph
        self.flush_mode = flush_mode
        self.trace = trace
        self._runtime = []
        self._blocks = []
        self._fifos = {}
        for op in graph.ops:
            if isinstance(op, _BlockOp):
                w = store[op.conv.name]
                cls = UnidirectionalBufferBlock if graph.fusion_mode == "unidirectional" \
                    else BidirectionalBufferBlock
                block = cls(w, op.f)
                self._blocks.append(block)
                self._runtime.append(("block", block))
            elif isinstance(op, _ConvOp):
                self._runtime.append(("conv", store[op.stage.name]))
            elif isinstance(op, _ReluOp):
                self._runtime.append(("relu", None))
            elif isinstance(op, _ShuffleOp):
                self._runtime.append(("shuffle", op.factor))
            elif isinstance(op, _SourceOp):
                fifo = []
                self._fifos[op.tag] = fifo
                self._runtime.append(("source", fifo))
            elif isinstance(op, _JoinOp):
                self._runtime.append(("join", self._fifos[op.tag]))
        self.step_index = 0
        self.frames_fed = 0
        self.eos_fed = 0
        self.closed = False
        self._input_shape = None
        if self.trace is not None:
            self.trace.write(TRACE_HEADER + "\n")

    @property
    def flush_steps(self) -> int:
        return self.graph.n_blocks if self.graph.fusion_mode == "bidirectional" else 0

    def state_bytes(self) -> int:
        n = sum(b.state_bytes() for b in self._blocks)
        for fifo in self._fifos.values():
            n += sum(f.data.nbytes for f in fifo)
        return n

    def _check_frame(self, frame):
        if not isinstance(frame, np.ndarray) or frame.ndim != 3 or frame.dtype != np.float32:
            raise ConfigError("frame must be a float32 (C, H, W) ndarray")
        c, h, w = frame.shape
        if c != self.graph.input_channels:
            raise ConfigError(f"frame has {c} channels, pipeline expects {self.graph.input_channels}")
        d = self.graph.spatial_divisor
        if h % d or w % d:
            raise ConfigError(f"frame size {h}x{w} must be divisible by {d}")
        if self._input_shape is None:
            self._input_shape = frame.shape
        elif frame.shape != self._input_shape:
            raise ConfigError(f"frame shape {frame.shape} differs from first frame {self._input_shape}")

    def step(self, frame):
        """Feed one frame (or EOS); returns StepOutput or None during warm-up."""
        if self.closed:
            raise StateError("stream already flushed")
        if frame is EOS:
            if self.eos_fed >= self.flush_steps:
                raise StateError("pipeline fully drained")
            self.eos_fed += 1
            item = EOS
        else:
            if self.eos_fed:
                raise StateError("real frame after end of stream")
            self._check_frame(frame)
            item = FeatureMap(self.frames_fed, frame)
            self.frames_fed += 1
        out = self._advance(item)
        if self.trace is not None:
            active = sum(1 for b in self._blocks if b.active)
            emitted = "" if out is None else str(out.index)
            self.trace.write(f"{self.step_index},{active},{emitted},{self.state_bytes()}\n")
        self.step_index += 1
        return out

    def _advance(self, item):
        val = item
        for kind, arg in self._runtime:
            if kind == "block":
                val = arg.step(val)
                if val is None:
                    return None
            elif val is EOS:
                if kind == "join":
                    assert not arg, "skip FIFO should be empty when its join drains"
                continue  # per-frame ops and sources pass EOS through
            elif kind == "conv":
                val = FeatureMap(val.index, conv2d(val.data, arg))
            elif kind == "relu":
                val = FeatureMap(val.index, relu6(val.data))
            elif kind == "shuffle":
                val = FeatureMap(val.index, pixel_shuffle(val.data, arg))
            elif kind == "source":
                arg.append(val)
            elif kind == "join":
                mate = arg.pop(0)
                assert mate.index == val.index, \
                    f"join operands misaligned: {mate.index} vs {val.index}"
                val = FeatureMap(val.index, add(val.data, mate.data))
        if val is EOS:
            return None
        return StepOutput(val.index, val.data)

    def flush(self):
        """Drain the pipeline; returns the remaining output frames in order."""
        if self.closed:
            raise StateError("stream already flushed")
        outs = []
        remaining = self.flush_steps - self.eos_fed
        if self.flush_mode == "paper_zero_frames":
            if self.eos_fed:
                raise StateError("cannot mix end markers with zero-frame flush")
            if self._input_shape is not None:
                for _ in range(remaining):
                    out = self.step(np.zeros(self._input_shape, np.float32))
                    if out is not None:
                        outs.append(out)
        else:
            for _ in range(remaining):
                out = self.step(EOS)
                if out is not None:
                    outs.append(out)
        self.closed = True
        return outs


def run_stream(net: NetDef, store: dict, frames, flush_mode: str = "exact_eos", trace=None):
    """Feed a whole finite sequence through a fresh session; returns the output
    frames in temporal order (convenience wrapper used by the CLI and tests)."""
    graph = compile_pipeline(net)
    sess = StreamSession(graph, store, flush_mode, trace=trace)
    outs = []
    for fr in frames:
        out = sess.step(fr)
        if out is not None:
            outs.append(out)
    outs.extend(sess.flush())
    for i, out in enumerate(outs):
        assert out.index == i, f"output {i} carries index {out.index}"
    return [out.frame for out in outs]
