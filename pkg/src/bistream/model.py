"""Network definitions: W-Net backbone, weight init, weight file format.

A network is a flat, topologically ordered stage list (NetDef).  Temporal
fusion points are first-class stages so the same definition can be run
offline over a whole clip or compiled into a streaming pipeline.
"""

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    BadVersionError,
    ConfigError,
    MissingTensorError,
    TensorMismatchError,
    TruncatedFileError,
)
from .tensor import ConvWeights

WEIGHT_MAGIC = b"BSVDWGT1"
WEIGHT_VERSION = 1

FUSION_MODES = ("bidirectional", "unidirectional", "none")


@dataclass(frozen=True)
class Conv:
    name: str
    in_channels: int
    out_channels: int
    ksize: int = 3
    stride: int = 1
    padding: int = 1


@dataclass(frozen=True)
class Relu6:
    pass


@dataclass(frozen=True)
class PixelShuffle:
    factor: int = 2


@dataclass(frozen=True)
class FusionPoint:
    """Temporal fusion site on a feature map with ``channels`` channels.

    ``shifted`` is the per-direction shift width f = floor(channels / ratio).
    """

    channels: int
    shifted: int


@dataclass(frozen=True)
class SkipSource:
    tag: str


@dataclass(frozen=True)
class SkipJoin:
    tag: str


@dataclass
class ModelConfig:
    base_channels: int = 64
    input_channels: int = 3
    shift_ratio: int = 8
    fusion_mode: str = "bidirectional"

    def validate(self):
        if self.base_channels < 4 or self.base_channels % 2:
            raise ConfigError(f"base_channels must be an even count >= 4, got {self.base_channels}")
        if self.input_channels not in (3, 4, 5):
            raise ConfigError(
                f"input_channels must be 3 (blind), 4 (RGB + noise map) or 5 (raw + noise map), "
                f"got {self.input_channels}"
            )
        if self.shift_ratio < 1:
            raise ConfigError(f"shift_ratio must be >= 1, got {self.shift_ratio}")
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(f"fusion_mode must be one of {FUSION_MODES}, got {self.fusion_mode!r}")
        return self


def _shift_width(channels: int, ratio: int) -> int:
    f = channels // ratio
    if f < 1:
        raise ConfigError(f"shift ratio {ratio} gives zero shifted channels at width {channels}")
    if channels - 2 * f < 1:
        raise ConfigError(
            f"shift ratio {ratio} leaves no unshifted channels at width {channels} "
            f"(need channels - 2*f >= 1, got {channels - 2 * f})"
        )
    return f


@dataclass
class StageShape:
    """Dims flowing out of a stage: channel count and spatial divisors."""

    channels: int
    hdiv: int
    wdiv: int


@dataclass
class NetDef:
    stages: list
    input_channels: int
    fusion_mode: str = "bidirectional"
    shapes: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.shapes = _trace_shapes(self)

    @property
    def output_channels(self) -> int:
        return self.shapes[-1].channels if self.stages else self.input_channels

    @property
    def spatial_divisor(self) -> int:
        d = 1
        for s in self.shapes:
            d = max(d, s.hdiv, s.wdiv)
        return d

    def fusion_points(self):
        return [s for s in self.stages if isinstance(s, FusionPoint)]

    def conv_stages(self):
        return [s for s in self.stages if isinstance(s, Conv)]


def _trace_shapes(net: NetDef):
    """Walk the stage list checking dims; returns the per-stage output shapes."""
    if net.fusion_mode not in FUSION_MODES:
        raise ConfigError(f"unknown fusion_mode {net.fusion_mode!r}")
    ch, hdiv, wdiv = net.input_channels, 1, 1
    shapes = []
    sources = {}
    names = set()
    for st in net.stages:
        if isinstance(st, Conv):
            if st.name in names:
                raise ConfigError(f"duplicate conv stage name {st.name!r}")
            names.add(st.name)
            if st.in_channels != ch:
                raise ConfigError(f"conv {st.name!r} expects {st.in_channels} channels, gets {ch}")
            ch = st.out_channels
            if st.stride == 2:
                hdiv *= 2
                wdiv *= 2
            elif st.padding != st.ksize // 2:
                raise ConfigError(f"conv {st.name!r}: stride-1 padding must preserve spatial size")
        elif isinstance(st, Relu6):
            pass
        elif isinstance(st, PixelShuffle):
            f2 = st.factor * st.factor
            if ch % f2:
                raise ConfigError(f"pixel shuffle factor {st.factor} does not divide {ch} channels")
            if hdiv % st.factor or wdiv % st.factor:
                raise ConfigError("pixel shuffle would upsample beyond the input resolution")
            ch //= f2
            hdiv //= st.factor
            wdiv //= st.factor
        elif isinstance(st, FusionPoint):
            if st.channels != ch:
                raise ConfigError(f"fusion point declared at {st.channels} channels, feature has {ch}")
            if st.shifted < 1 or ch - 2 * st.shifted < 1:
                raise ConfigError(f"fusion point shift width {st.shifted} invalid for {ch} channels")
        elif isinstance(st, SkipSource):
            if st.tag in sources:
                raise ConfigError(f"duplicate skip source {st.tag!r}")
            sources[st.tag] = (ch, hdiv, wdiv)
        elif isinstance(st, SkipJoin):
            if st.tag not in sources:
                raise ConfigError(f"skip join {st.tag!r} has no matching source")
            src = sources.pop(st.tag)
            if src != (ch, hdiv, wdiv):
                raise ConfigError(
                    f"skip join {st.tag!r} dims {(ch, hdiv, wdiv)} do not match source {src}"
                )
        else:
            raise ConfigError(f"unknown stage type {type(st).__name__}")
        shapes.append(StageShape(ch, hdiv, wdiv))
    if sources:
        raise ConfigError(f"skip sources without a join: {sorted(sources)}")
    return shapes


def _unet_stages(prefix: str, in_channels: int, base: int, out_channels: int, ratio: int):
    """One U-Net of the backbone: 2 encoder levels, 2 decoder levels, 8 fusion points."""
    c1, c2, c3 = base, 2 * base, 4 * base
    f2 = _shift_width(c2, ratio)
    f3 = _shift_width(c3, ratio)
    st = []

    def conv(name, ci, co, stride=1):
        st.append(Conv(f"{prefix}.{name}", ci, co, 3, stride, 1))

    # input layer
    conv("in.conv0", in_channels, c1)
    st.append(Relu6())
    conv("in.conv1", c1, c1)
    st.append(Relu6())
    st.append(SkipSource(f"{prefix}.enc0"))
    # downsampling block 1
    conv("down1.conv_s2", c1, c2, stride=2)
    st.append(Relu6())
    for i in range(2):
        st.append(FusionPoint(c2, f2))
        conv(f"down1.block{i}.conv", c2, c2)
        st.append(Relu6())
    st.append(SkipSource(f"{prefix}.enc1"))
    # downsampling block 2
    conv("down2.conv_s2", c2, c3, stride=2)
    st.append(Relu6())
    for i in range(2):
        st.append(FusionPoint(c3, f3))
        conv(f"down2.block{i}.conv", c3, c3)
        st.append(Relu6())
    # upsampling block 1
    for i in range(2):
        st.append(FusionPoint(c3, f3))
        conv(f"up1.block{i}.conv", c3, c3)
        st.append(Relu6())
    conv("up1.widen", c3, 4 * c2)
    st.append(PixelShuffle(2))
    st.append(SkipJoin(f"{prefix}.enc1"))
    # upsampling block 2
    for i in range(2):
        st.append(FusionPoint(c2, f2))
        conv(f"up2.block{i}.conv", c2, c2)
        st.append(Relu6())
    conv("up2.widen", c2, 4 * c1)
    st.append(PixelShuffle(2))
    st.append(SkipJoin(f"{prefix}.enc0"))
    # output layer
    conv("out.conv0", c1, c1)
    st.append(Relu6())
    conv("out.conv1", c1, out_channels)
    return st


def build_wnet(cfg: ModelConfig) -> NetDef:
    """Two cascaded U-Nets; the first emits base_channels features, the second
    a 3-channel image.  16 fusion points at any channel scale, no normalization
    layers anywhere."""
    cfg.validate()
    stages = _unet_stages("u1", cfg.input_channels, cfg.base_channels, cfg.base_channels, cfg.shift_ratio)
    stages += _unet_stages("u2", cfg.base_channels, cfg.base_channels, 3, cfg.shift_ratio)
    return NetDef(stages, cfg.input_channels, cfg.fusion_mode)


def build_unet(in_channels: int, base: int, out_channels: int, shift_ratio: int = 8,
               fusion_mode: str = "none", prefix: str = "u") -> NetDef:
    """A single U-Net; with fusion_mode='none' this is the frame-wise stage
    denoiser used by the two-stage cascade."""
    stages = _unet_stages(prefix, in_channels, base, out_channels, shift_ratio)
    return NetDef(stages, in_channels, fusion_mode)


def build_chain(in_channels: int, channels: int, n_blocks: int, out_channels: int = 3,
                shift_ratio: int = 8, fusion_mode: str = "bidirectional",
                skip: bool = False) -> NetDef:
    """Minimal fusion chain: input conv, n_blocks [fusion, conv, relu6] groups,
    output conv.  With ``skip`` a source/join pair brackets the blocks, which
    exercises a delay queue of depth n_blocks."""
    f = _shift_width(channels, shift_ratio)
    st = [Conv("in.conv", in_channels, channels, 3, 1, 1), Relu6()]
    if skip:
        st.append(SkipSource("chain"))
    for i in range(n_blocks):
        st.append(FusionPoint(channels, f))
        st.append(Conv(f"block{i}.conv", channels, channels, 3, 1, 1))
        st.append(Relu6())
    if skip:
        st.append(SkipJoin("chain"))
    st.append(Conv("out.conv", channels, out_channels, 3, 1, 1))
    return NetDef(st, in_channels, fusion_mode)


# ---------------------------------------------------------------------------
# weights


def init_weights(net: NetDef, seed: int, mode: str = "he") -> dict:
    """Build a weight store for every conv stage.

    mode 'he': fan-in-scaled uniform values, kernel[i] ~ U(-b, b) with
    b = sqrt(6 / fan_in), drawn from numpy's PCG64 stream seeded with ``seed``
    in stage order; biases zero.  The same seed yields a bitwise-identical
    store.  mode 'zero': all kernels and biases zero, so the network output is
    the composition of biases alone.
    """
    if mode not in ("he", "zero"):
        raise ConfigError(f"unknown init mode {mode!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    store = {}
    for st in net.conv_stages():
        shape = (st.out_channels, st.in_channels, st.ksize, st.ksize)
        if mode == "zero":
            kern = np.zeros(shape, np.float32)
        else:
            fan_in = st.in_channels * st.ksize * st.ksize
            bound = np.sqrt(6.0 / fan_in)
            kern = rng.uniform(-bound, bound, size=shape).astype(np.float32)
        bias = np.zeros(st.out_channels, np.float32)
        store[st.name] = ConvWeights(kern, bias, st.stride, st.padding)
    return store


def _write_tensor(fh, name: str, arr: np.ndarray):
    raw = name.encode("utf-8")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)
    fh.write(struct.pack("<B", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def save_weights(store: dict, path):
    """Write the store to the little-endian tensor container (round-trips bitwise)."""
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<II", WEIGHT_VERSION, 2 * len(store)))
        for name, w in store.items():
            _write_tensor(fh, f"{name}.kernel", w.kernel)
            _write_tensor(fh, f"{name}.bias", w.bias)


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"weight file truncated while reading {what}")
    return buf


def load_weights(path, net: NetDef) -> dict:
    """Read a weight container and bind it to ``net``'s conv stages.

    Raises a distinct error for a bad magic, an unsupported version, a
    truncated file, a tensor whose dims disagree with the definition, and a
    conv stage with no stored tensor.
    """
    tensors = {}
    with open(path, "rb") as fh:
        magic = fh.read(len(WEIGHT_MAGIC))
        if magic != WEIGHT_MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {WEIGHT_MAGIC!r}")
        version, count = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if version != WEIGHT_VERSION:
            raise BadVersionError(f"unsupported weight file version {version}")
        for _ in range(count):
            (nlen,) = struct.unpack("<H", _read_exact(fh, 2, "name length"))
            name = _read_exact(fh, nlen, "name").decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(fh, 1, f"rank of {name}"))
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, f"dims of {name}"))
            n = int(np.prod(dims)) if rank else 1
            raw = _read_exact(fh, 4 * n, f"data of {name}")
            tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float32)
    store = {}
    for st in net.conv_stages():
        kname, bname = f"{st.name}.kernel", f"{st.name}.bias"
        if kname not in tensors or bname not in tensors:
            raise MissingTensorError(f"incomplete store: no tensor for stage {st.name!r}")
        kern, bias = tensors[kname], tensors[bname]
        want = (st.out_channels, st.in_channels, st.ksize, st.ksize)
        if kern.shape != want:
            raise TensorMismatchError(
                f"stage {st.name!r}: stored kernel {kern.shape} does not match definition {want}"
            )
        if bias.shape != (st.out_channels,):
            raise TensorMismatchError(
                f"stage {st.name!r}: stored bias {bias.shape} does not match ({st.out_channels},)"
            )
        store[st.name] = ConvWeights(kern, bias, st.stride, st.padding)
    return store


def store_bytes(store: dict) -> bytes:
    """Serialized form of a store, for cheap equality checks."""
    fh = io.BytesIO()
    fh.write(WEIGHT_MAGIC)
    fh.write(struct.pack("<II", WEIGHT_VERSION, 2 * len(store)))
    for name, w in store.items():
        _write_tensor(fh, f"{name}.kernel", w.kernel)
        _write_tensor(fh, f"{name}.bias", w.bias)
    return fh.getvalue()


# ---------------------------------------------------------------------------
# inputs


def make_noise_map(sigma: float, height: int, width: int) -> np.ndarray:
    """Constant single-channel plane of value sigma/255 (sigma on the 0-255 scale)."""
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    return np.full((1, height, width), np.float32(sigma / 255.0), np.float32)


def save_model_config(cfg: ModelConfig, path):
    cfg.validate()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"base_channels={cfg.base_channels}\n")
        fh.write(f"input_channels={cfg.input_channels}\n")
        fh.write(f"shift_ratio={cfg.shift_ratio}\n")
        fh.write(f"fusion_mode={cfg.fusion_mode}\n")


def load_model_config(path) -> ModelConfig:
    cfg = ModelConfig()
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in seen:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            seen.add(key)
            if key in ("base_channels", "input_channels", "shift_ratio"):
                setattr(cfg, key, int(value))
            elif key == "fusion_mode":
                cfg.fusion_mode = value
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return cfg.validate()
