"""bistream: constant-memory streaming video denoising.

A CPU inference engine whose bidirectional buffer blocks let a temporal-shift
network run online, one frame per step, with fixed latency and retained state
that does not grow with the stream; outputs are bit-identical to running the
whole sequence offline.
"""

__version__ = "0.1.0"

from .errors import (
    BadMagicError,
    BadVersionError,
    CompileError,
    ConfigError,
    FormatError,
    MissingTensorError,
    StateError,
    TensorMismatchError,
    TruncatedFileError,
)
from .fastdvd import (
    CascadePipeline,
    CascadeStage,
    op_count_report,
    sliding_forward,
    streaming_forward,
)
from .metrics import FidelityReport, per_frame_report, psnr, ssim
from .model import (
    Conv,
    FusionPoint,
    ModelConfig,
    NetDef,
    PixelShuffle,
    Relu6,
    SkipJoin,
    SkipSource,
    build_chain,
    build_unet,
    build_wnet,
    init_weights,
    load_model_config,
    load_weights,
    make_noise_map,
    save_model_config,
    save_weights,
)
from .noise import NoiseSpec, add_noise, gaussian_samples
from .offline import forward_clipped_mimo, forward_full_sequence, tsm_fuse, uni_fuse
from .pipeline import (
    EOS,
    BidirectionalBufferBlock,
    FeatureMap,
    PipelineGraph,
    StreamSession,
    UnidirectionalBufferBlock,
    analyze,
    compile_pipeline,
    run_stream,
)
from .seqio import read_ppm, read_sequence, write_ppm, write_sequence
from .synth import generate_sequence
from .tensor import (
    ConvWeights,
    add,
    concat_channels,
    conv2d,
    conv_call_count,
    pixel_shuffle,
    relu6,
    reset_conv_call_count,
    slice_channels,
)
