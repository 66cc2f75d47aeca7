"""Raw sequence container and 8-bit viewing exports.

Sequences live in a little-endian planar container so equivalence claims can
be made byte for byte: magic "BSVDSEQ1", u32 version, u32 T/C/H/W, then T
frames of float32 data in channel-major order.  PGM/PPM export is for
eyeballing only; it quantizes to 8 bits and is never used in equivalence
checks.
"""

import struct

import numpy as np

from .errors import (
    BadMagicError,
    BadVersionError,
    ConfigError,
    FormatError,
    TruncatedFileError,
)

SEQ_MAGIC = b"BSVDSEQ1"
SEQ_VERSION = 1


def write_sequence(path, frames):
    frames = list(frames)
    if not frames:
        raise ConfigError("cannot write an empty sequence")
    c, h, w = frames[0].shape
    for i, fr in enumerate(frames):
        if fr.shape != (c, h, w) or fr.dtype != np.float32:
            raise ConfigError(f"frame {i} must be float32 of shape {(c, h, w)}")
        if not np.isfinite(fr).all():
            raise ConfigError(f"frame {i} has non-finite values")
        if fr.min() < 0.0 or fr.max() > 1.0:
            raise ConfigError(f"frame {i} values must lie in [0, 1]")
    with open(path, "wb") as fh:
        fh.write(SEQ_MAGIC)
        fh.write(struct.pack("<IIIII", SEQ_VERSION, len(frames), c, h, w))
        for fr in frames:
            fh.write(np.ascontiguousarray(fr, dtype="<f4").tobytes())


def read_sequence(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(SEQ_MAGIC))
        if magic != SEQ_MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {SEQ_MAGIC!r}")
        head = fh.read(20)
        if len(head) != 20:
            raise TruncatedFileError("sequence file truncated in header")
        version, t, c, h, w = struct.unpack("<IIIII", head)
        if version != SEQ_VERSION:
            raise BadVersionError(f"unsupported sequence version {version}")
        frames = []
        per = 4 * c * h * w
        for i in range(t):
            raw = fh.read(per)
            if len(raw) != per:
                raise TruncatedFileError(f"sequence file truncated in frame {i}")
            frames.append(np.frombuffer(raw, dtype="<f4").reshape(c, h, w).astype(np.float32))
        if fh.read(1):
            raise FormatError("trailing bytes after the last frame")
    for i, fr in enumerate(frames):
        if not np.isfinite(fr).all() or fr.min() < 0.0 or fr.max() > 1.0:
            raise FormatError(f"frame {i} holds values outside [0, 1]")
    return frames


def write_ppm(path, frame):
    """8-bit view of one frame: P6 for 3 channels, P5 for 1 (lossy)."""
    c, h, w = frame.shape
    if c not in (1, 3):
        raise ConfigError(f"PGM/PPM export supports 1 or 3 channels, got {c}")
    data = np.rint(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)
    kind = b"P5" if c == 1 else b"P6"
    with open(path, "wb") as fh:
        fh.write(kind + b"\n%d %d\n255\n" % (w, h))
        if c == 1:
            fh.write(data[0].tobytes())
        else:
            fh.write(data.transpose(1, 2, 0).tobytes())


def read_ppm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":  # comment line
            pos = blob.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    kind, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if kind not in (b"P5", b"P6"):
        raise FormatError(f"unsupported netpbm kind {kind!r}")
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    c = 1 if kind == b"P5" else 3
    raw = blob[pos:pos + c * h * w]
    if len(raw) != c * h * w:
        raise TruncatedFileError("netpbm file truncated")
    data = np.frombuffer(raw, np.uint8)
    if c == 1:
        arr = data.reshape(1, h, w)
    else:
        arr = data.reshape(h, w, 3).transpose(2, 0, 1)
    return (arr.astype(np.float32) / 255.0).astype(np.float32)
