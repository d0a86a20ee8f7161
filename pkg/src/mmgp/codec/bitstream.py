"""The .dwv container and the end-to-end encode/decode pipeline.

Layout: 4-byte magic "DWV1", then little-endian u16 width, u16 height,
u32 frame count, u8 gop_size, u8 levels, u8 mode (0 lossless, 1 lossy),
f32 quantizer step, then one {u32 length, DEFLATE chunk} record per
temporal group, in group order.

Chunk interiors (canonical, fixed):
  lossless  every plane of the group (base first, then residuals) as
            row-major little-endian int16.  Lossless mode never runs the
            wavelet transform; the float filters could not guarantee
            bit-exactness, and residual-heavy planes already deflate well.
  lossy     every plane (base and residuals alike) is transformed,
            quantized, and written as row-major little-endian int32 per
            subband: LL of the deepest level first, then per level
            (deepest to finest) HL, LH, HH.
"""

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import CorruptDataError, InvalidInputError, UnsupportedFormatError
from .dwt import SubbandPyramid, dwt2d_forward, dwt2d_inverse, subband_shapes
from .entropy import entropy_decode, entropy_encode
from .frames import Frame, VideoSequence
from .quantize import MODE_LOSSLESS, MODE_LOSSY, QuantizerConfig, dequantize, quantize
from .temporal import merge_temporal, split_temporal

MAGIC = b"DWV1"
_HEADER = struct.Struct("<4sHHIBBBf")
_MODE_CODES = {MODE_LOSSLESS: 0, MODE_LOSSY: 1}
_MODE_NAMES = {0: MODE_LOSSLESS, 1: MODE_LOSSY}


@dataclass
class Bitstream:
    width: int
    height: int
    frame_count: int
    gop_size: int
    levels: int
    mode: str
    step: float
    chunks: list  # DEFLATE-compressed bytes, one per temporal group

    @property
    def payload_size(self) -> int:
        """Bytes of the payload section (chunks plus their length prefixes)."""
        return sum(4 + len(c) for c in self.chunks)

    @property
    def total_size(self) -> int:
        return _HEADER.size + self.payload_size

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(MAGIC, self.width, self.height, self.frame_count,
                            self.gop_size, self.levels,
                            _MODE_CODES[self.mode], self.step)
        parts = [head]
        for chunk in self.chunks:
            parts.append(struct.pack("<I", len(chunk)))
            parts.append(chunk)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        if len(data) < _HEADER.size:
            raise UnsupportedFormatError("stream shorter than a container header")
        magic, width, height, frame_count, gop, levels, mode_code, step = \
            _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise UnsupportedFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if mode_code not in _MODE_NAMES:
            raise UnsupportedFormatError(f"unknown mode byte {mode_code}")
        chunks = []
        pos = _HEADER.size
        while pos < len(data):
            if pos + 4 > len(data):
                raise CorruptDataError("truncated chunk length prefix")
            (length,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if pos + length > len(data):
                raise CorruptDataError("truncated chunk payload")
            chunks.append(data[pos:pos + length])
            pos += length
        return cls(width=width, height=height, frame_count=frame_count,
                   gop_size=gop, levels=levels, mode=_MODE_NAMES[mode_code],
                   step=float(step), chunks=chunks)


def _serialize_pyramid(pyramid: SubbandPyramid) -> bytes:
    parts = [np.ascontiguousarray(pyramid.ll, dtype="<i4").tobytes()]
    for hl, lh, hh in pyramid.details:
        for band in (hl, lh, hh):
            parts.append(np.ascontiguousarray(band, dtype="<i4").tobytes())
    return b"".join(parts)


def _read_plane(raw, pos, shape, dtype):
    count = shape[0] * shape[1]
    nbytes = count * dtype.itemsize
    if pos + nbytes > len(raw):
        raise CorruptDataError("group chunk ended mid-plane")
    plane = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    return plane.reshape(shape), pos + nbytes


def _deserialize_pyramid(raw, pos, height, width, levels):
    dtype = np.dtype("<i4")
    ll_shape, detail_shapes = subband_shapes(height, width, levels)
    ll, pos = _read_plane(raw, pos, ll_shape, dtype)
    details = []
    for hl_s, lh_s, hh_s in detail_shapes:
        hl, pos = _read_plane(raw, pos, hl_s, dtype)
        lh, pos = _read_plane(raw, pos, lh_s, dtype)
        hh, pos = _read_plane(raw, pos, hh_s, dtype)
        details.append((hl, lh, hh))
    return SubbandPyramid(levels=levels, ll=ll, details=details), pos


def encode_video(seq: VideoSequence, gop_size: int = 2, levels: int = 3,
                 q: QuantizerConfig = QuantizerConfig()) -> Bitstream:
    """Run the full pipeline: temporal split, (lossy: transform + quantize),
    canonical serialization, DEFLATE per group."""
    if not 1 <= gop_size <= 255:
        raise InvalidInputError("gop_size must be in [1, 255]")
    if seq.width > 0xFFFF or seq.height > 0xFFFF or len(seq) > 0xFFFFFFFF:
        raise InvalidInputError("sequence dimensions exceed container limits")
    # The header stores the step as f32; quantize with the stored value so
    # encoder and decoder agree bit-for-bit.
    step = float(np.float32(q.step)) if q.mode == MODE_LOSSY else 0.0
    groups = split_temporal(seq, gop_size)
    chunks = []
    for group in groups:
        planes = [group.base.plane.astype(np.int16)] + list(group.residuals)
        if q.mode == MODE_LOSSY:
            parts = []
            for plane in planes:
                pyramid = dwt2d_forward(plane.astype(np.float64), levels)
                parts.append(_serialize_pyramid(
                    quantize(pyramid, QuantizerConfig(step, MODE_LOSSY))))
            raw = b"".join(parts)
        else:
            raw = b"".join(np.ascontiguousarray(p, dtype="<i2").tobytes()
                           for p in planes)
        chunks.append(entropy_encode(raw))
    return Bitstream(width=seq.width, height=seq.height, frame_count=len(seq),
                     gop_size=gop_size, levels=levels, mode=q.mode, step=step,
                     chunks=chunks)


def _group_sizes(frame_count: int, gop_size: int):
    sizes = []
    remaining = frame_count
    while remaining > 0:
        take = min(gop_size, remaining)
        sizes.append(take)
        remaining -= take
    return sizes


def _decode_lossless_group(raw, size, height, width):
    dtype = np.dtype("<i2")
    pos = 0
    base, pos = _read_plane(raw, pos, (height, width), dtype)
    if base.min(initial=0) < 0 or base.max(initial=0) > 255:
        raise CorruptDataError("base plane sample out of [0, 255]")
    frames = [Frame(base.astype(np.uint8))]
    base_i16 = base.astype(np.int16)
    for _ in range(size - 1):
        residual, pos = _read_plane(raw, pos, (height, width), dtype)
        if residual.min(initial=0) < -255 or residual.max(initial=0) > 255:
            raise CorruptDataError("residual sample out of [-255, 255]")
        restored = base_i16 + residual
        if restored.min() < 0 or restored.max() > 255:
            raise CorruptDataError("reconstructed sample out of [0, 255]")
        frames.append(Frame(restored.astype(np.uint8)))
    if pos != len(raw):
        raise CorruptDataError("trailing bytes in group chunk")
    return frames


def _decode_lossy_group(raw, size, height, width, levels, q):
    pos = 0
    planes = []
    for _ in range(size):
        pyramid, pos = _deserialize_pyramid(raw, pos, height, width, levels)
        planes.append(dwt2d_inverse(dequantize(pyramid, q)))
    if pos != len(raw):
        raise CorruptDataError("trailing bytes in group chunk")
    base = planes[0]
    frames = [Frame(np.clip(np.rint(base), 0, 255).astype(np.uint8))]
    for residual in planes[1:]:
        frames.append(Frame(np.clip(np.rint(base + residual), 0, 255)
                            .astype(np.uint8)))
    return frames


def decode_video(bs: Bitstream) -> VideoSequence:
    """Invert :func:`encode_video`; bit-exact in lossless mode."""
    if bs.width < 1 or bs.height < 1 or bs.frame_count < 1 or bs.gop_size < 1:
        raise CorruptDataError("container header fields out of range")
    sizes = _group_sizes(bs.frame_count, bs.gop_size)
    if len(bs.chunks) != len(sizes):
        raise CorruptDataError(
            f"expected {len(sizes)} group chunks, found {len(bs.chunks)}")
    if bs.mode == MODE_LOSSY:
        q = QuantizerConfig(bs.step, MODE_LOSSY)
    frames = []
    for chunk, size in zip(bs.chunks, sizes):
        raw = entropy_decode(chunk)
        if bs.mode == MODE_LOSSLESS:
            frames.extend(_decode_lossless_group(raw, size, bs.height, bs.width))
        else:
            frames.extend(_decode_lossy_group(raw, size, bs.height, bs.width,
                                              bs.levels, q))
    return VideoSequence(frames)
