"""Frame and sequence containers plus raw-Y8 / PGM adapters.

Frames are single 8-bit luma planes.  Colour inputs are reduced to luma
at ingestion with integer BT.601 weights; nothing downstream sees RGB.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError


@dataclass
class Frame:
    """One luma plane; ``plane`` is a (height, width) uint8 array."""

    plane: np.ndarray
    index: int = 0

    def __post_init__(self):
        self.plane = np.asarray(self.plane)
        if self.plane.ndim != 2:
            raise InvalidInputError("frame plane must be two-dimensional")
        if self.plane.dtype != np.uint8:
            if np.any(self.plane < 0) or np.any(self.plane > 255):
                raise InvalidInputError("frame samples must lie in [0, 255]")
            self.plane = self.plane.astype(np.uint8)

    @property
    def width(self) -> int:
        return self.plane.shape[1]

    @property
    def height(self) -> int:
        return self.plane.shape[0]


@dataclass
class VideoSequence:
    """Ordered frames of identical dimensions; fps is carried as metadata only."""

    frames: list
    fps: float = 0.0
    width: int = field(init=False)
    height: int = field(init=False)

    def __post_init__(self):
        if not self.frames:
            raise InvalidInputError("sequence must contain at least one frame")
        first = self.frames[0]
        self.width = first.width
        self.height = first.height
        for i, frame in enumerate(self.frames):
            if frame.width != self.width or frame.height != self.height:
                raise InvalidInputError("all frames must share dimensions")
            frame.index = i

    def __len__(self) -> int:
        return len(self.frames)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VideoSequence):
            return NotImplemented
        return (len(self) == len(other)
                and all(np.array_equal(a.plane, b.plane)
                        for a, b in zip(self.frames, other.frames)))

    def to_planes(self) -> np.ndarray:
        """Stack frames into one (n, height, width) uint8 array."""
        return np.stack([f.plane for f in self.frames])


def sequence_from_planes(planes, fps: float = 0.0) -> VideoSequence:
    return VideoSequence([Frame(p, i) for i, p in enumerate(planes)], fps=fps)


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    """Full-range integer BT.601 luma: (77R + 150G + 29B + 128) >> 8."""
    r = rgb[..., 0].astype(np.uint32)
    g = rgb[..., 1].astype(np.uint32)
    b = rgb[..., 2].astype(np.uint32)
    return ((77 * r + 150 * g + 29 * b + 128) >> 8).astype(np.uint8)


def read_y8(data: bytes, width: int, height: int, fps: float = 0.0) -> VideoSequence:
    """Parse headerless concatenated luma planes; dims come from the caller."""
    if width < 1 or height < 1:
        raise InvalidInputError("width and height must be positive")
    frame_size = width * height
    if not data or len(data) % frame_size != 0:
        raise InvalidInputError(
            f"raw size {len(data)} is not a positive multiple of {width}x{height}")
    planes = np.frombuffer(data, dtype=np.uint8).reshape(-1, height, width)
    return sequence_from_planes(planes, fps=fps)


def write_y8(seq: VideoSequence) -> bytes:
    return seq.to_planes().tobytes()


def read_pgm(data: bytes) -> np.ndarray:
    """Parse a binary (P5) PGM image into a uint8 plane."""
    fields = []
    pos = 0
    while len(fields) < 4:
        if pos >= len(data):
            raise InvalidInputError("truncated PGM header")
        if data[pos:pos + 1] == b"#":  # comment to end of line
            pos = data.index(b"\n", pos) + 1
            continue
        if data[pos:pos + 1].isspace():
            pos += 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise InvalidInputError("only binary (P5) PGM is supported")
    width, height, maxval = (int(v) for v in fields[1:])
    if maxval != 255:
        raise InvalidInputError("only 8-bit PGM is supported")
    pos += 1  # single whitespace after maxval
    if len(data) - pos < width * height:
        raise InvalidInputError("truncated PGM pixel data")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return pixels.reshape(height, width).copy()


def write_pgm(plane: np.ndarray) -> bytes:
    plane = np.asarray(plane, dtype=np.uint8)
    header = f"P5\n{plane.shape[1]} {plane.shape[0]}\n255\n".encode()
    return header + plane.tobytes()


def read_pgm_sequence(paths, fps: float = 0.0) -> VideoSequence:
    """Load a sorted list of P5 files as one sequence (the test-fixture adapter)."""
    planes = [read_pgm(open(p, "rb").read()) for p in paths]
    if not planes:
        raise InvalidInputError("no PGM files given")
    return sequence_from_planes(planes, fps=fps)
