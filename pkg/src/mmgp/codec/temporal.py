"""Group-of-pictures decomposition: base frames plus signed residuals."""

from dataclasses import dataclass

import numpy as np

from ..errors import CorruptDataError, InvalidInputError
from .frames import Frame, VideoSequence


@dataclass
class TemporalGroup:
    """A base frame and the residuals of the frames that follow it.

    Residual planes are int16 in [-255, 255]; adding one to the base
    plane reproduces the corresponding source frame exactly.
    """

    base: Frame
    residuals: list  # [int16 plane, ...]
    gop_size: int


def split_temporal(seq: VideoSequence, gop_size: int):
    """Cut a sequence into groups of ``gop_size`` frames, differencing each
    group's later frames against its first."""
    if gop_size < 1:
        raise InvalidInputError("gop_size must be >= 1")
    if not isinstance(seq, VideoSequence) or len(seq) == 0:
        raise InvalidInputError("sequence must contain at least one frame")
    groups = []
    for start in range(0, len(seq), gop_size):
        base = seq.frames[start]
        base_i16 = base.plane.astype(np.int16)
        residuals = [frame.plane.astype(np.int16) - base_i16
                     for frame in seq.frames[start + 1: start + gop_size]]
        groups.append(TemporalGroup(base=base, residuals=residuals,
                                    gop_size=gop_size))
    return groups


def merge_temporal(groups) -> VideoSequence:
    """Rebuild the original sequence from groups; exact inverse of split."""
    if not groups:
        raise InvalidInputError("no groups to merge")
    width, height = groups[0].base.width, groups[0].base.height
    frames = []
    for group in groups:
        if group.base.width != width or group.base.height != height:
            raise InvalidInputError("groups disagree on frame dimensions")
        frames.append(Frame(group.base.plane.copy()))
        base_i16 = group.base.plane.astype(np.int16)
        for residual in group.residuals:
            residual = np.asarray(residual)
            if residual.shape != group.base.plane.shape:
                raise CorruptDataError("residual shape does not match base frame")
            if residual.min(initial=0) < -255 or residual.max(initial=0) > 255:
                raise CorruptDataError("residual sample out of [-255, 255]")
            restored = base_i16 + residual.astype(np.int16)
            if restored.min() < 0 or restored.max() > 255:
                raise CorruptDataError("reconstructed sample out of [0, 255]")
            frames.append(Frame(restored.astype(np.uint8)))
    return VideoSequence(frames)
