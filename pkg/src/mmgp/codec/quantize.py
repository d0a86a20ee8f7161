"""Uniform dead-zone scalar quantizer over subband pyramids."""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from .dwt import SubbandPyramid

MODE_LOSSLESS = "lossless"
MODE_LOSSY = "lossy"


@dataclass(frozen=True)
class QuantizerConfig:
    step: float = 8.0
    mode: str = MODE_LOSSY

    def __post_init__(self):
        if self.mode not in (MODE_LOSSLESS, MODE_LOSSY):
            raise InvalidInputError(f"unknown quantizer mode {self.mode!r}")
        if self.mode == MODE_LOSSY and not self.step > 0:
            raise InvalidInputError("quantizer step must be > 0 in lossy mode")


def _quantize_plane(coeffs: np.ndarray, step: float) -> np.ndarray:
    # sign(c) * floor(|c| / step), i.e. truncation toward zero.
    return np.trunc(np.asarray(coeffs, dtype=np.float64) / step).astype(np.int32)


def _dequantize_plane(levels: np.ndarray, step: float) -> np.ndarray:
    # Midpoint reconstruction: sign(k) * (|k| + 0.5) * step; zero stays zero.
    k = np.asarray(levels, dtype=np.float64)
    return np.sign(k) * (np.abs(k) + 0.5) * step


def quantize(pyramid: SubbandPyramid, q: QuantizerConfig) -> SubbandPyramid:
    """Map real coefficients to integer levels (dead-zone at the origin)."""
    if q.mode == MODE_LOSSLESS:
        raise InvalidInputError("lossless mode carries raw planes, not pyramids")
    return SubbandPyramid(
        levels=pyramid.levels,
        ll=_quantize_plane(pyramid.ll, q.step),
        details=[tuple(_quantize_plane(band, q.step) for band in triple)
                 for triple in pyramid.details])


def dequantize(pyramid: SubbandPyramid, q: QuantizerConfig) -> SubbandPyramid:
    """Map integer levels back to real coefficients at bin midpoints."""
    if q.mode == MODE_LOSSLESS:
        raise InvalidInputError("lossless mode carries raw planes, not pyramids")
    return SubbandPyramid(
        levels=pyramid.levels,
        ll=_dequantize_plane(pyramid.ll, q.step),
        details=[tuple(_dequantize_plane(band, q.step) for band in triple)
                 for triple in pyramid.details])


def quantize_value(c: float, step: float) -> int:
    """Scalar form of the forward map (handy for tests and docs)."""
    return int(np.trunc(c / step))


def dequantize_value(k: int, step: float) -> float:
    return float(np.sign(k) * (abs(k) + 0.5) * step)
