"""Quality and efficiency measures: MSE, PSNR, compression percentage.

Samples are normalized to [0, 1] (divide by 255) before the MSE sum, so
PSNR = 10*log10(1/MSE) coincides with the conventional peak-referenced
definition for 8-bit content.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .codec.frames import Frame, VideoSequence
from .errors import InvalidInputError

INF_TEXT = "inf"


def mse(f: Frame, g: Frame) -> float:
    """Mean squared error between two frames on [0, 1]-normalized samples."""
    if f.plane.shape != g.plane.shape:
        raise InvalidInputError(
            f"frame dimensions differ: {f.plane.shape} vs {g.plane.shape}")
    diff = (f.plane.astype(np.float64) - g.plane.astype(np.float64)) / 255.0
    return float(np.mean(diff * diff))


def psnr(mse_value: float) -> float:
    """10*log10(1/MSE) in dB; identical frames map to +inf, never an error."""
    if mse_value < 0:
        raise InvalidInputError("MSE cannot be negative")
    if mse_value == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse_value)


def compression_percentage(osize: float, csize: float) -> float:
    """How much of the original was shed: 100 * (osize - csize) / osize."""
    if osize <= 0:
        raise InvalidInputError("original size must be positive")
    if csize < 0:
        raise InvalidInputError("compressed size cannot be negative")
    return 100.0 * (osize - csize) / osize


@dataclass
class QualityReport:
    """Per-frame and sequence-level quality plus size accounting.

    ``avg_psnr_db`` averages only the finite per-frame values; frames with
    zero MSE are tallied in ``lossless_frames`` instead (an all-lossless
    report averages to +inf).
    """

    original_size: int
    compressed_size: int
    frame_mse: list = field(default_factory=list)
    frame_psnr: list = field(default_factory=list)
    lossless_frames: int = field(init=False, default=0)
    avg_psnr_db: float = field(init=False, default=math.inf)
    cp_percent: float = field(init=False, default=0.0)

    def __post_init__(self):
        self.cp_percent = compression_percentage(self.original_size,
                                                 self.compressed_size)
        finite = [p for p in self.frame_psnr if math.isfinite(p)]
        self.lossless_frames = sum(1 for p in self.frame_psnr
                                   if not math.isfinite(p))
        if finite:
            self.avg_psnr_db = sum(finite) / len(finite)
        else:
            self.avg_psnr_db = math.inf


def compare_sequences(original: VideoSequence, decoded: VideoSequence,
                      original_size: int, compressed_size: int) -> QualityReport:
    """Build a QualityReport by comparing a decode against its source."""
    if len(original) != len(decoded):
        raise InvalidInputError("sequences have different frame counts")
    frame_mse = [mse(a, b) for a, b in zip(original.frames, decoded.frames)]
    return QualityReport(original_size=original_size,
                         compressed_size=compressed_size,
                         frame_mse=frame_mse,
                         frame_psnr=[psnr(m) for m in frame_mse])


def _fmt(value: float) -> str:
    return INF_TEXT if math.isinf(value) else f"{value:.4f}"


REPORT_COLUMNS = ("size_bytes", "compressed_bytes", "cp_percent", "avg_psnr_db")


def emit_report(report: QualityReport, format: str = "csv") -> bytes:
    """Serialize a report deterministically; column order and precision fixed."""
    if format == "csv":
        lines = [",".join(REPORT_COLUMNS)]
        if report.frame_psnr:
            lines.append(",".join((str(report.original_size),
                                   str(report.compressed_size),
                                   _fmt(report.cp_percent),
                                   _fmt(report.avg_psnr_db))))
        return ("\n".join(lines) + "\n").encode()
    if format == "text":
        lines = [f"size_bytes: {report.original_size}",
                 f"compressed_bytes: {report.compressed_size}",
                 f"cp_percent: {_fmt(report.cp_percent)}",
                 f"avg_psnr_db: {_fmt(report.avg_psnr_db)}",
                 f"frames: {len(report.frame_psnr)}",
                 f"lossless_frames: {report.lossless_frames}"]
        return ("\n".join(lines) + "\n").encode()
    raise InvalidInputError(f"unknown report format {format!r}")
