"""dWave codec: temporal differencing, lifting wavelet transform,
dead-zone quantizer, DEFLATE entropy stage, and the .dwv container."""

from .bitstream import Bitstream, decode_video, encode_video
from .dwt import (SubbandPyramid, dwt1d_forward, dwt1d_inverse, dwt2d_forward,
                  dwt2d_inverse, max_feasible_levels, subband_shapes)
from .entropy import entropy_decode, entropy_encode
from .filterbank import DEFAULT_BANK, FilterBank, derive_synthesis_filters
from .frames import (Frame, VideoSequence, read_pgm, read_pgm_sequence,
                     read_y8, rgb_to_luma, sequence_from_planes, write_pgm,
                     write_y8)
from .quantize import (MODE_LOSSLESS, MODE_LOSSY, QuantizerConfig, dequantize,
                       dequantize_value, quantize, quantize_value)
from .temporal import TemporalGroup, merge_temporal, split_temporal

__all__ = [
    "Bitstream", "decode_video", "encode_video",
    "SubbandPyramid", "dwt1d_forward", "dwt1d_inverse", "dwt2d_forward",
    "dwt2d_inverse", "max_feasible_levels", "subband_shapes",
    "entropy_decode", "entropy_encode",
    "DEFAULT_BANK", "FilterBank", "derive_synthesis_filters",
    "Frame", "VideoSequence", "read_pgm", "read_pgm_sequence", "read_y8",
    "rgb_to_luma", "sequence_from_planes", "write_pgm", "write_y8",
    "MODE_LOSSLESS", "MODE_LOSSY", "QuantizerConfig", "dequantize",
    "dequantize_value", "quantize", "quantize_value",
    "TemporalGroup", "merge_temporal", "split_temporal",
]
