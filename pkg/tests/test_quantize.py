import numpy as np
import pytest

from mmgp.codec import (QuantizerConfig, dequantize, dequantize_value,
                        dwt2d_forward, dwt2d_inverse, quantize, quantize_value)
from mmgp.errors import InvalidInputError


def test_zero_maps_to_zero_any_step():
    for step in (0.5, 1.0, 2.0, 16.0):
        assert quantize_value(0.0, step) == 0
        assert dequantize_value(0, step) == 0.0


def test_floor_arithmetic():
    assert quantize_value(7.9, 2.0) == 3
    assert quantize_value(-7.9, 2.0) == -3
    assert quantize_value(1.999, 2.0) == 0  # dead zone around the origin


def test_midpoint_dequantization():
    assert dequantize_value(3, 2.0) == 7.0
    assert dequantize_value(-3, 2.0) == -7.0


def test_config_validation():
    with pytest.raises(InvalidInputError):
        QuantizerConfig(step=0.0, mode="lossy")
    with pytest.raises(InvalidInputError):
        QuantizerConfig(step=1.0, mode="sideways")
    QuantizerConfig(step=0.0, mode="lossless")  # step unused when lossless


def test_pyramid_quantization_roundtrip_types():
    rng = np.random.default_rng(2)
    pyr = dwt2d_forward(rng.uniform(0, 255, (16, 16)), 2)
    q = QuantizerConfig(step=4.0, mode="lossy")
    levels = quantize(pyr, q)
    assert levels.ll.dtype == np.int32
    back = dequantize(levels, q)
    assert back.ll.dtype == np.float64
    # every reconstructed coefficient sits in its source bin's midpoint
    assert np.max(np.abs(back.ll - pyr.ll)) <= 0.5 * q.step + 1e-9


def test_coarser_step_never_reduces_reconstruction_error():
    # oracle: full transform -> quantize -> dequantize -> inverse transform
    rng = np.random.default_rng(7)
    plane = rng.uniform(0, 255, (16, 16))
    pyr = dwt2d_forward(plane, 2)

    def decode_mse(step):
        q = QuantizerConfig(step=step, mode="lossy")
        rec = dwt2d_inverse(dequantize(quantize(pyr, q), q))
        return float(np.mean((rec - plane) ** 2))

    assert decode_mse(4.0) >= decode_mse(1.0)


def test_lossless_mode_rejects_pyramids():
    pyr = dwt2d_forward(np.zeros((4, 4)), 1)
    with pytest.raises(InvalidInputError):
        quantize(pyr, QuantizerConfig(step=0.0, mode="lossless"))
