import math

import numpy as np

from mmgp.codec import DEFAULT_BANK, FilterBank, derive_synthesis_filters

SQRT2 = math.sqrt(2.0)


def test_tap_values_match_published_lists():
    scale = 2.0 ** -6.5
    assert np.allclose(DEFAULT_BANK.analysis_low,
                       np.array([32, 64, 32]) * scale, atol=0)
    assert np.allclose(DEFAULT_BANK.analysis_high,
                       np.array([3, 6, -16, -38, 90, -38, -16, 6, 3]) * scale,
                       atol=0)


def test_high_pass_integer_taps_sum_exactly_zero():
    assert sum(DEFAULT_BANK.high_taps_int) == 0
    # the scaled float array only carries irrational-scale roundoff
    assert abs(float(np.sum(DEFAULT_BANK.analysis_high))) < 1e-12


def test_low_pass_dc_gain_is_sqrt2():
    assert abs(float(np.sum(DEFAULT_BANK.analysis_low)) - SQRT2) < 1e-12


def test_synthesis_low_is_sign_alternated_high():
    low, high = DEFAULT_BANK.analysis_low, DEFAULT_BANK.analysis_high
    syn_low, syn_high = derive_synthesis_filters(low, high)
    for n in range(high.size):
        assert syn_low[n] == (-1.0) ** n * high[n]
    for n in range(low.size):
        assert syn_high[n] == (-1.0) ** (n + 1) * low[n]
    # alternating-sign sum of the high-pass integers is 128 -> sqrt(2) scaled
    assert abs(float(np.sum(syn_low)) - SQRT2) < 1e-12
    assert abs(float(np.sum(syn_high))) < 1e-12


def _open_chain(x, bank):
    """Analysis + synthesis with explicit convolutions (no extension)."""
    y0 = np.convolve(x, bank.analysis_low, "full")[0::2]
    y1 = np.convolve(x, bank.analysis_high, "full")[0::2]
    u0 = np.zeros(2 * y0.size)
    u0[0::2] = y0
    u1 = np.zeros(2 * y1.size)
    u1[0::2] = y1
    return (np.convolve(u0, bank.synthesis_low, "full")
            + np.convolve(u1, bank.synthesis_high, "full"))


def test_impulse_through_bank_is_delayed_impulse():
    x = np.zeros(16)
    x[3] = 1.0
    out = _open_chain(x, DEFAULT_BANK)
    # matrix/open-chain form reconstructs with a 5-sample delay, unit gain
    assert np.max(np.abs(out[5:5 + 16] - x)) < 1e-9


def test_constant_signal_reconstructs_exactly():
    x = np.full(24, 113.0)
    out = _open_chain(x, DEFAULT_BANK)
    # away from the open-chain edges the constant must come back unchanged
    assert np.max(np.abs(out[9:9 + 8] - 113.0)) < 1e-9


def test_bank_is_frozen_dataclass():
    bank = FilterBank()
    assert bank.low_taps_int == (32, 64, 32)
    assert bank.analysis_low.shape == (3,)
    assert bank.analysis_high.shape == (9,)
