"""Two-channel biorthogonal filter bank used by the spatial transform.

The analysis pair is a 3-tap low-pass and a 9-tap high-pass, both
symmetric, sharing the common scale factor 2^(-13/2):

    low :  {32, 64, 32}                             * 2^(-13/2)
    high:  {3, 6, -16, -38, 90, -38, -16, 6, 3}     * 2^(-13/2)

The unscaled taps are integers, which keeps two properties exact:
the high-pass taps sum to 0 (so constant signals produce zero detail)
and the low-pass taps sum to 128, i.e. sqrt(2) after scaling.  The
float tap arrays are derived from the integers on construction; their
sums carry only ~1e-17 of roundoff.

The synthesis pair is the standard alias-cancelling complement
(synthesis_low[n] = (-1)^n * analysis_high[n], synthesis_high[n] =
(-1)^(n+1) * analysis_low[n]); the resulting bank reconstructs exactly
(a 5-sample delay in open-chain form), which the test suite verifies
numerically rather than assuming.
"""

from dataclasses import dataclass, field

import numpy as np

# 2^(-13/2): common scale shared by both analysis filters.
TAP_SCALE = 2.0 ** -6.5

LOW_TAPS_INT = (32, 64, 32)
HIGH_TAPS_INT = (3, 6, -16, -38, 90, -38, -16, 6, 3)


@dataclass(frozen=True)
class FilterBank:
    """Analysis/synthesis tap arrays; integer taps are the source of truth."""

    low_taps_int: tuple = LOW_TAPS_INT
    high_taps_int: tuple = HIGH_TAPS_INT
    scale: float = TAP_SCALE
    analysis_low: np.ndarray = field(init=False, repr=False)
    analysis_high: np.ndarray = field(init=False, repr=False)
    synthesis_low: np.ndarray = field(init=False, repr=False)
    synthesis_high: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        low = np.array(self.low_taps_int, dtype=np.float64) * self.scale
        high = np.array(self.high_taps_int, dtype=np.float64) * self.scale
        syn_low, syn_high = derive_synthesis_filters(low, high)
        object.__setattr__(self, "analysis_low", low)
        object.__setattr__(self, "analysis_high", high)
        object.__setattr__(self, "synthesis_low", syn_low)
        object.__setattr__(self, "synthesis_high", syn_high)


def derive_synthesis_filters(analysis_low, analysis_high):
    """Return (synthesis_low, synthesis_high) for a two-channel bank.

    Alias cancellation fixes the synthesis filters up to sign/delay:
    the low-pass reconstruction filter is the sign-alternated high-pass
    analysis filter and vice versa (with the opposite sign phase).
    """
    analysis_low = np.asarray(analysis_low, dtype=np.float64)
    analysis_high = np.asarray(analysis_high, dtype=np.float64)
    n_high = np.arange(analysis_high.size)
    n_low = np.arange(analysis_low.size)
    synthesis_low = np.where(n_high % 2 == 0, 1.0, -1.0) * analysis_high
    synthesis_high = np.where(n_low % 2 == 0, -1.0, 1.0) * analysis_low
    return synthesis_low, synthesis_high


DEFAULT_BANK = FilterBank()
