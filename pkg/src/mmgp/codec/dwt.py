"""Forward/inverse wavelet transforms, 1-D and separable 2-D.

The 1-D transform is implemented with the lifting scheme.  Factoring the
polyphase matrix of the 3/9 tap pair (its determinant is exactly 1) gives
two lifting steps plus a scaling:

    update :  e'[i] = e[i] + (o[i] + o[i-1]) / 2
    predict:  o'[i] = o[i] + (3*(e'[i-1] + e'[i+2]) - 19*(e'[i] + e'[i+1])) / 64
    scale  :  approx = e' / sqrt(2),  detail = o' * sqrt(2)

where e/o are the even/odd samples.  Out-of-range neighbours are mirrored
per step; the mirror rules below are exactly those induced by whole-sample
symmetric extension of the input signal, so the lifting output equals
direct convolution + downsampling of the symmetrically extended signal
(the test suite checks this against an independent convolution oracle).
Low-pass outputs sit on even sample positions, high-pass on odd ones,
which is what assigns the extra sample of odd-length signals to the
approximation band.

Both lifting steps are trivially invertible, so reconstruction is exact
to floating-point roundoff for every length >= 2, odd or even.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import CorruptDataError, InvalidInputError
from .filterbank import DEFAULT_BANK, HIGH_TAPS_INT, LOW_TAPS_INT, FilterBank

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2 = 1.0 / _SQRT2


@dataclass
class SubbandPyramid:
    """Multi-level 2-D subband layout: one LL plane plus per-level details.

    ``details`` is ordered coarsest level first; each entry is an
    (HL, LH, HH) triple where HL is high-pass along rows / low-pass along
    columns, LH the converse, HH high-pass in both directions.
    """

    levels: int
    ll: np.ndarray
    details: list  # [(hl, lh, hh), ...] coarsest first

    def total_coefficients(self) -> int:
        return self.ll.size + sum(hl.size + lh.size + hh.size
                                  for hl, lh, hh in self.details)


def _require_default_bank(bank: FilterBank) -> None:
    # The lifting factorization is specific to the built-in tap pair.
    if (tuple(bank.low_taps_int) != LOW_TAPS_INT
            or tuple(bank.high_taps_int) != HIGH_TAPS_INT):
        raise InvalidInputError("only the built-in 3/9 filter bank is supported")


def _fold(i: int, length: int, left_ws: bool, right_ws: bool) -> int:
    """Mirror an out-of-range index back into [0, length).

    ``left_ws``/``right_ws`` select whole-sample (reflect about the edge
    sample) versus half-sample (reflect between samples) behaviour per
    side; which applies follows from the parity of the original signal.
    """
    if length == 1:
        return 0
    while not 0 <= i < length:
        if i < 0:
            i = -i if left_ws else -i - 1
        else:
            i = 2 * length - 2 - i if right_ws else 2 * length - 1 - i
    return i


def _take(arr: np.ndarray, first: int, last: int, left_ws: bool, right_ws: bool):
    """Gather arr[..., first:last+1] with mirrored out-of-range indices."""
    length = arr.shape[-1]
    idx = [_fold(i, length, left_ws, right_ws) for i in range(first, last + 1)]
    return np.take(arr, idx, axis=-1)


def _forward_axis(x: np.ndarray):
    """Lifting forward transform along the last axis; returns (approx, detail)."""
    n = x.shape[-1]
    odd = n % 2 == 1
    xe = np.ascontiguousarray(x[..., 0::2], dtype=np.float64)
    xo = np.ascontiguousarray(x[..., 1::2], dtype=np.float64)
    ne = xe.shape[-1]
    no = xo.shape[-1]
    # Odd samples: half-sample symmetric on the left; on the right the
    # extension is whole-sample for even n, half-sample for odd n.
    xo_ext = _take(xo, -1, ne - 1, left_ws=False, right_ws=not odd)
    xep = xe + 0.5 * (xo_ext[..., 1:] + xo_ext[..., :-1])
    # Updated evens: whole-sample on the left; reversed parity rule on the right.
    e = _take(xep, -1, no + 1, left_ws=True, right_ws=odd)
    xop = xo + (3.0 * (e[..., : no] + e[..., 3: no + 3])
                - 19.0 * (e[..., 1: no + 1] + e[..., 2: no + 2])) / 64.0
    return xep * _INV_SQRT2, xop * _SQRT2


def _inverse_axis(approx: np.ndarray, detail: np.ndarray) -> np.ndarray:
    """Invert :func:`_forward_axis` along the last axis."""
    ne = approx.shape[-1]
    no = detail.shape[-1]
    n = ne + no
    odd = n % 2 == 1
    xep = np.asarray(approx, dtype=np.float64) * _SQRT2
    xop = np.asarray(detail, dtype=np.float64) * _INV_SQRT2
    e = _take(xep, -1, no + 1, left_ws=True, right_ws=odd)
    xo = xop - (3.0 * (e[..., : no] + e[..., 3: no + 3])
                - 19.0 * (e[..., 1: no + 1] + e[..., 2: no + 2])) / 64.0
    xo_ext = _take(xo, -1, ne - 1, left_ws=False, right_ws=not odd)
    xe = xep - 0.5 * (xo_ext[..., 1:] + xo_ext[..., :-1])
    out = np.empty(approx.shape[:-1] + (n,), dtype=np.float64)
    out[..., 0::2] = xe
    out[..., 1::2] = xo
    return out


def dwt1d_forward(signal, bank: FilterBank = DEFAULT_BANK):
    """Split a 1-D signal into (approx, detail) of lengths ceil(n/2), floor(n/2)."""
    _require_default_bank(bank)
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("signal must be one-dimensional")
    if x.shape[0] < 2:
        raise InvalidInputError("signal length must be at least 2")
    return _forward_axis(x)


def dwt1d_inverse(approx, detail, bank: FilterBank = DEFAULT_BANK):
    """Reconstruct the signal split by :func:`dwt1d_forward`."""
    _require_default_bank(bank)
    a = np.asarray(approx, dtype=np.float64)
    d = np.asarray(detail, dtype=np.float64)
    if a.ndim != 1 or d.ndim != 1:
        raise InvalidInputError("subbands must be one-dimensional")
    if a.shape[0] - d.shape[0] not in (0, 1) or a.shape[0] + d.shape[0] < 2:
        raise InvalidInputError(
            f"inconsistent subband lengths {a.shape[0]}/{d.shape[0]}")
    return _inverse_axis(a, d)


def max_feasible_levels(height: int, width: int) -> int:
    """Deepest decomposition where every level still sees dims >= 2."""
    levels = 0
    h, w = height, width
    while min(h, w) >= 2:
        levels += 1
        h = (h + 1) // 2
        w = (w + 1) // 2
    return levels


def subband_shapes(height: int, width: int, levels: int):
    """Subband dimensions for a given plane size and depth.

    Returns (ll_shape, details_shapes) with details ordered coarsest first,
    matching :class:`SubbandPyramid`.
    """
    shapes = []
    h, w = height, width
    for _ in range(levels):
        ha, hd = (h + 1) // 2, h // 2
        wa, wd = (w + 1) // 2, w // 2
        shapes.append(((ha, wd), (hd, wa), (hd, wd)))  # HL, LH, HH
        h, w = ha, wa
    shapes.reverse()
    return (h, w), shapes


def dwt2d_forward(plane, levels: int, bank: FilterBank = DEFAULT_BANK) -> SubbandPyramid:
    """Separable 2-D transform: rows then columns per level, recursing on LL."""
    _require_default_bank(bank)
    p = np.asarray(plane, dtype=np.float64)
    if p.ndim != 2:
        raise InvalidInputError("plane must be two-dimensional")
    if levels < 1:
        raise InvalidInputError("levels must be >= 1")
    feasible = max_feasible_levels(p.shape[0], p.shape[1])
    if levels > feasible:
        raise InvalidInputError(
            f"levels={levels} too deep for {p.shape[0]}x{p.shape[1]} plane; "
            f"maximum feasible depth is {feasible}")
    details = []
    cur = p
    for _ in range(levels):
        row_a, row_d = _forward_axis(cur)
        ll_t, lh_t = _forward_axis(row_a.T)
        hl_t, hh_t = _forward_axis(row_d.T)
        details.append((hl_t.T, lh_t.T, hh_t.T))
        cur = ll_t.T
    details.reverse()
    return SubbandPyramid(levels=levels, ll=cur, details=details)


def dwt2d_inverse(pyramid: SubbandPyramid, bank: FilterBank = DEFAULT_BANK) -> np.ndarray:
    """Invert :func:`dwt2d_forward`; raises CorruptDataError on malformed input."""
    _require_default_bank(bank)
    if pyramid.levels != len(pyramid.details) or pyramid.levels < 1:
        raise CorruptDataError("pyramid level count does not match detail planes")
    cur = np.asarray(pyramid.ll, dtype=np.float64)
    for hl, lh, hh in pyramid.details:
        hl = np.asarray(hl, dtype=np.float64)
        lh = np.asarray(lh, dtype=np.float64)
        hh = np.asarray(hh, dtype=np.float64)
        if (hl.shape[0] != cur.shape[0] or hh.shape[0] != lh.shape[0]
                or lh.shape[1] != cur.shape[1] or hh.shape[1] != hl.shape[1]
                or cur.shape[0] - lh.shape[0] not in (0, 1)
                or cur.shape[1] - hl.shape[1] not in (0, 1)):
            raise CorruptDataError(
                f"malformed pyramid: subband shapes {cur.shape}/{hl.shape}/"
                f"{lh.shape}/{hh.shape} are inconsistent")
        col_a = _inverse_axis(cur.T, lh.T).T
        col_d = _inverse_axis(hl.T, hh.T).T
        cur = _inverse_axis(col_a, col_d)
    return cur
