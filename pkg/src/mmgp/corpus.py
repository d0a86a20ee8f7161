"""Deterministic synthetic video fixtures used by tests and benchmarks.

Three families:

* ``moving_gradient`` — smooth diagonal ramp drifting per frame; very
  wavelet-friendly, exercises the lossy path's quality end.
* ``noise_texture`` — seeded random texture scrolled per frame; nearly
  incompressible spatially, exercises the quality floor.
* ``high_redundancy`` — static background with a small moving block
  (~10% of the area); most residual samples are zero, which is the case
  the temporal + DEFLATE combination is built for.
"""

import numpy as np

from .codec.frames import VideoSequence, sequence_from_planes


def moving_gradient(frames: int = 8, size: int = 64, step: int = 8) -> VideoSequence:
    n = size
    y, x = np.mgrid[0:n, 0:n]
    planes = [(((x * 3 + y * 2) + k * step) % 256).astype(np.uint8)
              for k in range(frames)]
    return sequence_from_planes(planes)


def noise_texture(frames: int = 8, size: int = 64, seed: int = 1234) -> VideoSequence:
    rng = np.random.default_rng(seed)
    base = rng.integers(0, 256, (size, size), dtype=np.uint8)
    planes = [np.roll(base, (k, 2 * k), axis=(0, 1)) for k in range(frames)]
    return sequence_from_planes(planes)


def high_redundancy(frames: int = 8, size: int = 64) -> VideoSequence:
    """Static smooth background with one moving block covering ~10% of it."""
    y, x = np.mgrid[0:size, 0:size]
    background = ((x + y) * 255 // (2 * (size - 1))).astype(np.uint8)
    block = max(2, int(round(size * 0.32)))  # block area ~= 10% of the frame
    planes = []
    for k in range(frames):
        plane = background.copy()
        top = (3 * k) % (size - block)
        left = (5 * k) % (size - block)
        region = plane[top:top + block, left:left + block].astype(np.int16)
        plane[top:top + block, left:left + block] = \
            np.minimum(255, region + 60).astype(np.uint8)
        planes.append(plane)
    return sequence_from_planes(planes)


def acceptance_corpus():
    """The fixed pair of sequences the lossy-behaviour checks run against."""
    return [("moving_gradient", moving_gradient(8, 64)),
            ("noise_texture", noise_texture(8, 64))]
