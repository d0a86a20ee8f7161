"""mmgp: wavelet video codec, super-node discovery overlay, and
reliable-UDP transfer engine, testable on a deterministic simulated network."""

__version__ = "0.1.0"
