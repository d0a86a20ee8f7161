"""SplitMix64: small, fast, and splittable.

Every link and every node gets its own stream, so adding one more link
to a topology never perturbs the draws any existing stream makes.
"""

from .hashing import fnv1a64

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return self.next_u64() / 2.0 ** 64

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange needs n > 0")
        return self.next_u64() % n

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def sample(self, seq, k: int):
        """First k elements of a partial Fisher-Yates shuffle of seq."""
        items = list(seq)
        k = min(k, len(items))
        for i in range(k):
            j = i + self.randrange(len(items) - i)
            items[i], items[j] = items[j], items[i]
        return items[:k]

    def split(self, label) -> "SplitMix64":
        """Independent child stream identified by a stable label."""
        if not isinstance(label, int):
            label = fnv1a64(str(label))
        return SplitMix64(self.next_u64() ^ label)


def derive_seed(master: int, label: str) -> int:
    """Stable per-entity seed that does not consume master-stream draws."""
    return (master ^ fnv1a64(label)) & _MASK64
