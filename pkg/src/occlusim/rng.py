"""Seeded integer generator used for every random choice in the package.

The generator is SplitMix64 (Steele, Lea & Flood, 2014) with its reference
constants. It is small enough to reimplement anywhere, so a dataset built
here can be rebuilt bit-for-bit by other tooling given the same seed.
"""
import hashlib

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z):
    """SplitMix64 output finalizer."""
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next_u64(self):
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def below(self, n):
        """Uniform integer in [0, n) without modulo bias (rejection sampling)."""
        if n <= 0:
            raise ValueError("n must be positive")
        # values below `threshold` would over-represent small residues
        threshold = (1 << 64) % n
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % n


def derive_seed(seed, key):
    """Sub-seed for one job item, independent of which other items run.

    blake2b-64 over the 8-byte little-endian job seed followed by the UTF-8 key.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update((int(seed) & MASK64).to_bytes(8, "little"))
    h.update(str(key).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")
