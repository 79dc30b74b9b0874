"""Counter-based random streams.

Built on numpy's Philox bit generator, which is itself counter-based: the
same (seed, counter) pair produces the same draws on every platform and
numpy version. Streams can be split into independent child streams by name,
which is how per-adapter-site initialisation and per-run dropout noise stay
reproducible no matter what else draws randomness in between.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _derive_seed(seed: int, tag: str) -> int:
    """Mix a parent seed and a text tag into a new 64-bit seed."""
    h = hashlib.sha256(f"{seed & _MASK64}:{tag}".encode()).digest()
    return int.from_bytes(h[:8], "little")


class RngStream:
    """A deterministic stream identified by (seed, counter).

    Every draw consumes one counter block, so replaying a stream from the
    same starting state reproduces the exact same sequence of arrays.
    """

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & _MASK64
        self.counter = int(counter)

    def _next_generator(self) -> np.random.Generator:
        # Each draw gets its own 2^128-block region of the Philox counter
        # space, so draws of any size never overlap.
        bg = np.random.Philox(key=self.seed, counter=self.counter << 128)
        self.counter += 1
        return np.random.Generator(bg)

    def uniform(self, shape=()) -> np.ndarray:
        return self._next_generator().random(shape, dtype=np.float64)

    def normal(self, shape=(), std: float = 1.0) -> np.ndarray:
        return self._next_generator().standard_normal(shape, dtype=np.float64) * std

    def integers(self, low: int, high: int, shape=()) -> np.ndarray:
        return self._next_generator().integers(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._next_generator().permutation(n)

    def child(self, tag: str) -> "RngStream":
        """Derive an independent stream named by `tag`."""
        return RngStream(_derive_seed(self.seed, tag))

    def clone(self) -> "RngStream":
        return RngStream(self.seed, self.counter)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, counter={self.counter})"
