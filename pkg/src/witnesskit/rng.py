"""Counter-mode random streams.

Every random choice in witnesskit comes from a :class:`RandomStream`, a
SHA-256 counter-mode generator. The construction is fixed here rather
than borrowed from a platform PRNG so that reports are reproducible
bit-for-bit from the master seed alone:

* trial seed: ``SHA256(b"witnesskit/trial" || master_seed (8 bytes BE) || ordinal (8 bytes BE))``
* stream block j: ``SHA256(b"witnesskit/stream" || seed || j (8 bytes BE))``,
  blocks concatenated, bytes consumed left to right and never reused.
* ``randbits(k)``: take ``ceil(k/8)`` fresh bytes as a big-endian integer
  and drop the ``8*ceil(k/8) - k`` low-order bits.
* ``randbelow(n)``: draw ``randbits((n-1).bit_length())`` until the value
  is ``< n`` (rejection sampling, so the result is exactly uniform).
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def derive_trial_seed(master_seed: int, ordinal: int) -> bytes:
    """Seed for trial number ``ordinal``; depends only on its two arguments."""
    if not 0 <= ordinal <= _MASK64:
        raise ValueError(f"ordinal out of range: {ordinal}")
    return hashlib.sha256(
        b"witnesskit/trial"
        + (master_seed & _MASK64).to_bytes(8, "big")
        + ordinal.to_bytes(8, "big")
    ).digest()


class RandomStream:
    """Deterministic byte stream with uniform integer helpers."""

    def __init__(self, seed: bytes | int):
        if isinstance(seed, int):
            seed = (seed & _MASK64).to_bytes(8, "big")
        self._seed = bytes(seed)
        self._counter = 0
        self._buf = b""

    @classmethod
    def for_trial(cls, master_seed: int, ordinal: int) -> "RandomStream":
        return cls(derive_trial_seed(master_seed, ordinal))

    def randbytes(self, count: int) -> bytes:
        while len(self._buf) < count:
            block = hashlib.sha256(
                b"witnesskit/stream" + self._seed + self._counter.to_bytes(8, "big")
            ).digest()
            self._counter += 1
            self._buf += block
        out, self._buf = self._buf[:count], self._buf[count:]
        return out

    def randbits(self, k: int) -> int:
        if k < 0:
            raise ValueError("number of bits must be non-negative")
        if k == 0:
            return 0
        nbytes = (k + 7) // 8
        value = int.from_bytes(self.randbytes(nbytes), "big")
        return value >> (8 * nbytes - k)

    def randbelow(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("upper bound must be positive")
        if n == 1:
            return 0
        k = (n - 1).bit_length()
        while True:
            v = self.randbits(k)
            if v < n:
                return v

    def randrange(self, lo: int, hi: int) -> int:
        """Uniform integer in ``[lo, hi)``."""
        return lo + self.randbelow(hi - lo)
