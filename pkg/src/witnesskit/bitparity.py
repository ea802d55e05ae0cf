"""Fixed-length GF(2) vectors, prefix parity and its inverse.

Position 0 is the leftmost character of a string literal: ``BitVec.from_str("1000")``
has bit 0 set. Internally bit ``i`` lives at ``1 << i`` of an int, which
is an implementation detail; every method is defined positionally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence


@dataclass(frozen=True)
class BitVec:
    length: int
    word: int = 0

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if self.word < 0 or self.word >> self.length:
            raise ValueError(f"word {self.word} does not fit in {self.length} bits")

    @classmethod
    def from_str(cls, s: str) -> "BitVec":
        word = 0
        for i, ch in enumerate(s):
            if ch == "1":
                word |= 1 << i
            elif ch != "0":
                raise ValueError(f"bad bit character {ch!r}")
        return cls(len(s), word)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitVec":
        bits = list(bits)
        word = 0
        for i, b in enumerate(bits):
            if b not in (0, 1):
                raise ValueError(f"bad bit {b!r}")
            word |= b << i
        return cls(len(bits), word)

    @classmethod
    def zeros(cls, length: int) -> "BitVec":
        return cls(length, 0)

    @classmethod
    def random(cls, length: int, rng) -> "BitVec":
        # first drawn bit (the most significant) goes to position 0
        v = rng.randbits(length)
        return cls(length, int(format(v, f"0{length}b")[::-1], 2) if length else 0)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.word >> i) & 1

    def __iter__(self) -> Iterator[int]:
        return (self[i] for i in range(self.length))

    def __xor__(self, other: "BitVec") -> "BitVec":
        return xor(self, other)

    def __str__(self) -> str:
        return "".join("1" if (self.word >> i) & 1 else "0" for i in range(self.length))

    def weight(self) -> int:
        return bin(self.word).count("1")


def _mask(length: int) -> int:
    return (1 << length) - 1


def par(y: BitVec) -> BitVec:
    """Prefix parity: bit i of the result is y(0) xor ... xor y(i)."""
    x, shift = y.word, 1
    while shift < y.length:
        x ^= x << shift
        shift <<= 1
    return BitVec(y.length, x & _mask(y.length))


def unpar(x: BitVec) -> BitVec:
    """Inverse of :func:`par`; output bit i reads only input bits i-1 and i."""
    return BitVec(x.length, (x.word ^ (x.word << 1)) & _mask(x.length))


def xor(a: BitVec, b: BitVec) -> BitVec:
    if a.length != b.length:
        raise ValueError(f"length mismatch: {a.length} vs {b.length}")
    return BitVec(a.length, a.word ^ b.word)


def parity_bit(v: BitVec) -> int:
    """Total parity, i.e. the last bit of ``par(v)``."""
    if v.length == 0:
        raise ValueError("parity of an empty vector is undefined here")
    return par(v)[v.length - 1]


@dataclass(frozen=True)
class BitMatrix:
    """Row-major matrix of equal-length bit vectors; ``M[i]`` is row i."""

    rows: tuple[BitVec, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        widths = {r.length for r in self.rows}
        if len(widths) > 1:
            raise ValueError(f"rows have differing lengths {sorted(widths)}")

    @classmethod
    def from_strs(cls, rows: Sequence[str]) -> "BitMatrix":
        return cls(tuple(BitVec.from_str(r) for r in rows))

    @property
    def width(self) -> int:
        return self.rows[0].length if self.rows else 0

    @property
    def is_square(self) -> bool:
        return len(self.rows) == self.width

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, i: int) -> BitVec:
        return self.rows[i]

    def __iter__(self) -> Iterator[BitVec]:
        return iter(self.rows)

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.rows)
