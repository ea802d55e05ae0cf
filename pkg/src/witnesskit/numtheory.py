"""Modular arithmetic for the Rabin reduction.

Everything here works on Python ints (arbitrary precision) and is pure.
The centerpiece is :func:`four_roots`: for ``n = p*q`` and a unit ``c``
that is a square mod both primes, the four square roots of ``c`` are the
CRT combinations of ``(+-x_p, +-x_q)``. Two roots that agree mod exactly
one prime expose that prime through a gcd (:func:`factor_from_roots`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .errors import FactorLeak, NonResidue
from .rng import RandomStream

TRIAL_DIVISION_LIMIT = 1 << 16
DEFAULT_MR_ROUNDS = 32


def _small_primes(limit: int) -> list[int]:
    sieve = bytearray([1]) * (limit + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, math.isqrt(limit) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(sieve[i * i :: i]))
    return [i for i, flag in enumerate(sieve) if flag]


# primes up to sqrt(2^16) decide every n < 2^16 by trial division
_SMALL_PRIMES = _small_primes(256)


def mod_pow(base: int, exp: int, modulus: int) -> int:
    if modulus < 1:
        raise ValueError("modulus must be >= 1")
    if exp < 0:
        raise ValueError("exponent must be non-negative")
    return pow(base, exp, modulus)


def gcd(a: int, b: int) -> int:
    return math.gcd(a, b)


def _miller_rabin_round(n: int, a: int, d: int, s: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_probable_prime(n: int, rounds: int = DEFAULT_MR_ROUNDS, rng: Optional[RandomStream] = None) -> bool:
    """Primality test: exact below 2^16, Miller-Rabin above.

    Composites above 2^16 survive with probability at most ``4**-rounds``.
    Without an explicit ``rng`` the witnesses are drawn from a stream
    seeded by ``n`` itself, so the answer for a given ``n`` never changes
    between runs.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    if n < TRIAL_DIVISION_LIMIT:
        return True

    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if rng is None:
        rng = RandomStream(b"witnesskit/mr" + n.to_bytes((n.bit_length() + 7) // 8, "big"))
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        if not _miller_rabin_round(n, a, d, s):
            return False
    return True


def random_odd_prime(bits: int, rng: RandomStream) -> int:
    """Uniformly sampled candidate with the top bit set, rejected until prime."""
    if bits < 3:
        raise ValueError("need at least 3 bits for an odd prime")
    top = 1 << (bits - 1)
    while True:
        candidate = rng.randbits(bits) | top | 1
        if is_probable_prime(candidate):
            return candidate


def legendre(c: int, p: int) -> int:
    """Euler's criterion: 1, -1 or 0."""
    ls = pow(c, (p - 1) // 2, p)
    return -1 if ls == p - 1 else ls


def sqrt_mod_prime(c: int, p: int) -> int:
    """Tonelli-Shanks. Returns the smaller of the two roots."""
    c %= p
    if c == 0:
        return 0
    if p == 2:
        return c
    if legendre(c, p) != 1:
        raise NonResidue(c, p)

    if p % 4 == 3:
        r = pow(c, (p + 1) // 4, p)
    else:
        q, s = p - 1, 0
        while q % 2 == 0:
            q //= 2
            s += 1
        z = 2
        while legendre(z, p) != -1:
            z += 1
        m, cc, t, r = s, pow(z, q, p), pow(c, q, p), pow(c, (q + 1) // 2, p)
        while t != 1:
            i, t2 = 0, t
            while t2 != 1:
                t2 = t2 * t2 % p
                i += 1
            b = pow(cc, 1 << (m - i - 1), p)
            m, cc = i, b * b % p
            t, r = t * cc % p, r * b % p
    return min(r, p - r)


def crt_combine(a_p: int, p: int, a_q: int, q: int) -> int:
    """The unique x in [0, p*q) with x = a_p (mod p) and x = a_q (mod q)."""
    if math.gcd(p, q) != 1:
        raise ValueError(f"moduli {p} and {q} are not coprime")
    inv = pow(p, -1, q)
    return (a_p + p * ((a_q - a_p) * inv % q)) % (p * q)


@dataclass(frozen=True)
class RabinModulus:
    """``n = p*q`` for distinct odd primes. Only ``n`` is public."""

    p: int = field(repr=False)
    q: int = field(repr=False)

    def __post_init__(self):
        if self.p == self.q:
            raise ValueError("p and q must be distinct")
        for prime in (self.p, self.q):
            if prime % 2 == 0 or not is_probable_prime(prime):
                raise ValueError(f"{prime} is not an odd prime")

    @property
    def n(self) -> int:
        return self.p * self.q

    @property
    def bits(self) -> int:
        return self.n.bit_length()

    @classmethod
    def generate(cls, prime_bits: int, rng: RandomStream) -> "RabinModulus":
        p = random_odd_prime(prime_bits, rng)
        while True:
            q = random_odd_prime(prime_bits, rng)
            if q != p:
                return cls(p, q)

    def __repr__(self):
        return f"RabinModulus(n={self.n})"


@dataclass(frozen=True)
class RootQuad:
    """The four square roots of a unit mod n, ascending."""

    roots: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.roots) != 4 or len(set(self.roots)) != 4:
            raise ValueError(f"expected four distinct roots, got {self.roots}")
        if list(self.roots) != sorted(self.roots):
            raise ValueError("roots must be in ascending order")

    def __iter__(self) -> Iterator[int]:
        return iter(self.roots)

    def __contains__(self, x) -> bool:
        return x in self.roots

    def __getitem__(self, i: int) -> int:
        return self.roots[i]

    def __len__(self) -> int:
        return 4

    @property
    def canonical(self) -> int:
        return self.roots[0]


def four_roots(c: int, m: RabinModulus) -> RootQuad:
    p, q, n = m.p, m.q, m.n
    c %= n
    g = math.gcd(c, n)
    if g > 1:
        raise FactorLeak(g, n)
    xp = sqrt_mod_prime(c, p)
    xq = sqrt_mod_prime(c, q)
    roots = sorted(
        crt_combine(sp, p, sq, q)
        for sp in (xp, p - xp)
        for sq in (xq, q - xq)
    )
    return RootQuad(tuple(roots))


def factor_from_roots(r1: int, r2: int, n: int) -> Optional[int]:
    """Nontrivial factor of n from two square roots of the same value, if any."""
    g = math.gcd((r1 - r2) % n, n)
    if 1 < g < n:
        return g
    return None
