import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from witnesskit.bitparity import BitMatrix, BitVec, par, parity_bit, unpar, xor
from witnesskit.rng import RandomStream


def B(s):
    return BitVec.from_str(s)


def prefix_xor_oracle(bits):
    out, acc = [], 0
    for b in bits:
        acc ^= b
        out.append(acc)
    return out


def test_string_round_trip_and_positions():
    v = B("1000")
    assert str(v) == "1000"
    assert v[0] == 1 and v[3] == 0
    assert list(B("0110")) == [0, 1, 1, 0]
    assert BitVec.from_bits([1, 0, 1]) == B("101")
    with pytest.raises(ValueError):
        B("10x")
    with pytest.raises(ValueError):
        BitVec(2, 4)


@pytest.mark.parametrize("y,x", [("0000", "0000"), ("1101", "1001"), ("1000", "1111")])
def test_par_examples(y, x):
    assert str(par(B(y))) == x


@pytest.mark.parametrize("x,y", [("0000", "0000"), ("1001", "1101"), ("1111", "1000")])
def test_unpar_examples(x, y):
    assert str(unpar(B(x))) == y


@pytest.mark.parametrize("a,b,c", [("1101", "0000", "1101"), ("1101", "1101", "0000"), ("1100", "1010", "0110")])
def test_xor_examples(a, b, c):
    assert str(xor(B(a), B(b))) == c
    assert str(B(a) ^ B(b)) == c


def test_xor_length_mismatch():
    with pytest.raises(ValueError):
        xor(B("10"), B("101"))


@pytest.mark.parametrize("v,bit", [("0000", 0), ("1101", 1), ("1111", 0)])
def test_parity_bit_examples(v, bit):
    assert parity_bit(B(v)) == bit


def test_parity_bit_empty():
    with pytest.raises(ValueError):
        parity_bit(BitVec(0))


@given(st.lists(st.integers(0, 1), min_size=1, max_size=200))
def test_par_matches_prefix_oracle(bits):
    assert list(par(BitVec.from_bits(bits))) == prefix_xor_oracle(bits)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=200))
def test_parity_bit_is_weight_mod_2(bits):
    assert parity_bit(BitVec.from_bits(bits)) == sum(bits) % 2


def test_round_trip_exhaustive_small():
    for m in range(1, 13):
        for w in range(1 << m):
            v = BitVec(m, w)
            assert unpar(par(v)) == v and par(unpar(v)) == v


def test_round_trip_random_long():
    rng = RandomStream(5)
    for m in (1, 2, 63, 64, 65, 1000, 4096):
        for _ in range(3):
            v = BitVec.random(m, rng)
            assert unpar(par(v)) == v and par(unpar(v)) == v


def test_linearity_exhaustive_m6():
    m = 6
    for b, c in itertools.product(range(1 << m), repeat=2):
        vb, vc = BitVec(m, b), BitVec(m, c)
        assert par(vb ^ vc) == par(vb) ^ par(vc)


def test_unpar_locality():
    # output bit i reacts only to input bits i-1 and i
    m = 8
    for w in range(1 << m):
        x = BitVec(m, w)
        base = unpar(x)
        for j in range(m):
            flipped = unpar(BitVec(m, w ^ (1 << j)))
            changed = {i for i in range(m) if flipped[i] != base[i]}
            assert changed <= {j, j + 1}


def test_unpar_bijection_count():
    for m in range(1, 11):
        assert len({unpar(BitVec(m, w)) for w in range(1 << m)}) == 1 << m


def test_random_bitvec_uses_stream_order():
    rng = RandomStream(1)
    first = rng.randbits(10)
    v = BitVec.random(10, RandomStream(1))
    assert str(v) == format(first, "010b")


def test_bitmatrix():
    M = BitMatrix.from_strs(["01", "11"])
    assert M.is_square and M.width == 2 and len(M) == 2
    assert str(M) == "01\n11"
    assert M[1] == B("11")
    with pytest.raises(ValueError):
        BitMatrix((B("01"), B("110")))
