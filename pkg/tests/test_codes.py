import itertools

import numpy as np
import pytest

from intht.codes import DecodedVotes, binarify, build_code, decode, majority_filter
from intht.errors import ConfigError


def test_plain_binary_p4():
    t = build_code(4)
    assert t.l == 2
    assert t.E.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_repetition3_p4():
    t = build_code(4, "repetition-3")
    assert t.l == 6
    assert t.E[2].tolist() == [1, 1, 1, 0, 0, 0]


def test_p200_rows_distinct():
    t = build_code(200)
    assert t.l == 8
    assert len({tuple(r) for r in t.E}) == 200


def test_build_code_rejects_small_p():
    with pytest.raises(ConfigError):
        build_code(1)
    with pytest.raises(ConfigError):
        build_code(8, "expander")


def test_binarify_rules():
    delta = 2.0
    assert not binarify(np.zeros((4, 3)), delta).any()
    S = np.array([[-delta], [delta / 2], [0.9 * delta]])
    assert binarify(S, delta)[0].tolist() == [True, False, True]
    assert binarify(np.zeros((6, 5)), delta).shape == (5, 6)


def test_decode_roundtrip_noiseless():
    t = build_code(16)
    o = np.concatenate([t.encode(5), t.encode(9)])
    assert decode(o, t) == (5, 9)


@pytest.mark.parametrize("scheme", ["plain-binary", "repetition-3"])
def test_roundtrip_all_pairs(scheme):
    t = build_code(13, scheme)
    for i, j in itertools.product(range(13), repeat=2):
        assert decode(np.concatenate([t.encode(i), t.encode(j)]), t) == (i, j)


def test_roundtrip_order3():
    t = build_code(5)
    o = np.concatenate([t.encode(1), t.encode(4), t.encode(2)])
    assert decode(o, t, parts=3) == (1, 4, 2)


def test_repetition3_single_flip_each_bit():
    t = build_code(10, "repetition-3")
    o = np.concatenate([t.encode(3), t.encode(7)])
    for bit in range(o.size):
        flipped = o.copy()
        flipped[bit] ^= 1
        assert decode(flipped, t) == (3, 7)


def test_repetition3_correction_radius_exhaustive():
    # one flip per logical bit, every combination of flip positions, p <= 32
    p = 32
    t = build_code(p, "repetition-3")
    nbits = t.bits
    for i in (0, 5, 21, 31):
        word = t.encode(i)
        for pos in itertools.product(range(4), repeat=nbits):
            noisy = word.copy()
            for g, r in enumerate(pos):
                if r < 3:
                    noisy[3 * g + r] ^= 1
            assert decode(np.concatenate([noisy, t.encode(0)]), t) == (i, 0)


def test_plain_binary_flip_gives_other_valid_index():
    t = build_code(16)
    o = np.concatenate([t.encode(5), t.encode(9)])
    o[0] ^= 1
    out = decode(o, t)
    assert out is not None and out != (5, 9)


def test_plain_binary_out_of_range_codeword():
    t = build_code(5)  # l = 3, codewords 5..7 unused
    assert decode(np.array([1, 1, 1, 0, 0, 0]), t) is None


def test_repetition_even_tie_returns_none():
    t = build_code(4, "repetition-2")
    o = np.array([1, 0, 0, 0, 0, 0, 0, 0])
    assert decode(o, t) is None


def test_decode_length_check():
    with pytest.raises(ConfigError):
        decode(np.zeros(3, dtype=int), build_code(4))


def test_majority_filter():
    v = DecodedVotes(d=3)
    v.counts.update({(0, 1): 2, (2, 2): 1})
    assert majority_filter(v) == {(0, 1)}
    single = DecodedVotes(d=1)
    single.add_repetition([(1, 1), (3, 0), (1, 1)])
    assert majority_filter(single) == {(1, 1), (3, 0)}
    assert single.counts[(1, 1)] == 1
