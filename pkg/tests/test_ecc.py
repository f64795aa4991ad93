from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, strategies as st

from robuststego.ecc import (
    EccSpec,
    FramingError,
    bits_to_bytes,
    bytes_to_bits,
    conv_encode,
    decode_text,
    ecc_decode,
    ecc_encode,
    encode_text,
    frame,
    unframe,
    viterbi_decode,
)

REP3 = EccSpec("repetition", repeat_factor=3)
CONV = EccSpec("convolutional")


def test_spec_examples():
    assert ecc_encode(REP3, [1, 0]) == [1, 1, 1, 0, 0, 0]
    assert ecc_encode(CONV, [1]) == [1, 1, 1, 0, 1, 1]
    assert ecc_encode(EccSpec(), [1, 0, 1]) == [1, 0, 1]
    assert ecc_decode(REP3, [1, 1, 0, 0, 0, 0]) == [1, 0]


def shift_register_reference(bits, gens=(0b111, 0b101), k=3):
    # taps listed as explicit delay positions: bit (k-1-d) of g taps u_{t-d}
    u = list(bits) + [0] * (k - 1)
    out = []
    for t in range(len(u)):
        for g in gens:
            acc = 0
            for d in range(k):
                if (g >> (k - 1 - d)) & 1 and t - d >= 0:
                    acc ^= u[t - d]
            out.append(acc)
    return out


@given(st.lists(st.integers(0, 1), min_size=1, max_size=40))
def test_conv_encoder_matches_register_trace(bits):
    assert conv_encode(bits) == shift_register_reference(bits)


def test_single_flip_sweep_16_bits():
    rng = random.Random(1)
    msg = [rng.randint(0, 1) for _ in range(16)]
    code = ecc_encode(CONV, msg)
    for i in range(len(code)):
        rx = list(code)
        rx[i] ^= 1
        assert ecc_decode(CONV, rx) == msg


def test_viterbi_is_minimum_distance_on_short_words():
    # brute force over every 6-bit message for arbitrary received words
    msgs = [list(m) for m in itertools.product((0, 1), repeat=6)]
    table = [conv_encode(m) for m in msgs]
    rng = random.Random(2)
    for _ in range(300):
        rx = [rng.randint(0, 1) for _ in range(len(table[0]))]
        got = viterbi_decode(rx)
        best = min(sum(a != b for a, b in zip(c, rx)) for c in table)
        assert sum(a != b for a, b in zip(conv_encode(got), rx)) == best
        ties = [m for m, c in zip(msgs, table) if sum(a != b for a, b in zip(c, rx)) == best]
        assert got == min(ties)


@pytest.mark.parametrize("spec", [EccSpec(), REP3, EccSpec("repetition", repeat_factor=5), CONV,
                                  EccSpec("convolutional", constraint_length=4, generators=(0o17, 0o13))])
def test_round_trip_random_inputs(spec):
    rng = random.Random(3)
    for _ in range(2500):
        bits = [rng.randint(0, 1) for _ in range(rng.randint(1, 24))]
        assert ecc_decode(spec, ecc_encode(spec, bits)) == bits


def test_repetition_correction_radius_exhaustive():
    for f in (3, 5):
        spec = EccSpec("repetition", repeat_factor=f)
        for block in itertools.product((0, 1), repeat=f):
            flips = sum(block)
            assert ecc_decode(spec, list(block)) == [int(flips > f // 2)]


def test_two_flips_in_one_block_breaks_only_that_bit():
    code = ecc_encode(REP3, [1, 0, 1])
    code[0] ^= 1
    code[1] ^= 1
    assert ecc_decode(REP3, code) == [0, 0, 1]


def test_framing_errors_and_specs():
    with pytest.raises(FramingError):
        ecc_decode(REP3, [1, 1])
    with pytest.raises(FramingError):
        ecc_decode(CONV, [1, 0, 1])
    with pytest.raises(FramingError):
        unframe([0] * 10)
    with pytest.raises(FramingError):
        unframe(frame([1, 0, 1])[:-1])
    with pytest.raises(FramingError):
        bits_to_bytes([1, 0])
    for bad in ({"kind": "repetition", "repeat_factor": 2}, {"kind": "hamming"},
                {"kind": "convolutional", "generators": (0o17,)}):
        with pytest.raises(ValueError):
            EccSpec(**bad)
    with pytest.raises(ValueError):
        ecc_encode(REP3, [])
    with pytest.raises(ValueError):
        ecc_encode(REP3, [2])


def test_spec_json_and_lengths():
    assert EccSpec.from_json(CONV.to_json()) == CONV
    assert len(ecc_encode(CONV, [1] * 10)) == CONV.encoded_length(10) == 24
    assert REP3.encoded_length(4) == 12


@given(st.text(max_size=30))
def test_text_framing_round_trip(s):
    assert decode_text(encode_text(s)) == s
    assert decode_text(encode_text(s) + [1, 0, 1]) == s


@given(st.binary(max_size=20))
def test_bytes_bits_round_trip(b):
    assert bits_to_bytes(bytes_to_bits(b)) == b
