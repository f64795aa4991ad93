from __future__ import annotations

import hashlib
import hmac
import math

import numpy as np
import pytest

from robuststego.prf import PrfContext, build_cgram, prf_label_vector, prf_select_index

KEY = b"k" * 32
SALT = (0).to_bytes(8, "big")


def reference_labels(key: bytes, salt: bytes, cgram: tuple[int, ...], n: int) -> list[int]:
    """Independent bit-string rendering of the documented counter-mode layout."""
    bits = ""
    block = 0
    while len(bits) < n:
        msg = b"\x01" + salt + b"".join(t.to_bytes(4, "big") for t in cgram) + block.to_bytes(4, "big")
        digest = hmac.new(key, msg, hashlib.sha256).digest()
        bits += "".join(format(byte, "08b") for byte in digest)
        block += 1
    return [int(b) for b in bits[:n]]


@pytest.mark.parametrize("n", [1, 7, 64, 256, 257, 1000])
def test_label_layout_matches_reference(n):
    ctx = PrfContext(SALT, (5, 17, 3))
    assert prf_label_vector(KEY, ctx, n).tolist() == reference_labels(KEY, SALT, (5, 17, 3), n)


def test_labels_deterministic():
    ctx = PrfContext(SALT, (1, 2, 3))
    assert np.array_equal(prf_label_vector(KEY, ctx, 64), prf_label_vector(KEY, ctx, 64))


def test_label_bias():
    rng = np.random.default_rng(0)
    n = 64
    ones = 0
    for _ in range(10_000):
        ctx = PrfContext(SALT, tuple(int(t) for t in rng.integers(0, 1000, 3)))
        ones += int(prf_label_vector(KEY, ctx, n).sum())
    frac = ones / (10_000 * n)
    assert 0.49 <= frac <= 0.51
    assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / (10_000 * n))


def test_salt_changes_labels():
    n = 1024
    a = prf_label_vector(KEY, PrfContext(SALT, (1, 2, 3)), n)
    b = prf_label_vector(KEY, PrfContext((1).to_bytes(8, "big"), (1, 2, 3)), n)
    d = int((a != b).sum())
    assert abs(d - n / 2) <= 4 * math.sqrt(n / 4)


def test_distinct_keys_uncorrelated():
    n = 1024
    ctx = PrfContext(SALT, (9, 9, 9))
    a = prf_label_vector(b"a" * 32, ctx, n)
    b = prf_label_vector(b"b" * 32, ctx, n)
    assert abs(int((a == b).sum()) - n / 2) <= 4 * math.sqrt(n / 4)


def test_selector_basic():
    assert all(prf_select_index(KEY, j, 1) == 0 for j in range(1, 50))
    assert prf_select_index(KEY, 7, 5) == prf_select_index(KEY, 7, 5)
    digest = hmac.new(KEY, b"\x02" + (7).to_bytes(8, "big"), hashlib.sha256).digest()
    assert prf_select_index(KEY, 7, 5) == int.from_bytes(digest[:8], "big") % 5
    with pytest.raises(ValueError):
        prf_select_index(KEY, 1, 0)


def test_selector_uniform():
    counts = np.bincount([prf_select_index(KEY, j, 3) for j in range(1, 30_001)], minlength=3)
    sigma = math.sqrt(30_000 * (1 / 3) * (2 / 3))
    assert all(abs(c - 10_000) <= 4 * sigma for c in counts)


def test_cgram_padding():
    assert build_cgram([4, 5, 6, 7], 3) == (5, 6, 7)
    assert build_cgram([7], 3, prompt_tokens=[1, 2, 3]) == (2, 3, 7)
    assert build_cgram([], 3, prompt_tokens=[9]) == (0, 0, 9)
    assert build_cgram([], 2, pad=5) == (5, 5)
    with pytest.raises(ValueError):
        build_cgram([], 0)


def test_context_validation():
    with pytest.raises(ValueError):
        PrfContext(b"short", (1,))
