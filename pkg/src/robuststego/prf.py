"""HMAC-SHA256 pseudorandom functions for the watermark codec.

Label vectors are built in counter mode::

    block_b = HMAC(key, 0x01 || salt(8) || cgram[0](4) || ... || cgram[c-1](4) || b(4))

for b = 0, 1, ...; blocks are concatenated and the first N bits (most
significant bit of each byte first) form the vector. Token indices and the
block counter are 4-byte big-endian.

The key selector is ``int(HMAC(key, 0x02 || j(8))[:8], big) mod L``.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import SALT_BYTES, TAG_LABELS, TAG_SELECT

_BLOCK_BITS = 256


@dataclass(frozen=True)
class PrfContext:
    salt: bytes
    cgram: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.salt) != SALT_BYTES:
            raise ValueError(f"salt must be {SALT_BYTES} bytes")
        object.__setattr__(self, "cgram", tuple(int(t) for t in self.cgram))

    @property
    def c(self) -> int:
        return len(self.cgram)

    def message_prefix(self) -> bytes:
        return TAG_LABELS + self.salt + b"".join(t.to_bytes(4, "big") for t in self.cgram)


def build_cgram(
    prior_tokens: Sequence[int], c: int, prompt_tokens: Sequence[int] = (), pad: int = 0
) -> tuple[int, ...]:
    """The ``c`` tokens preceding the next position.

    Falls back to the tail of the prompt when fewer than ``c`` tokens have been
    generated, then left-pads with ``pad`` (the ter index).
    """
    if c < 1:
        raise ValueError("c must be >= 1")
    window = list(prior_tokens[-c:]) if prior_tokens else []
    short = c - len(window)
    if short > 0:
        window = list(prompt_tokens[-short:] if prompt_tokens else []) + window
        short = c - len(window)
        window = [pad] * short + window
    return tuple(window)


def prf_label_vector(key: bytes, ctx: PrfContext, n: int) -> np.ndarray:
    """N pseudorandom bits (uint8 array of 0/1) for ``key`` at context ``ctx``."""
    if n < 1:
        raise ValueError("N must be >= 1")
    prefix = ctx.message_prefix()
    blocks = -(-n // _BLOCK_BITS)
    raw = b"".join(
        hmac.new(key, prefix + b.to_bytes(4, "big"), hashlib.sha256).digest() for b in range(blocks)
    )
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:n]


def prf_select_index(key: bytes, position: int, size: int) -> int:
    if size < 1:
        raise ValueError("list size must be >= 1")
    digest = hmac.new(key, TAG_SELECT + int(position).to_bytes(8, "big"), hashlib.sha256).digest()
    return int.from_bytes(digest[:8], "big") % size
