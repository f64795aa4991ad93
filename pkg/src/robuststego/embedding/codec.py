"""Chunked rejection sampling: each chunk's embedding hashes to its message bits."""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from typing import Any, Sequence

from ..channel import ChannelHistory, HiddenMessage, StegoDocument, bits_of
from ..langmodel import sample_text
from .embedders import Embedder, embed_text
from .lsh import LshModel

CHUNK_DELIMITER = "\n\n"
_SPLIT = re.compile(r"\n[ \t]*\n")
DEFAULT_MAX_ATTEMPTS = 64
DEFAULT_CHUNK_TOKENS = 40


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class ChunkPlan:
    """Message split into ``hash_bits``-wide targets; the last one is zero-padded."""

    chunks: tuple[tuple[int, ...], ...]
    n: int
    hash_bits: int

    @classmethod
    def from_bits(cls, bits: Sequence[int], hash_bits: int) -> "ChunkPlan":
        if hash_bits < 1:
            raise ValueError("hash_bits must be >= 1")
        bits = list(bits)
        n = len(bits)
        r = math.ceil(n / hash_bits)
        padded = bits + [0] * (r * hash_bits - n)
        chunks = tuple(tuple(padded[i * hash_bits : (i + 1) * hash_bits]) for i in range(r))
        return cls(chunks, n, hash_bits)

    @property
    def r(self) -> int:
        return len(self.chunks)

    def message_bits(self) -> tuple[int, ...]:
        return tuple(b for c in self.chunks for b in c)[: self.n]


@dataclass
class EncodeReport:
    attempts: list[int] = field(default_factory=list)
    misses: list[int] = field(default_factory=list)

    @property
    def mean_attempts(self) -> float:
        return sum(self.attempts) / len(self.attempts) if self.attempts else 0.0


def attempt_seed(seed: int, chunk: int, attempt: int) -> int:
    d = hashlib.blake2b(f"{seed}:{chunk}:{attempt}".encode(), digest_size=8).digest()
    return int.from_bytes(d, "big")


def _clean(text: str) -> str:
    # a candidate must not contain the chunk delimiter
    return " ".join(text.split())


def encode(
    message: HiddenMessage | Sequence[int],
    model: Any,
    embedder: Embedder,
    lsh: LshModel,
    history: ChannelHistory,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    *,
    chunk_tokens: int = DEFAULT_CHUNK_TOKENS,
    seed: int = 0,
) -> tuple[StegoDocument, EncodeReport]:
    """Sample candidates per chunk until ``lsh(embed(candidate))`` equals the target.

    A chunk that exhausts ``max_attempts`` keeps its last candidate and is
    listed in ``report.misses``; error correction upstream is expected to
    absorb it. Each accepted chunk is appended to the history the next chunk
    is conditioned on.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    plan = ChunkPlan.from_bits(bits_of(message), lsh.hash_bits)
    report = EncodeReport()
    chunks: list[str] = []
    h = history
    for i, target in enumerate(plan.chunks):
        candidate = ""
        for a in range(max_attempts):
            text = _clean(sample_text(model, h.context_text(), chunk_tokens, attempt_seed(seed, i, a)))
            if not text:
                continue
            candidate = text
            if tuple(lsh.hash(embed_text(embedder, text))) == target:
                report.attempts.append(a + 1)
                break
        else:
            report.attempts.append(max_attempts)
            report.misses.append(i)
            if not candidate:
                raise RuntimeError(f"model produced no text for chunk {i} in {max_attempts} attempts")
        chunks.append(candidate)
        h = h.append(candidate)
    doc = StegoDocument(
        scheme="embedding",
        text=CHUNK_DELIMITER.join(chunks),
        params={"n": plan.n, "hash_bits": plan.hash_bits, "chunks": plan.r},
        history_digest=history.digest(),
    )
    return doc, report


def split_chunks(text: str) -> list[str]:
    return [c.strip() for c in _SPLIT.split(text) if c.strip()]


def join_chunks(chunks: Sequence[str]) -> str:
    return CHUNK_DELIMITER.join(chunks)


def decode(
    stego: StegoDocument | str, embedder: Embedder, lsh: LshModel, n: int
) -> HiddenMessage:
    text = stego.text if isinstance(stego, StegoDocument) else stego
    r = math.ceil(n / lsh.hash_bits)
    chunks = split_chunks(text)
    if len(chunks) < r:
        raise DecodeError(f"expected {r} chunks, found {len(chunks)}")
    bits: list[int] = []
    for chunk in chunks[:r]:
        bits.extend(lsh.hash(embed_text(embedder, chunk)))
    return HiddenMessage(tuple(bits[:n]))
