from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..langmodel import RemoteEndpoint, RemoteError

_WORD = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")


class Embedder(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


def words(text: str) -> list[str]:
    return _WORD.findall(text.lower())


@dataclass(frozen=True)
class ToyEmbedder:
    """Signed feature hashing of a bag of words, weighted 1 + ln(tf), unit L2 norm.

    Each lowercased word lands in one of ``dimension`` buckets with a +/-1 sign,
    both taken from BLAKE2b of the word, so texts with disjoint vocabularies are
    nearly orthogonal and texts sharing most words stay close.
    """

    dimension: int = 256

    def _slot(self, word: str) -> tuple[int, float]:
        d = hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest()
        v = int.from_bytes(d, "big")
        return (v >> 1) % self.dimension, (1.0 if v & 1 else -1.0)

    def embed(self, text: str) -> np.ndarray:
        counts = Counter(words(text))
        if not counts:
            raise ValueError("cannot embed empty text")
        vec = np.zeros(self.dimension)
        for w, tf in counts.items():
            slot, sign = self._slot(w)
            vec[slot] += sign * (1.0 + math.log(tf))
        norm = np.linalg.norm(vec)
        if norm == 0:
            # every word cancelled against a colliding opposite-sign word
            vec[self._slot(next(iter(counts)))[0]] = 1.0
            norm = 1.0
        return vec / norm


class RemoteEmbedder:
    """OpenAI-compatible ``/embeddings`` client."""

    def __init__(self, endpoint: RemoteEndpoint, dimension: int):
        self.endpoint = endpoint
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise ValueError("cannot embed empty text")
        resp = self.endpoint.post("/embeddings", {"input": text})
        try:
            vec = np.asarray(resp["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError) as e:
            raise RemoteError("malformed embeddings response") from e
        if vec.shape != (self.dimension,):
            raise RemoteError(f"expected {self.dimension}-d embedding, got {vec.shape}")
        return vec


def embed_text(embedder: Embedder, text: str) -> np.ndarray:
    if not text or not text.strip():
        raise ValueError("cannot embed empty text")
    return embedder.embed(text)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))
