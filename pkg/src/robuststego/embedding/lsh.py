"""Locality-sensitive hashes from embedding vectors to fixed-width bit strings."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np


def _as_vector(v: Any, dimension: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (dimension,):
        raise ValueError(f"vector has shape {v.shape}, expected ({dimension},)")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def _seed_int(key_seed: bytes, label: bytes) -> int:
    return int.from_bytes(hashlib.sha256(label + key_seed).digest(), "big")


class RandomProjectionLsh:
    """Sign of the dot product with each of ``hash_bits`` Gaussian hyperplanes.

    Hyperplanes are drawn from PCG64 seeded with SHA-256("rp-lsh" || key_seed),
    so both parties rebuild them from the shared key.
    """

    kind = "random_projection"

    def __init__(
        self,
        hash_bits: int,
        dimension: int,
        key_seed: bytes = b"",
        hyperplanes: np.ndarray | None = None,
    ):
        if hash_bits < 1 or dimension < 1:
            raise ValueError("hash_bits and dimension must be positive")
        self.hash_bits = hash_bits
        self.dimension = dimension
        self.key_seed = bytes(key_seed)
        if hyperplanes is None:
            rng = np.random.Generator(np.random.PCG64(_seed_int(self.key_seed, b"rp-lsh")))
            hyperplanes = rng.standard_normal((hash_bits, dimension))
            self._derived = True
        else:
            self._derived = False
        self.hyperplanes = np.asarray(hyperplanes, dtype=np.float64)
        if self.hyperplanes.shape != (hash_bits, dimension):
            raise ValueError(f"hyperplanes have shape {self.hyperplanes.shape}")

    def hash(self, v: Any) -> tuple[int, ...]:
        proj = self.hyperplanes @ _as_vector(v, self.dimension)
        return tuple(int(x >= 0) for x in proj)

    def to_json(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "kind": self.kind,
            "hash_bits": self.hash_bits,
            "dimension": self.dimension,
            "seed": self.key_seed.hex(),
        }
        if not self._derived:
            d["hyperplanes"] = self.hyperplanes.tolist()
        return d


@dataclass
class PcaLsh:
    """Bit b is 1 iff component_b . (v - mean) >= threshold_b."""

    mean: np.ndarray
    components: np.ndarray
    thresholds: np.ndarray
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    kind = "pca"

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.components = np.atleast_2d(np.asarray(self.components, dtype=np.float64))
        self.thresholds = np.asarray(self.thresholds, dtype=np.float64)
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        if self.components.shape[1] != self.mean.shape[0]:
            raise ValueError("components and mean disagree on dimension")
        if self.thresholds.shape != (self.components.shape[0],):
            raise ValueError("need one threshold per component")

    @property
    def hash_bits(self) -> int:
        return self.components.shape[0]

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]

    def project(self, v: Any) -> np.ndarray:
        return self.components @ (_as_vector(v, self.dimension) - self.mean)

    def hash(self, v: Any) -> tuple[int, ...]:
        return tuple(int(x) for x in self.project(v) >= self.thresholds)

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "hash_bits": self.hash_bits,
            "dimension": self.dimension,
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "thresholds": self.thresholds.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }


def train_pca_lsh(
    corpus_embeddings: Sequence[Any], hash_bits: int, threshold: str = "zero"
) -> PcaLsh:
    """Top-``hash_bits`` principal directions of the corpus, thresholded per bit.

    ``threshold="zero"`` cuts at the mean; ``"median"`` cuts each projection at
    its corpus median, which balances the bits on the training data. Component
    signs are fixed so each vector's largest-magnitude entry is positive.
    """
    x = np.asarray(corpus_embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("corpus must be a 2-D array of embeddings")
    size, d = x.shape
    if hash_bits < 1:
        raise ValueError("hash_bits must be >= 1")
    if size < hash_bits + 1:
        raise ValueError(f"need at least {hash_bits + 1} embeddings, got {size}")
    if d < hash_bits:
        raise ValueError(f"dimension {d} is smaller than hash_bits {hash_bits}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (size - 1)
    evals, evecs = np.linalg.eigh(cov)
    if evals[-1] <= 1e-12 * max(1.0, float(np.abs(x).max()) ** 2):
        raise ValueError("corpus has zero variance; cannot fit principal components")
    order = np.argsort(evals)[::-1][:hash_bits]
    comps = evecs[:, order].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    if threshold == "zero":
        th = np.zeros(hash_bits)
    elif threshold == "median":
        th = np.median(centered @ comps.T, axis=0)
    else:
        raise ValueError(f"unknown threshold rule {threshold!r}")
    return PcaLsh(mean, comps, th, evals[order])


class OracleLsh:
    """Test double standing in for an ideal or deliberately faulty LSH.

    Resolution order for each call:

    1. ``script``: scripted outputs are returned in order until exhausted.
    2. memory: if ``radius`` is set, a vector within that Euclidean distance of
       one hashed before gets the same output (an LSH that is exact on the ball).
    3. fallback: ``mode="keyed"`` derives bits from the vector's bytes (a
       deterministic uniform hash); ``mode="random"`` draws fresh uniform bits.

    Afterwards, with probability ``flip_prob`` the output is replaced by a
    different value chosen uniformly. The object is stateful (script cursor,
    memory, RNG), so share one instance between encoder and decoder only when
    that is what the experiment means.
    """

    kind = "oracle"

    def __init__(
        self,
        hash_bits: int,
        dimension: int,
        seed: int = 0,
        mode: str = "keyed",
        radius: float | None = None,
        flip_prob: float = 0.0,
        script: Sequence[Sequence[int]] | None = None,
    ):
        if mode not in ("keyed", "random"):
            raise ValueError(f"unknown oracle mode {mode!r}")
        if not 0.0 <= flip_prob <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")
        self.hash_bits = hash_bits
        self.dimension = dimension
        self.seed = seed
        self.mode = mode
        self.radius = radius
        self.flip_prob = flip_prob
        self.script = [tuple(int(b) for b in s) for s in (script or [])]
        for s in self.script:
            if len(s) != hash_bits:
                raise ValueError("scripted output has the wrong width")
        self._cursor = 0
        self._memory: list[tuple[np.ndarray, tuple[int, ...]]] = []
        self._rng = np.random.default_rng(seed)

    def _keyed(self, v: np.ndarray) -> tuple[int, ...]:
        d = hashlib.sha256(self.seed.to_bytes(8, "big", signed=True) + v.tobytes()).digest()
        bits = np.unpackbits(np.frombuffer(d, dtype=np.uint8))
        return tuple(int(b) for b in bits[: self.hash_bits])

    def _recall(self, v: np.ndarray) -> tuple[int, ...] | None:
        if self.radius is None:
            return None
        for u, out in self._memory:
            if np.linalg.norm(u - v) <= self.radius:
                return out
        return None

    def hash(self, v: Any) -> tuple[int, ...]:
        v = _as_vector(v, self.dimension)
        out: tuple[int, ...] | None = None
        if self._cursor < len(self.script):
            out = self.script[self._cursor]
            self._cursor += 1
        if out is None:
            out = self._recall(v)
        if out is None:
            if self.mode == "keyed":
                out = self._keyed(v)
            else:
                out = tuple(int(b) for b in self._rng.integers(0, 2, self.hash_bits))
        if self.radius is not None and self._recall(v) is None:
            self._memory.append((v.copy(), out))
        if self.flip_prob and self._rng.random() < self.flip_prob:
            value = int("".join(map(str, out)), 2)
            other = int(self._rng.integers(1, 1 << self.hash_bits))
            flipped = value ^ other
            out = tuple((flipped >> (self.hash_bits - 1 - i)) & 1 for i in range(self.hash_bits))
        return out

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "hash_bits": self.hash_bits,
            "dimension": self.dimension,
            "seed": self.seed,
            "mode": self.mode,
            "radius": self.radius,
            "flip_prob": self.flip_prob,
            "script": [list(s) for s in self.script],
        }


LshModel = RandomProjectionLsh | PcaLsh | OracleLsh


def lsh_hash(model: LshModel, v: Any) -> tuple[int, ...]:
    return model.hash(v)


def lsh_from_json(obj: dict[str, Any]) -> LshModel:
    kind = obj.get("kind")
    if kind == "random_projection":
        hp = obj.get("hyperplanes")
        return RandomProjectionLsh(
            obj["hash_bits"],
            obj["dimension"],
            bytes.fromhex(obj.get("seed", "")),
            None if hp is None else np.asarray(hp),
        )
    if kind == "pca":
        return PcaLsh(
            np.asarray(obj["mean"]),
            np.asarray(obj["components"]),
            np.asarray(obj["thresholds"]),
            np.asarray(obj.get("eigenvalues", [])),
        )
    if kind == "oracle":
        return OracleLsh(
            obj["hash_bits"],
            obj["dimension"],
            seed=obj.get("seed", 0),
            mode=obj.get("mode", "keyed"),
            radius=obj.get("radius"),
            flip_prob=obj.get("flip_prob", 0.0),
            script=obj.get("script"),
        )
    raise ValueError(f"unknown LSH kind {kind!r}")


def save_lsh(model: LshModel, path: str | os.PathLike) -> None:
    # repr() of a float round-trips exactly through json
    Path(path).write_text(json.dumps(model.to_json(), indent=1), encoding="utf-8")


def load_lsh(path: str | os.PathLike) -> LshModel:
    return lsh_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
