"""Codec profile: every parameter sender and receiver must agree on, in one JSON file.

Example::

    {
      "scheme": "watermark",
      "model": {"kind": "synthetic", "vocab_size": 64, "seed": 7, "entropy_target": 6.0},
      "watermark": {"delta": 0.2, "c": 3, "T": 1998, "epsilon": 0.05, "n_bits": 3},
      "key_bits": 256
    }

    {
      "scheme": "embedding",
      "model": {"kind": "ngram", "corpus": "builtin", "order": 3, "alpha": 0.1},
      "embedder": {"kind": "toy", "dimension": 256},
      "lsh": {"kind": "random_projection", "hash_bits": 1, "dimension": 256, "seed": "00"},
      "ecc": {"kind": "repetition", "repeat_factor": 3},
      "max_attempts": 64,
      "chunk_tokens": 40
    }

Relative paths (``vocabulary.path``, ``model.corpus``, ``lsh_path``) resolve
against the profile's directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..assets import read_asset
from ..channel import DEFAULT_KEY_BITS, Vocabulary
from ..ecc import EccSpec
from ..embedding.embedders import RemoteEmbedder, ToyEmbedder
from ..embedding.lsh import LshModel, load_lsh, lsh_from_json
from ..langmodel import (
    NGramModel,
    RemoteCompletionModel,
    RemoteEndpoint,
    SyntheticModel,
)
from ..watermark.codec import WatermarkParams


@dataclass
class Profile:
    raw: dict[str, Any]
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Profile":
        p = Path(path)
        return cls(json.loads(p.read_text(encoding="utf-8")), p.resolve().parent)

    @property
    def scheme(self) -> str:
        scheme = self.raw.get("scheme")
        if scheme not in ("watermark", "embedding"):
            raise ValueError(f"profile scheme must be 'watermark' or 'embedding', got {scheme!r}")
        return scheme

    @property
    def key_bits(self) -> int:
        return int(self.raw.get("key_bits", DEFAULT_KEY_BITS))

    def _path(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q

    def _corpus_text(self, spec: dict[str, Any]) -> str:
        src = spec.get("corpus", "builtin")
        return read_asset("corpus.txt") if src == "builtin" else self._path(src).read_text("utf-8")

    def vocabulary(self) -> Vocabulary:
        spec = self.raw.get("vocabulary")
        model = self.raw.get("model", {})
        if spec is not None:
            return Vocabulary.load(
                self._path(spec["path"]),
                ter_index=int(spec.get("ter_index", 0)),
                unk_index=spec.get("unk_index"),
            )
        if model.get("kind") == "synthetic":
            return Vocabulary.synthetic(int(model.get("vocab_size", 64)))
        if model.get("kind") == "ngram":
            return Vocabulary.from_corpus(self._corpus_text(model))
        raise ValueError("profile needs a vocabulary section for this model kind")

    def model(self) -> Any:
        spec = self.raw.get("model") or {}
        vocab = self.vocabulary()
        kind = spec.get("kind")
        if kind == "synthetic":
            return SyntheticModel(vocab, seed=int(spec.get("seed", 0)), entropy_target=spec.get("entropy_target"))
        if kind == "ngram":
            model = NGramModel(vocab, int(spec.get("order", 3)), float(spec.get("alpha", 0.1)))
            return model.fit_text(self._corpus_text(spec))
        if kind == "remote":
            endpoint = RemoteEndpoint(spec["endpoint"], spec["model_name"], spec.get("api_key_env", "OPENAI_API_KEY"))
            return RemoteCompletionModel(vocab, endpoint)
        raise ValueError(f"unknown model kind {kind!r}")

    def watermark_params(self) -> WatermarkParams:
        return WatermarkParams.from_json(self.raw["watermark"])

    def embedder(self) -> Any:
        spec = self.raw.get("embedder") or {"kind": "toy"}
        if spec.get("kind", "toy") == "toy":
            return ToyEmbedder(int(spec.get("dimension", 256)))
        if spec["kind"] == "remote":
            endpoint = RemoteEndpoint(spec["endpoint"], spec["model_name"], spec.get("api_key_env", "OPENAI_API_KEY"))
            return RemoteEmbedder(endpoint, int(spec["dimension"]))
        raise ValueError(f"unknown embedder kind {spec['kind']!r}")

    def lsh(self) -> LshModel:
        if "lsh_path" in self.raw:
            return load_lsh(self._path(self.raw["lsh_path"]))
        if "lsh" in self.raw:
            return lsh_from_json(self.raw["lsh"])
        raise ValueError("profile needs 'lsh' or 'lsh_path'")

    def ecc(self) -> EccSpec:
        return EccSpec.from_json(self.raw.get("ecc", {"kind": "none"}))

    @property
    def max_attempts(self) -> int:
        return int(self.raw.get("max_attempts", 64))

    @property
    def chunk_tokens(self) -> int:
        return int(self.raw.get("chunk_tokens", 40))
