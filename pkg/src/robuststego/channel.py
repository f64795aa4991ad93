"""Domain types shared by the watermark and embedding codecs."""

from __future__ import annotations

import hashlib
import hmac
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

# Domain-separation prefixes for every HMAC call made by this package.
# Changing any of these breaks interoperability with previously written stegotext.
TAG_SUBKEY = b"\x00"
TAG_LABELS = b"\x01"
TAG_SELECT = b"\x02"

DEFAULT_KEY_BITS = 256
SALT_BYTES = 8


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token list. A token's index is its position in ``tokens``."""

    tokens: tuple[str, ...]
    ter_index: int
    unk_index: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("vocabulary is empty")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens must be distinct")
        if not 0 <= self.ter_index < len(self.tokens):
            raise ValueError(f"ter_index {self.ter_index} out of range")
        if self.unk_index is not None and not 0 <= self.unk_index < len(self.tokens):
            raise ValueError(f"unk_index {self.unk_index} out of range")
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.tokens)})

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def ter(self) -> str:
        return self.tokens[self.ter_index]

    def index(self, token: str) -> int:
        idx = self._index.get(token)  # type: ignore[attr-defined]
        if idx is None:
            if self.unk_index is None:
                raise KeyError(f"token {token!r} not in vocabulary")
            return self.unk_index
        return idx

    def __contains__(self, token: str) -> bool:
        return token in self._index  # type: ignore[attr-defined]

    def encode(self, text: str) -> list[int]:
        """Whitespace-tokenize ``text`` and map each word to its index."""
        return [self.index(w) for w in text.split()]

    def encode_lenient(self, text: str) -> list[int]:
        """Like :meth:`encode`, but unknown words map to unk, or to ter without one."""
        fallback = self.ter_index if self.unk_index is None else self.unk_index
        idx = self._index  # type: ignore[attr-defined]
        return [idx.get(w, fallback) for w in text.split()]

    def decode(self, indices: Iterable[int], *, skip_ter: bool = True) -> str:
        words = []
        for i in indices:
            if skip_ter and i == self.ter_index:
                continue
            words.append(self.tokens[i])
        return " ".join(words)

    @classmethod
    def from_corpus(
        cls, text: str, *, ter: str = "<ter>", unk: str = "<unk>", min_count: int = 1
    ) -> "Vocabulary":
        """Build a vocabulary from whitespace-separated words, in first-seen order."""
        counts: dict[str, int] = {}
        for w in text.split():
            counts[w] = counts.get(w, 0) + 1
        words = [w for w, c in counts.items() if c >= min_count and w not in (ter, unk)]
        return cls(tuple([ter, unk, *words]), ter_index=0, unk_index=1)

    @classmethod
    def synthetic(cls, size: int) -> "Vocabulary":
        """``size`` placeholder words; every eighth ends a sentence. Index 0 is ter."""
        if size < 2:
            raise ValueError("synthetic vocabulary needs at least 2 tokens")
        tokens = ["<ter>"]
        for i in range(1, size):
            tokens.append(f"w{i:03d}." if i % 8 == 0 else f"w{i:03d}")
        return cls(tuple(tokens), ter_index=0)

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(
        cls, path: str | os.PathLike, *, ter_index: int = 0, unk_index: int | None = None
    ) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(tuple(lines), ter_index=ter_index, unk_index=unk_index)


@dataclass(frozen=True)
class ChannelHistory:
    """Previously exchanged messages plus the current prompt. Append-only."""

    prior_messages: tuple[str, ...] = ()
    prompt: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "prior_messages", tuple(self.prior_messages))

    def append(self, message: str) -> "ChannelHistory":
        return ChannelHistory(self.prior_messages + (message,), self.prompt)

    def context_text(self) -> str:
        """Prompt followed by the prior messages, as the model sees them."""
        parts = [self.prompt, *self.prior_messages]
        return " ".join(p for p in parts if p)

    def digest(self) -> str:
        payload = json.dumps(
            {"prior_messages": list(self.prior_messages), "prompt": self.prompt},
            ensure_ascii=False,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def derive_salt(history: ChannelHistory) -> bytes:
    """The number of prior messages as an 8-byte big-endian integer."""
    return len(history.prior_messages).to_bytes(SALT_BYTES, "big")


@dataclass(frozen=True)
class HiddenMessage:
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        bits = tuple(int(b) for b in self.bits)
        if not bits:
            raise ValueError("message must have at least one bit")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("message bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @property
    def length(self) -> int:
        return len(self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    @classmethod
    def from_string(cls, s: str) -> "HiddenMessage":
        s = s.strip()
        if not re.fullmatch(r"[01]+", s):
            raise ValueError(f"not a bit string: {s!r}")
        return cls(tuple(int(c) for c in s))

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)


def derive_subkeys(master_key: bytes, n: int) -> tuple[bytes, ...]:
    """Per-bit keys ``HMAC-SHA256(master, 0x00 || i)`` for i = 1..n (i as 4-byte BE)."""
    if n < 1:
        raise ValueError("need at least one subkey")
    return tuple(
        hmac.new(master_key, TAG_SUBKEY + i.to_bytes(4, "big"), hashlib.sha256).digest()
        for i in range(1, n + 1)
    )


@dataclass(frozen=True)
class WatermarkKeySet:
    master_key: bytes
    subkeys: tuple[bytes, ...]

    @classmethod
    def derive(cls, master_key: bytes, n: int) -> "WatermarkKeySet":
        return cls(master_key, derive_subkeys(master_key, n))

    @classmethod
    def generate(cls, n: int, key_bits: int = DEFAULT_KEY_BITS) -> "WatermarkKeySet":
        return cls.derive(generate_master_key(key_bits), n)

    def __len__(self) -> int:
        return len(self.subkeys)

    def to_json(self) -> dict[str, Any]:
        return {"master_key": self.master_key.hex(), "subkeys": [k.hex() for k in self.subkeys]}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "WatermarkKeySet":
        return cls(bytes.fromhex(obj["master_key"]), tuple(bytes.fromhex(k) for k in obj["subkeys"]))


def generate_master_key(key_bits: int = DEFAULT_KEY_BITS) -> bytes:
    if key_bits <= 0 or key_bits % 8:
        raise ValueError("key length must be a positive multiple of 8 bits")
    return os.urandom(key_bits // 8)


def write_key_file(path: str | os.PathLike, master_key: bytes) -> None:
    Path(path).write_text(master_key.hex() + "\n", encoding="ascii")


def read_key_file(path: str | os.PathLike, key_bits: int = DEFAULT_KEY_BITS) -> bytes:
    text = Path(path).read_text(encoding="ascii").strip()
    if not re.fullmatch(r"[0-9a-f]*", text):
        raise ValueError("key file must contain lowercase hex")
    key = bytes.fromhex(text)
    if len(key) * 8 != key_bits:
        raise ValueError(f"key is {len(key) * 8} bits, expected {key_bits}")
    return key


@dataclass(frozen=True)
class StegoDocument:
    """A stegotext together with the parameters needed to decode it.

    ``token_indices`` is set for watermark documents; embedding documents carry
    only ``text`` (chunks separated by blank lines).
    """

    scheme: str
    text: str
    token_indices: tuple[int, ...] | None = None
    params: dict[str, Any] = field(default_factory=dict)
    history_digest: str = ""

    def __post_init__(self) -> None:
        if self.scheme not in ("watermark", "embedding"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.token_indices is not None:
            object.__setattr__(self, "token_indices", tuple(int(t) for t in self.token_indices))

    def to_json(self) -> dict[str, Any]:
        return {
            "scheme": self.scheme,
            "token_indices": None if self.token_indices is None else list(self.token_indices),
            "text": self.text,
            "params": self.params,
            "history_digest": self.history_digest,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "StegoDocument":
        tokens = obj.get("token_indices")
        return cls(
            scheme=obj["scheme"],
            text=obj["text"],
            token_indices=None if tokens is None else tuple(tokens),
            params=dict(obj.get("params") or {}),
            history_digest=obj.get("history_digest", ""),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, sort_keys=True)

    @classmethod
    def loads(cls, s: str) -> "StegoDocument":
        return cls.from_json(json.loads(s))


def bits_of(message: HiddenMessage | Sequence[int]) -> tuple[int, ...]:
    if isinstance(message, HiddenMessage):
        return message.bits
    return HiddenMessage(tuple(message)).bits
