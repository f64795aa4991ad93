"""Tampering simulator and the two robustness measurements.

All attacks work on whitespace-separated words and are pure functions of
(text, config); randomness comes from ``random.Random(config.seed)``.
"""

from __future__ import annotations

import os
import random
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .assets import read_asset
from .embedding.codec import join_chunks, split_chunks
from .embedding.embedders import Embedder, embed_text

ATTACK_KINDS = ("ngram_shuffle", "synonym", "paraphrase")
_SENTENCE_END = re.compile(r"[.!?]$")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])(\s+)")


@dataclass(frozen=True)
class AttackConfig:
    kind: str
    mode: str = "global"
    fraction: float = 0.1
    n: int = 3
    lexicon_path: str | None = None
    paraphraser: str = "deterministic_rules"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack {self.kind!r}")
        if self.mode not in ("local", "global"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.paraphraser not in ("deterministic_rules", "remote"):
            raise ValueError(f"unknown paraphraser {self.paraphraser!r}")

    def with_seed(self, seed: int) -> "AttackConfig":
        return AttackConfig(**{**asdict(self), "seed": seed})

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def sentence_ids(words: Sequence[str]) -> list[int]:
    """Sentence number of each word; a word ending in . ! or ? closes its sentence."""
    ids, s = [], 0
    for w in words:
        ids.append(s)
        if _SENTENCE_END.search(w):
            s += 1
    return ids


def ngram_shuffle(text: str, config: AttackConfig) -> str:
    words = text.split()
    if config.fraction == 0 or not words:
        return text
    sids = sentence_ids(words)
    # Units are consecutive n-word spans; in local mode they never straddle sentences.
    units: list[tuple[int, int]] = []
    start = 0
    while start < len(words):
        end = min(start + config.n, len(words))
        if config.mode == "local":
            while end > start + 1 and sids[end - 1] != sids[start]:
                end -= 1
        units.append((start, end))
        start = end
    rng = random.Random(config.seed)
    k = round(config.fraction * len(units))
    if k == 0:
        return text
    chosen = sorted(rng.sample(range(len(units)), k))
    groups: dict[int, list[int]] = {}
    for u in chosen:
        key = sids[units[u][0]] if config.mode == "local" else 0
        groups.setdefault(key, []).append(u)
    pieces = [words[a:b] for a, b in units]
    for slots in groups.values():
        contents = [pieces[u] for u in slots]
        rng.shuffle(contents)
        for u, c in zip(slots, contents):
            pieces[u] = c
    return " ".join(w for piece in pieces for w in piece)


class Lexicon:
    """Synonym table loaded from lines of the form ``word: syn1, syn2``."""

    def __init__(self, table: dict[str, list[str]]):
        self.table = {k.lower(): list(v) for k, v in table.items() if v}

    @classmethod
    def parse(cls, text: str) -> "Lexicon":
        table: dict[str, list[str]] = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise ValueError(f"malformed lexicon line: {line!r}")
            head, tail = line.split(":", 1)
            syns = [s.strip() for s in tail.split(",") if s.strip()]
            table.setdefault(head.strip().lower(), []).extend(syns)
        return cls(table)

    @classmethod
    def load(cls, path: str | os.PathLike | None = None) -> "Lexicon":
        if path is None:
            return cls.parse(read_asset("lexicon.txt"))
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"lexicon not found: {p}")
        return cls.parse(p.read_text(encoding="utf-8"))

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.table

    def synonyms(self, word: str) -> list[str]:
        return self.table.get(word.lower(), [])


_CORE = re.compile(r"^(\W*)(.*?)(\W*)$")


def _match_case(src: str, repl: str) -> str:
    return repl[:1].upper() + repl[1:] if src[:1].isupper() else repl


def synonym_substitute(text: str, config: AttackConfig, lexicon: Lexicon | None = None) -> str:
    if config.fraction == 0:
        return text
    if lexicon is None:
        lexicon = Lexicon.load(config.lexicon_path)
    words = text.split()
    covered = []
    for i, w in enumerate(words):
        core = _CORE.match(w).group(2)
        if core and core in lexicon:
            covered.append(i)
    k = round(config.fraction * len(covered))
    if k == 0:
        return text
    rng = random.Random(config.seed)
    for i in sorted(rng.sample(covered, k)):
        pre, core, post = _CORE.match(words[i]).groups()
        words[i] = pre + _match_case(core, rng.choice(lexicon.synonyms(core))) + post
    return " ".join(words)


# Rewrite rules, applied in order to each selected sentence.
CONTRACTIONS: tuple[tuple[str, str], ...] = (
    ("can not", "cannot"),
    ("can't", "cannot"),
    ("won't", "will not"),
    ("don't", "do not"),
    ("doesn't", "does not"),
    ("didn't", "did not"),
    ("isn't", "is not"),
    ("aren't", "are not"),
    ("wasn't", "was not"),
    ("haven't", "have not"),
    ("shouldn't", "should not"),
    ("wouldn't", "would not"),
    ("couldn't", "could not"),
    ("i'm", "I am"),
    ("i've", "I have"),
    ("i'll", "I will"),
    ("i'd", "I would"),
    ("we're", "we are"),
    ("we've", "we have"),
    ("we'll", "we will"),
    ("you're", "you are"),
    ("you'll", "you will"),
    ("they're", "they are"),
    ("it's", "it is"),
    ("that's", "that is"),
    ("there's", "there is"),
    ("let's", "let us"),
)
_CONTRACTION_RES = [
    (re.compile(r"\b" + re.escape(a) + r"\b", re.IGNORECASE), b) for a, b in CONTRACTIONS
]
_CLAUSES = re.compile(r"^(?P<a>[^,]+), (?P<conj>and|or) (?P<b>[^,]+?)(?P<end>[.!?]?)$")
_PASSIVE = re.compile(r"\b(the \w+) (?:was|were) (\w+ed) by (the \w+)\b", re.IGNORECASE)
_ACTIVE = re.compile(r"\b(the \w+) (\w+ed) (the \w+)\b", re.IGNORECASE)


def _rewrite_sentence(s: str) -> str:
    for pat, repl in _CONTRACTION_RES:
        s = pat.sub(lambda m, r=repl: _match_case(m.group(0), r), s)
    m = _CLAUSES.match(s)
    if m:
        a, b = m.group("a"), m.group("b")
        b = b[:1].upper() + b[1:]
        a = a[:1].lower() + a[1:] if not a.startswith("I ") else a
        s = f"{b}, {m.group('conj')} {a}{m.group('end')}"
    if _PASSIVE.search(s):
        s = _PASSIVE.sub(lambda m: f"{m.group(3)} {m.group(2)} {m.group(1).lower()}", s, count=1)
    elif _ACTIVE.search(s):
        s = _ACTIVE.sub(lambda m: f"{m.group(3)} was {m.group(2)} by {m.group(1).lower()}", s, count=1)
    return s


Paraphraser = Callable[[str], str]


def paraphrase(text: str, config: AttackConfig, remote: Paraphraser | None = None) -> str:
    """Rewrite about ``fraction`` of the sentences.

    ``deterministic_rules`` expands contractions, swaps clauses joined by
    ", and" / ", or", and flips simple "the X was VERBed by the Y" voice.
    ``remote`` hands each selected sentence (local) or the whole text (global)
    to the supplied callable.
    """
    if config.fraction == 0:
        return text
    if config.paraphraser == "remote":
        if remote is None:
            raise ValueError("remote paraphraser requested but none supplied")
        if config.mode == "global":
            return remote(text)
        rewrite: Paraphraser = remote
    else:
        rewrite = _rewrite_sentence
    parts = _SENTENCE_SPLIT.split(text)
    sentences = parts[0::2]
    idx = [i for i, s in enumerate(sentences) if s.strip()]
    k = round(config.fraction * len(idx))
    if k == 0:
        return text
    rng = random.Random(config.seed)
    for i in rng.sample(idx, k):
        sentences[i] = rewrite(sentences[i])
    out = []
    for i, s in enumerate(sentences):
        out.append(s)
        if 2 * i + 1 < len(parts):
            out.append(parts[2 * i + 1])
    return "".join(out)


def apply_attack(
    text: str,
    config: AttackConfig,
    *,
    lexicon: Lexicon | None = None,
    remote: Paraphraser | None = None,
) -> str:
    if config.kind == "ngram_shuffle":
        return ngram_shuffle(text, config)
    if config.kind == "synonym":
        return synonym_substitute(text, config, lexicon)
    return paraphrase(text, config, remote)


def attack_chunks(text: str, config: AttackConfig, **kw: Any) -> str:
    """Attack each blank-line-delimited chunk separately, seeding chunk i with seed + i."""
    chunks = split_chunks(text)
    return join_chunks(
        [apply_attack(c, config.with_seed(config.seed + i), **kw) for i, c in enumerate(chunks)]
    )


def _word_seq(x: str | Sequence[str]) -> list[str]:
    return x.split() if isinstance(x, str) else list(x)


def local_consistency(x: str | Sequence[Any], fx: str | Sequence[Any], k: int) -> float:
    """Fraction of the k-word windows of ``x`` that occur anywhere in ``fx``."""
    xs, fs = _word_seq(x), _word_seq(fx)
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(xs) < k:
        raise ValueError(f"x has {len(xs)} words, fewer than k={k}")
    present = {tuple(fs[i : i + k]) for i in range(len(fs) - k + 1)}
    windows = len(xs) - k + 1
    hits = sum(tuple(xs[i : i + k]) in present for i in range(windows))
    return hits / windows


def embedding_drift(x: str, x_prime: str, embedder: Embedder) -> tuple[float, float]:
    """(Euclidean distance, cosine similarity) between the two embeddings."""
    u = embed_text(embedder, x)
    v = embed_text(embedder, x_prime)
    euclid = float(np.linalg.norm(u - v))
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    cos = float(np.dot(u, v) / (nu * nv)) if nu and nv else 0.0
    return euclid, cos
