"""Next-token distribution providers.

Three kinds are available: a deterministic synthetic channel (hash-seeded
symmetric Dirichlet draws), an additive-smoothing n-gram model trained on a
text corpus, and an adapter for OpenAI-compatible completion endpoints.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
import urllib.error
import urllib.request
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Protocol, Sequence

import numpy as np
from scipy.special import digamma

from .channel import Vocabulary

log = logging.getLogger(__name__)

PROB_TOL = 1e-9


class LanguageModel(Protocol):
    vocabulary: Vocabulary

    def next_distribution(self, prompt: str, prior_tokens: Sequence[int]) -> np.ndarray: ...


def validate_distribution(p: np.ndarray, n: int | None = None) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or (n is not None and p.shape[0] != n):
        raise ValueError(f"distribution has shape {p.shape}, expected ({n},)")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("distribution has negative or non-finite entries")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"distribution sums to {p.sum()!r}")
    return p


def entropy_bits(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def _check_prior(prior_tokens: Sequence[int], n: int) -> None:
    for t in prior_tokens:
        if not 0 <= t < n:
            raise ValueError(f"token index {t} outside vocabulary of size {n}")


def dirichlet_concentration(n: int, entropy_target: float) -> float:
    """Symmetric concentration whose expected entropy (bits) meets the target.

    Uses E[H] = psi(n*a + 1) - psi(a + 1) nats and bisection over log(a).
    Targets at or above the attainable maximum return the upper bracket.
    """
    if n < 2:
        raise ValueError("need at least 2 outcomes")
    lo, hi = math.log(1e-3), math.log(SyntheticModel.MAX_CONCENTRATION)
    target = entropy_target * math.log(2)

    def expected(log_a: float) -> float:
        a = math.exp(log_a)
        return float(digamma(n * a + 1) - digamma(a + 1))

    if target >= expected(hi):
        return math.exp(hi)
    if target <= expected(lo):
        return math.exp(lo)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if expected(mid) < target:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


@dataclass(frozen=True)
class SyntheticModel:
    """Reproducible high-entropy channel.

    Each step draws from Dirichlet(a, ..., a) using a generator seeded by
    BLAKE2b(seed, prompt, last ``context_window`` prior tokens).
    """

    MAX_CONCENTRATION = 1e4

    vocabulary: Vocabulary
    seed: int = 0
    entropy_target: float | None = None
    context_window: int = 8
    concentration: float = field(init=False)

    def __post_init__(self) -> None:
        n = self.vocabulary.size
        target = math.log2(n) if self.entropy_target is None else self.entropy_target
        if not 0 < target <= math.log2(n) + 1e-12:
            raise ValueError(f"entropy target must be in (0, log2 N]; got {target}")
        object.__setattr__(self, "concentration", dirichlet_concentration(n, target))

    @staticmethod
    @lru_cache(maxsize=256)
    def _prompt_digest(prompt: str) -> bytes:
        return hashlib.blake2b(prompt.encode("utf-8"), digest_size=16).digest()

    def next_distribution(self, prompt: str, prior_tokens: Sequence[int]) -> np.ndarray:
        n = self.vocabulary.size
        _check_prior(prior_tokens, n)
        window = np.asarray(list(prior_tokens[-self.context_window :]), dtype=">u4")
        h = hashlib.blake2b(digest_size=16)
        h.update(int(self.seed).to_bytes(8, "big", signed=True))
        h.update(self._prompt_digest(prompt))
        h.update(len(prior_tokens).to_bytes(8, "big"))
        h.update(window.tobytes())
        rng = np.random.Generator(np.random.PCG64(int.from_bytes(h.digest(), "big")))
        # Normalized Gamma(a) draws are a Dirichlet(a, ..., a) sample.
        g = rng.standard_gamma(self.concentration, n)
        return g / g.sum()


class NGramModel:
    """Additive-smoothing n-gram model over a fixed vocabulary.

    ``order`` is the number of context tokens. Contexts never seen in training
    back off to the longest seen suffix (down to the unigram table).
    """

    def __init__(self, vocabulary: Vocabulary, order: int = 3, alpha: float = 0.1):
        if order < 0:
            raise ValueError("order must be >= 0")
        if alpha <= 0:
            raise ValueError("smoothing constant must be positive")
        self.vocabulary = vocabulary
        self.order = order
        self.alpha = alpha
        self._counts: dict[tuple[int, ...], dict[int, int]] = defaultdict(lambda: defaultdict(int))
        self._cache: dict[tuple[int, ...], np.ndarray] = {}

    def fit_tokens(self, sequences: Sequence[Sequence[int]]) -> "NGramModel":
        ter = self.vocabulary.ter_index
        for seq in sequences:
            seq = list(seq) + [ter]
            for j, tok in enumerate(seq):
                for c in range(0, self.order + 1):
                    if c > j:
                        break
                    self._counts[tuple(seq[j - c : j])][tok] += 1
        self._cache.clear()
        return self

    def fit_text(self, text: str) -> "NGramModel":
        """Train on a corpus; each non-empty line is one sequence ending in ter."""
        lines = [ln for ln in text.splitlines() if ln.strip()]
        return self.fit_tokens([self.vocabulary.encode(ln) for ln in lines])

    @classmethod
    def from_corpus(cls, text: str, order: int = 3, alpha: float = 0.1) -> "NGramModel":
        return cls(Vocabulary.from_corpus(text), order, alpha).fit_text(text)

    def counts(self, context: Sequence[int]) -> dict[int, int]:
        return dict(self._counts.get(tuple(context), {}))

    def next_distribution(self, prompt: str, prior_tokens: Sequence[int]) -> np.ndarray:
        n = self.vocabulary.size
        _check_prior(prior_tokens, n)
        history = [t for t in self.vocabulary.encode(prompt)] + list(prior_tokens)
        context: tuple[int, ...] = ()
        for c in range(min(self.order, len(history)), -1, -1):
            cand = tuple(history[len(history) - c :]) if c else ()
            if cand in self._counts:
                context = cand
                break
        cached = self._cache.get(context)
        if cached is not None:
            return cached.copy()
        row = np.full(n, self.alpha)
        for tok, cnt in self._counts.get(context, {}).items():
            row[tok] += cnt
        p = row / row.sum()
        self._cache[context] = p
        return p.copy()


class RemoteError(RuntimeError):
    """Non-retryable failure from a remote provider."""


class RetryableError(RemoteError):
    """Transport or rate-limit failure worth retrying."""


Transport = Callable[[str, dict[str, Any], dict[str, str]], dict[str, Any]]


def _urllib_transport(url: str, payload: dict[str, Any], headers: dict[str, str]) -> dict[str, Any]:
    req = urllib.request.Request(
        url, data=json.dumps(payload).encode("utf-8"), headers=headers, method="POST"
    )
    try:
        with urllib.request.urlopen(req, timeout=60) as resp:
            return json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as e:
        if e.code == 429 or e.code >= 500:
            raise RetryableError(f"HTTP {e.code} from {url}") from e
        raise RemoteError(f"HTTP {e.code} from {url}") from e
    except (urllib.error.URLError, TimeoutError, ConnectionError) as e:
        raise RetryableError(str(e)) from e


@dataclass
class RemoteEndpoint:
    """OpenAI-compatible endpoint with bounded exponential-backoff retries."""

    base_url: str
    model_name: str
    api_key_env: str = "OPENAI_API_KEY"
    max_retries: int = 4
    backoff: float = 0.5
    transport: Transport = _urllib_transport

    def post(self, route: str, payload: dict[str, Any]) -> dict[str, Any]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.api_key_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        url = self.base_url.rstrip("/") + route
        payload = {"model": self.model_name, **payload}
        delay = self.backoff
        for attempt in range(self.max_retries + 1):
            try:
                return self.transport(url, payload, headers)
            except RetryableError as e:
                if attempt == self.max_retries:
                    raise RemoteError(f"giving up after {attempt + 1} attempts: {e}") from e
                log.warning("remote call failed (%s); retrying in %.1fs", e, delay)
                time.sleep(delay)
                delay *= 2
        raise AssertionError("unreachable")


class RemoteCompletionModel:
    """Next-token distributions from a completions endpoint's top logprobs.

    Chat-style APIs expose at most a few top logprobs, so the distribution is
    only approximate: probability mass not covered by returned tokens that are
    in the vocabulary is spread uniformly over the remaining entries.
    """

    def __init__(self, vocabulary: Vocabulary, endpoint: RemoteEndpoint, top_logprobs: int = 20):
        self.vocabulary = vocabulary
        self.endpoint = endpoint
        self.top_logprobs = top_logprobs

    def next_distribution(self, prompt: str, prior_tokens: Sequence[int]) -> np.ndarray:
        n = self.vocabulary.size
        _check_prior(prior_tokens, n)
        text = " ".join(p for p in (prompt, self.vocabulary.decode(prior_tokens)) if p)
        resp = self.endpoint.post(
            "/completions",
            {"prompt": text, "max_tokens": 1, "logprobs": self.top_logprobs, "temperature": 1.0},
        )
        try:
            top = resp["choices"][0]["logprobs"]["top_logprobs"][0]
        except (KeyError, IndexError, TypeError) as e:
            raise RemoteError("response carries no top_logprobs") from e
        p = np.zeros(n)
        for tok, lp in top.items():
            word = tok.strip()
            if word in self.vocabulary:
                p[self.vocabulary.index(word)] += math.exp(lp)
        covered = p.sum()
        if covered >= 1.0:
            return p / covered
        rest = p == 0
        if rest.any():
            p[rest] = (1.0 - covered) / rest.sum()
        return p / p.sum()

    def sample_text(self, prompt: str, max_tokens: int, seed: int) -> str:
        resp = self.endpoint.post(
            "/completions",
            {"prompt": prompt, "max_tokens": max_tokens, "temperature": 1.0, "seed": seed},
        )
        try:
            return resp["choices"][0]["text"].strip()
        except (KeyError, IndexError, TypeError) as e:
            raise RemoteError("malformed completion response") from e


def draw(p: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF sample of one index from (possibly unnormalized) weights ``p``."""
    cdf = np.cumsum(p)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(p) - 1)


def next_distribution(model: LanguageModel, prompt: str, prior_tokens: Sequence[int]) -> np.ndarray:
    return model.next_distribution(prompt, prior_tokens)


def sample_response(
    model: LanguageModel, prompt: str, max_tokens: int, rng_seed: int | np.random.Generator
) -> list[int]:
    """Sample tokens until ter is drawn (ter included) or ``max_tokens`` is reached."""
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    ter = model.vocabulary.ter_index
    out: list[int] = []
    while len(out) < max_tokens:
        p = model.next_distribution(prompt, out)
        tok = draw(p, rng)
        out.append(tok)
        if tok == ter:
            break
    return out


def generate_tokens(
    model: LanguageModel, prompt: str, n_tokens: int, rng_seed: int | np.random.Generator
) -> list[int]:
    """Exactly ``n_tokens`` unperturbed tokens, ter excluded.

    Consumes the generator the same way the watermark encoder does, so an
    all-zero message and this function yield identical text for one seed.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    ter = model.vocabulary.ter_index
    out: list[int] = []
    for _ in range(n_tokens):
        p = np.array(model.next_distribution(prompt, out), dtype=np.float64)
        p[ter] = 0.0
        if p.sum() <= 0:
            p = np.ones_like(p)
            p[ter] = 0.0
        out.append(draw(p, rng))
    return out


def sample_text(model: Any, prompt: str, max_tokens: int, seed: int) -> str:
    """Candidate text for the embedding codec; local models render sampled tokens."""
    if hasattr(model, "sample_text"):
        return model.sample_text(prompt, max_tokens, seed)
    return model.vocabulary.decode(sample_response(model, prompt, max_tokens, seed))


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    vocabulary: Vocabulary
    entropy_target: float | None = None
    order: int = 3
    seed: int = 0
    endpoint: str | None = None
    model_name: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    corpus_text: str | None = None

    def build(self) -> LanguageModel:
        if self.kind == "synthetic":
            return SyntheticModel(self.vocabulary, seed=self.seed, entropy_target=self.entropy_target)
        if self.kind == "ngram":
            if self.corpus_text is None:
                raise ValueError("ngram model needs a training corpus")
            return NGramModel(self.vocabulary, self.order).fit_text(self.corpus_text)
        if self.kind == "remote":
            if not self.endpoint or not self.model_name:
                raise ValueError("remote model needs endpoint and model_name")
            return RemoteCompletionModel(
                self.vocabulary, RemoteEndpoint(self.endpoint, self.model_name, self.api_key_env)
            )
        raise ValueError(f"unknown model kind {self.kind!r}")
