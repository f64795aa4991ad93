"""Multi-key watermark encoder and decoder."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from ..channel import (
    ChannelHistory,
    HiddenMessage,
    StegoDocument,
    Vocabulary,
    WatermarkKeySet,
    bits_of,
    derive_salt,
)
from ..langmodel import draw
from ..prf import PrfContext, build_cgram, prf_label_vector, prf_select_index
from .detection import count_threshold, required_length, z_score, z_threshold
from .perturb import get_perturbation

log = logging.getLogger(__name__)


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class WatermarkParams:
    delta: float
    c: int
    T: int
    epsilon: float
    n_bits: int
    safety_factor: float = 1.0
    perturbation: str = "proportional"

    def __post_init__(self) -> None:
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1); got {self.delta}")
        if self.c < 1:
            raise ValueError("c must be >= 1")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1); got {self.epsilon}")
        if self.n_bits < 1:
            raise ValueError("n_bits must be >= 1")
        if self.safety_factor < 1.0:
            raise ValueError("safety_factor must be >= 1")
        get_perturbation(self.perturbation)

    @classmethod
    def recommended(
        cls,
        n_bits: int,
        delta: float,
        epsilon: float,
        c: int = 3,
        safety_factor: float = 1.0,
        perturbation: str = "proportional",
    ) -> "WatermarkParams":
        T = required_length(n_bits, delta, epsilon, safety_factor)
        return cls(delta, c, T, epsilon, n_bits, safety_factor, perturbation)

    @property
    def z_threshold(self) -> float:
        return z_threshold(self.n_bits, self.epsilon)

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "WatermarkParams":
        return cls(**obj)


@dataclass
class DetectionReport:
    counters: list[int]
    fractions: list[float]
    z_scores: list[float]
    threshold: float
    decisions: list[int]
    T_counted: int
    count_threshold: float = field(default=0.0)

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


# on_step(position, key, ctx, labels) -- lets tests observe the encoder's PRF calls.
StepHook = Callable[[int, bytes, PrfContext, np.ndarray], None]


def _prompt_tokens(vocab: Vocabulary, prompt: str) -> list[int]:
    out = []
    for w in prompt.split():
        if w in vocab or vocab.unk_index is not None:
            out.append(vocab.index(w))
    return out


def encode(
    keys: WatermarkKeySet,
    message: HiddenMessage | Sequence[int],
    history: ChannelHistory,
    model: Any,
    params: WatermarkParams,
    rng_seed: int,
    on_step: StepHook | None = None,
) -> StegoDocument:
    """Generate ``params.T`` tokens whose label statistics carry ``message``.

    At position j the key is picked among the subkeys of the 1-bits with the
    master-keyed selector; an all-zero message is sampled without perturbation.
    Ter draws are excluded so the document has exactly ``T`` tokens.
    """
    bits = bits_of(message)
    if len(bits) != params.n_bits or len(keys) != params.n_bits:
        raise ValueError(
            f"message has {len(bits)} bits, params expect {params.n_bits}, key set has {len(keys)}"
        )
    needed = required_length(params.n_bits, params.delta, params.epsilon, params.safety_factor)
    if params.T < needed:
        log.warning("covertext length %d is below the recommended %d tokens", params.T, needed)

    vocab: Vocabulary = model.vocabulary
    n = vocab.size
    ter = vocab.ter_index
    salt = derive_salt(history)
    active = [k for k, b in zip(keys.subkeys, bits) if b]
    prompt = history.context_text()
    prompt_tokens = _prompt_tokens(vocab, prompt)
    shift = get_perturbation(params.perturbation)
    rng = np.random.default_rng(rng_seed)

    tokens: list[int] = []
    for j in range(1, params.T + 1):
        p = np.asarray(model.next_distribution(prompt, tokens), dtype=np.float64)
        if active:
            key = active[prf_select_index(keys.master_key, j, len(active))]
            ctx = PrfContext(salt, build_cgram(tokens, params.c, prompt_tokens, ter))
            labels = prf_label_vector(key, ctx, n)
            if on_step is not None:
                on_step(j, key, ctx, labels)
            p = shift(p, labels, params.delta)
        p = p.copy()
        p[ter] = 0.0
        total = p.sum()
        if total <= 0:
            p = np.ones(n)
            p[ter] = 0.0
            total = p.sum()
        tokens.append(draw(p, rng))

    return StegoDocument(
        scheme="watermark",
        text=vocab.decode(tokens),
        token_indices=tuple(tokens),
        params=params.to_json(),
        history_digest=history.digest(),
    )


def label_hits(
    keys: WatermarkKeySet, salt: bytes, tokens: Sequence[int], c: int, n: int
) -> np.ndarray:
    """hits[i, j] = label of the token at scored position j under subkey i."""
    scored = max(len(tokens) - c, 0)
    hits = np.zeros((len(keys), scored), dtype=np.uint8)
    for j in range(scored):
        ctx = PrfContext(salt, tuple(tokens[j : j + c]))
        q = tokens[j + c]
        for i, key in enumerate(keys.subkeys):
            hits[i, j] = prf_label_vector(key, ctx, n)[q]
    return hits


def decode(
    keys: WatermarkKeySet,
    history: ChannelHistory,
    stego: StegoDocument | str | Sequence[int],
    params: WatermarkParams,
    vocabulary: Vocabulary,
) -> tuple[HiddenMessage, DetectionReport]:
    """Score every position that has ``c`` genuine predecessors and Z-test each key."""
    if isinstance(stego, StegoDocument):
        if stego.token_indices is not None:
            tokens = list(stego.token_indices)
        else:
            # attacked text may contain out-of-vocabulary words
            tokens = vocabulary.encode_lenient(stego.text)
    elif isinstance(stego, str):
        tokens = vocabulary.encode_lenient(stego)
    else:
        tokens = [int(t) for t in stego]
    if not tokens:
        raise DecodeError("empty stegotext")
    n = vocabulary.size
    bad = [t for t in tokens if not 0 <= t < n]
    if bad:
        raise DecodeError(f"token index {bad[0]} outside vocabulary of size {n}")
    if len(keys) != params.n_bits:
        raise ValueError(f"key set has {len(keys)} subkeys, params expect {params.n_bits}")

    salt = derive_salt(history)
    hits = label_hits(keys, salt, tokens, params.c, n)
    total = hits.shape[1]
    counters = [int(x) for x in hits.sum(axis=1)]
    z_th = params.z_threshold
    if total:
        fractions = [ctr / total for ctr in counters]
    else:
        fractions = [0.5] * len(counters)
    zs = [z_score(ctr, total) for ctr in counters]
    decisions = [1 if total and z > z_th else 0 for z in zs]
    report = DetectionReport(
        counters=counters,
        fractions=fractions,
        z_scores=zs,
        threshold=z_th,
        decisions=decisions,
        T_counted=total,
        count_threshold=count_threshold(total, z_th) if total else math.inf,
    )
    return HiddenMessage(tuple(decisions)), report
