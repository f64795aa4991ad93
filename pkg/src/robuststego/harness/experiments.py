"""Desk-scale experiments. Each one returns rows (dicts) and can write them as CSV.

Trials are seeded independently from ``(master_seed, trial_index)`` and
results come back in trial order whether or not a process pool is used, so a
run is reproducible byte-for-byte from its seed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from ..attacks import (
    AttackConfig,
    apply_attack,
    attack_chunks,
    embedding_drift,
    local_consistency,
)
from ..channel import ChannelHistory, Vocabulary, WatermarkKeySet
from ..ecc import ecc_decode, ecc_encode
from ..embedding import codec as embed_codec
from ..embedding.embedders import ToyEmbedder
from ..embedding.lsh import OracleLsh
from ..langmodel import SyntheticModel, generate_tokens
from ..watermark import codec as wm_codec
from ..watermark.detection import required_length
from .cost import CostModel, total_cost
from .profile import Profile

SCHEMAS: dict[str, tuple[str, ...]] = {
    "recurring_cgrams": ("c", "mean_recurring", "samples", "tokens_per_sample"),
    "delta_vs_length": ("n", "epsilon", "delta", "safety_factor", "required_length"),
    "rejection_sampling": (
        "hash_bits",
        "chunks",
        "mean_attempts",
        "expected_attempts",
        "relative_error",
        "misses",
    ),
    "drift": (
        "attack",
        "mode",
        "fraction",
        "mean_drift_euclid",
        "mean_drift_cosine",
        "mean_consistency",
        "samples",
    ),
    "attack_sweep": (
        "attack",
        "mode",
        "fraction",
        "bitwise_recovery",
        "perfect_recovery",
        "mean_drift_euclid",
        "mean_drift_cosine",
        "mean_consistency",
    ),
    "cost": ("n", "h", "c", "W", "T_out", "p_in", "p_out", "total_queries", "total_cost"),
}
EXPERIMENTS = tuple(SCHEMAS)

Row = dict[str, Any]


# -- trial plumbing ---------------------------------------------------------


def trial_seed(master_seed: int, index: int) -> int:
    """63-bit seed so it also fits the signed 8-byte encodings used downstream."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1, np.uint64)[0]) >> 1


def run_trials(
    fn: Callable[[int, int], Any], count: int, master_seed: int, workers: int = 1
) -> list[Any]:
    """``[fn(i, trial_seed(master_seed, i)) for i in range(count)]``, optionally in parallel."""
    seeds = [trial_seed(master_seed, i) for i in range(count)]
    if workers <= 1 or count <= 1:
        return [fn(i, s) for i, s in enumerate(seeds)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count), seeds))


def trial_key(seed: int, n_bits: int) -> WatermarkKeySet:
    """Deterministic key set for a seeded trial (never use for real traffic)."""
    master = hashlib.sha256(b"trial-key" + seed.to_bytes(8, "big")).digest()
    return WatermarkKeySet.derive(master, n_bits)


_MESSAGE_STREAM = 0x6D657373  # keeps message bits independent of other seed users


def random_bits(seed: int, n: int) -> tuple[int, ...]:
    rng = np.random.default_rng([seed, _MESSAGE_STREAM])
    return tuple(int(b) for b in rng.integers(0, 2, n))


def write_csv(rows: Sequence[Row], columns: Sequence[str], path: str | os.PathLike | None = None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row[k]) for k in columns})
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _fmt(v: Any) -> Any:
    if isinstance(v, float):
        return repr(round(v, 10))
    return v


def _mean(xs: Iterable[float]) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else float("nan")


# -- recurring c-grams ------------------------------------------------------


def recurring_count(tokens: Sequence[int], c: int) -> int:
    """Number of positions whose c-gram occurs at least twice in ``tokens``."""
    if c < 1:
        raise ValueError("c must be >= 1")
    grams = [tuple(tokens[i : i + c]) for i in range(len(tokens) - c + 1)]
    counts = Counter(grams)
    return sum(1 for g in grams if counts[g] >= 2)


def recurring_cgrams(
    model: Any,
    samples: int,
    tokens_per_sample: int,
    c_values: Sequence[int],
    seed: int = 0,
    prompt: str = "",
) -> list[Row]:
    if not c_values:
        raise ValueError("empty c grid")
    seqs = [
        generate_tokens(model, prompt, tokens_per_sample, trial_seed(seed, i)) for i in range(samples)
    ]
    rows = []
    for c in c_values:
        rows.append(
            {
                "c": c,
                "mean_recurring": _mean(recurring_count(s, c) for s in seqs),
                "samples": samples,
                "tokens_per_sample": tokens_per_sample,
            }
        )
    return rows


# -- delta vs length --------------------------------------------------------


def delta_vs_length(
    n: int, epsilon: float, deltas: Sequence[float], safety_factor: float = 1.0
) -> list[Row]:
    if not deltas:
        raise ValueError("empty delta grid")
    return [
        {
            "n": n,
            "epsilon": epsilon,
            "delta": d,
            "safety_factor": safety_factor,
            "required_length": required_length(n, d, epsilon, safety_factor),
        }
        for d in deltas
    ]


# -- rejection sampling -----------------------------------------------------


def _simulated_chunks(hash_bits: int, chunks: int, seed: int, chunk_tokens: int) -> tuple[int, list[int]]:
    vocab = Vocabulary.synthetic(64)
    model = SyntheticModel(vocab, seed=seed)
    lsh = OracleLsh(hash_bits, 256, seed=seed, mode="random")
    bits = random_bits(seed, hash_bits * chunks)
    _, report = embed_codec.encode(
        bits, model, ToyEmbedder(), lsh, ChannelHistory(), max_attempts=100_000,
        chunk_tokens=chunk_tokens, seed=seed,
    )
    return len(report.misses), report.attempts


def rejection_sampling(
    hash_bits_grid: Sequence[int],
    chunks: int = 200,
    seed: int = 0,
    chunks_per_trial: int = 10,
    chunk_tokens: int = 6,
    workers: int = 1,
) -> list[Row]:
    """Attempts per accepted chunk against a simulated uniform hash."""
    if not hash_bits_grid:
        raise ValueError("empty hash_bits grid")
    rows = []
    for h in hash_bits_grid:
        trials = math.ceil(chunks / chunks_per_trial)
        fn = partial(_rejection_trial, h, chunks_per_trial, chunk_tokens)
        results = run_trials(fn, trials, seed * 1000 + h, workers)
        attempts = [a for _, att in results for a in att][:chunks]
        misses = sum(m for m, _ in results)
        mean = _mean(attempts)
        rows.append(
            {
                "hash_bits": h,
                "chunks": len(attempts),
                "mean_attempts": mean,
                "expected_attempts": float(2**h),
                "relative_error": abs(mean - 2**h) / 2**h,
                "misses": misses,
            }
        )
    return rows


def _rejection_trial(h: int, per_trial: int, chunk_tokens: int, index: int, seed: int):
    return _simulated_chunks(h, per_trial, seed, chunk_tokens)


# -- strong robustness under an injected per-chunk flip ----------------------


def union_bound_trial(p_f: float, r: int, chunk_tokens: int, index: int, seed: int) -> bool:
    """One message of ``r`` one-bit chunks; the decoder's LSH flips each chunk w.p. ``p_f``.

    The oracle remembers every encoded embedding (radius 0), so without the
    flip decoding is exact. Returns True when the full message is recovered.
    """
    model = SyntheticModel(Vocabulary.synthetic(64), seed=seed)
    lsh = OracleLsh(1, 256, seed=seed, mode="random", radius=0.0)
    bits = random_bits(seed, r)
    doc, _ = embed_codec.encode(
        bits, model, ToyEmbedder(), lsh, ChannelHistory(), max_attempts=1000,
        chunk_tokens=chunk_tokens, seed=seed,
    )
    lsh.flip_prob = p_f
    return embed_codec.decode(doc, ToyEmbedder(), lsh, r).bits == bits


def union_bound(
    p_f: float, r: int = 8, trials: int = 1000, seed: int = 0, chunk_tokens: int = 6, workers: int = 1
) -> float:
    """Empirical full-message failure rate."""
    ok = run_trials(partial(union_bound_trial, p_f, r, chunk_tokens), trials, seed, workers)
    return 1.0 - sum(ok) / trials


# -- watermark trials -------------------------------------------------------


@dataclass(frozen=True)
class WatermarkTrial:
    bits: tuple[int, ...]
    text: str
    decoded: dict[float, tuple[int, ...]]  # keyed by attack fraction
    attacked: dict[float, str]
    z_scores: dict[float, list[float]]


def watermark_attack_trial(
    profile_raw: dict[str, Any],
    attack: dict[str, Any] | None,
    fractions: Sequence[float],
    index: int,
    seed: int,
) -> WatermarkTrial:
    """Encode a random message, then decode it after each attack fraction."""
    profile = Profile(profile_raw)
    model = _cached_model(profile)
    params = profile.watermark_params()
    keys = trial_key(seed, params.n_bits)
    bits = random_bits(seed, params.n_bits)
    history = ChannelHistory(prompt=profile.raw.get("prompt", ""))
    doc = wm_codec.encode(keys, bits, history, model, params, rng_seed=seed)
    decoded, attacked, zs = {}, {}, {}
    for f in fractions:
        if attack is None or f == 0:
            stego: Any = doc
            attacked[f] = doc.text
        else:
            cfg = AttackConfig(**{**attack, "fraction": f, "seed": seed})
            stego = attacked[f] = apply_attack(doc.text, cfg)
        msg, report = wm_codec.decode(keys, history, stego, params, model.vocabulary)
        decoded[f] = msg.bits
        zs[f] = report.z_scores
    return WatermarkTrial(bits, doc.text, decoded, attacked, zs)


_MODEL_CACHE: dict[str, Any] = {}


def _cached_model(profile: Profile) -> Any:
    key = json.dumps(profile.raw.get("model"), sort_keys=True) + str(profile.base_dir)
    if key not in _MODEL_CACHE:
        _MODEL_CACHE[key] = profile.model()
    return _MODEL_CACHE[key]


def null_trial(profile_raw: dict[str, Any], index: int, seed: int) -> list[int]:
    """Per-key decisions on unwatermarked text of the profile's length."""
    profile = Profile(profile_raw)
    model = _cached_model(profile)
    params = profile.watermark_params()
    keys = trial_key(seed, params.n_bits)
    prompt = profile.raw.get("prompt", "")
    tokens = generate_tokens(model, prompt, params.T, seed)
    _, report = wm_codec.decode(keys, ChannelHistory(prompt=prompt), tokens, params, model.vocabulary)
    return report.decisions


# -- embedding trials -------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingTrial:
    bits: tuple[int, ...]
    text: str
    decoded: dict[float, tuple[int, ...]]
    attacked: dict[float, str]
    misses: int


def embedding_attack_trial(
    profile_raw: dict[str, Any],
    attack: dict[str, Any] | None,
    fractions: Sequence[float],
    message_bits: int,
    index: int,
    seed: int,
) -> EmbeddingTrial:
    """ECC-encode a random message, embed it, attack each chunk, decode."""
    profile = Profile(profile_raw)
    model = _cached_model(profile)
    embedder = profile.embedder()
    lsh = profile.lsh()
    ecc = profile.ecc()
    bits = random_bits(seed, message_bits)
    coded = ecc_encode(ecc, bits)
    history = ChannelHistory(prompt=profile.raw.get("prompt", ""))
    doc, report = embed_codec.encode(
        coded, model, embedder, lsh, history, profile.max_attempts,
        chunk_tokens=profile.chunk_tokens, seed=seed,
    )
    decoded, attacked = {}, {}
    for f in fractions:
        if attack is None or f == 0:
            text = doc.text
        else:
            text = attack_chunks(doc.text, AttackConfig(**{**attack, "fraction": f, "seed": seed}))
        attacked[f] = text
        try:
            got = embed_codec.decode(text, embedder, lsh, len(coded)).bits
            decoded[f] = tuple(ecc_decode(ecc, got))
        except (embed_codec.DecodeError, ValueError):
            decoded[f] = ()
    return EmbeddingTrial(bits, doc.text, decoded, attacked, len(report.misses))


# -- drift ------------------------------------------------------------------


def drift(
    texts: Sequence[str],
    attacks: Sequence[dict[str, Any]],
    fractions: Sequence[float],
    seed: int = 0,
    embedder: Any = None,
    k: int = 3,
) -> list[Row]:
    """Embedding drift and k-word consistency of each attack at each fraction."""
    if not texts or not attacks or not fractions:
        raise ValueError("texts, attacks and fractions must be non-empty")
    embedder = embedder or ToyEmbedder()
    rows = []
    for a in attacks:
        for f in fractions:
            eu, co, cons = [], [], []
            for i, t in enumerate(texts):
                cfg = AttackConfig(**{**a, "fraction": f, "seed": trial_seed(seed, i)})
                out = apply_attack(t, cfg)
                e, c = embedding_drift(t, out, embedder)
                eu.append(e)
                co.append(c)
                cons.append(local_consistency(t, out, k))
            rows.append(
                {
                    "attack": a["kind"],
                    "mode": a.get("mode", "global"),
                    "fraction": f,
                    "mean_drift_euclid": _mean(eu),
                    "mean_drift_cosine": _mean(co),
                    "mean_consistency": _mean(cons),
                    "samples": len(texts),
                }
            )
    return rows


# -- attack sweep -----------------------------------------------------------


def attack_sweep(
    profile: Profile,
    attacks: Sequence[dict[str, Any]],
    fractions: Sequence[float],
    trials: int,
    seed: int = 0,
    message_bits: int = 8,
    k: int = 3,
    workers: int = 1,
) -> list[Row]:
    """Recovery, drift and consistency for every (attack, fraction) cell.

    Each trial encodes once and applies every fraction to the same stegotext,
    so cells in one row of the grid are paired.
    """
    if not attacks or not fractions:
        raise ValueError("attack sweep needs attacks and fractions")
    embedder = profile.embedder() if "embedder" in profile.raw else ToyEmbedder()
    rows = []
    for a in attacks:
        a = {key: v for key, v in a.items() if key not in ("fraction", "seed")}
        if profile.scheme == "watermark":
            fn = partial(watermark_attack_trial, profile.raw, a, list(fractions))
        else:
            fn = partial(embedding_attack_trial, profile.raw, a, list(fractions), message_bits)
        results = run_trials(fn, trials, seed, workers)
        for f in fractions:
            bitwise, perfect, eu, co, cons = [], [], [], [], []
            for res in results:
                got = res.decoded[f]
                correct = sum(x == y for x, y in zip(res.bits, got))
                bitwise.append(correct / len(res.bits))
                perfect.append(float(got == res.bits))
                e, c = embedding_drift(res.text, res.attacked[f], embedder)
                eu.append(e)
                co.append(c)
                cons.append(local_consistency(res.text, res.attacked[f], k))
            rows.append(
                {
                    "attack": a["kind"],
                    "mode": a.get("mode", "global"),
                    "fraction": f,
                    "bitwise_recovery": _mean(bitwise),
                    "perfect_recovery": _mean(perfect),
                    "mean_drift_euclid": _mean(eu),
                    "mean_drift_cosine": _mean(co),
                    "mean_consistency": _mean(cons),
                }
            )
    return rows


# -- cost -------------------------------------------------------------------


def cost_table(models: Sequence[CostModel]) -> list[Row]:
    if not models:
        raise ValueError("empty cost grid")
    return [
        {
            "n": m.n,
            "h": m.h,
            "c": m.queries_per_chunk,
            "W": m.W,
            "T_out": m.T_out,
            "p_in": m.p_in,
            "p_out": m.p_out,
            "total_queries": m.total_queries,
            "total_cost": total_cost(m),
        }
        for m in models
    ]


# -- config-file driver -----------------------------------------------------


def run_experiment(config: dict[str, Any], base_dir: Path | None = None, workers: int = 1) -> list[Row]:
    """Dispatch on ``config["which"]``; see the README for each config's keys."""
    which = config.get("which")
    seed = int(config.get("seed", 0))
    base = base_dir or Path.cwd()
    if which == "recurring_cgrams":
        profile = Profile(config.get("profile") or _default_synthetic(), base)
        return recurring_cgrams(
            profile.model(),
            int(config.get("samples", 100)),
            int(config.get("tokens_per_sample", 100)),
            list(config.get("c_values", [1, 2, 3, 4, 5])),
            seed,
        )
    if which == "delta_vs_length":
        return delta_vs_length(
            int(config.get("n", 3)),
            float(config.get("epsilon", 0.05)),
            list(config.get("deltas", [0.05, 0.1, 0.2, 0.3, 0.5])),
            float(config.get("safety_factor", 1.0)),
        )
    if which == "rejection_sampling":
        return rejection_sampling(
            list(config.get("hash_bits", [1, 2, 4])), int(config.get("chunks", 200)), seed,
            workers=workers,
        )
    if which == "drift":
        profile = Profile(config.get("profile") or _default_ngram(), base)
        model = profile.model()
        n_texts = int(config.get("samples", 20))
        tokens = int(config.get("tokens_per_sample", 60))
        texts = [
            model.vocabulary.decode(generate_tokens(model, "", tokens, trial_seed(seed, i)))
            for i in range(n_texts)
        ]
        return drift(
            texts,
            list(config.get("attacks", _default_attacks())),
            list(config.get("fractions", [0.0, 0.1, 0.25, 0.5])),
            seed,
            profile.embedder(),
            int(config.get("consistency_k", 3)),
        )
    if which == "attack_sweep":
        profile = Profile(config["profile"], base)
        return attack_sweep(
            profile,
            list(config.get("attacks", _default_attacks())),
            list(config.get("fractions", [0.0, 0.1, 0.2])),
            int(config.get("trials", 20)),
            seed,
            int(config.get("message_bits", 8)),
            int(config.get("consistency_k", 3)),
            workers,
        )
    if which == "cost":
        grid = config.get("grid") or [{"n": 8, "h": 1, "W": 500, "T_out": 100, "p_in": 1e-7, "p_out": 4e-7}]
        return cost_table([CostModel(**g) for g in grid])
    raise ValueError(f"unknown experiment {which!r}; choose from {', '.join(EXPERIMENTS)}")


def _default_synthetic() -> dict[str, Any]:
    return {"scheme": "watermark", "model": {"kind": "synthetic", "vocab_size": 64, "seed": 0}}


def _default_ngram() -> dict[str, Any]:
    return {"scheme": "embedding", "model": {"kind": "ngram", "corpus": "builtin"}}


def _default_attacks() -> list[dict[str, Any]]:
    return [
        {"kind": "ngram_shuffle", "mode": "global", "n": 3},
        {"kind": "synonym", "mode": "global"},
        {"kind": "paraphrase", "mode": "local"},
    ]
