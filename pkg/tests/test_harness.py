from __future__ import annotations

import csv
import io
from functools import partial

import pytest

from robuststego.channel import Vocabulary
from robuststego.harness import CostModel, Profile, total_cost
from robuststego.harness.experiments import (
    EXPERIMENTS,
    SCHEMAS,
    cost_table,
    delta_vs_length,
    drift,
    recurring_cgrams,
    recurring_count,
    run_experiment,
    run_trials,
    trial_seed,
    watermark_attack_trial,
    write_csv,
)
from robuststego.langmodel import SyntheticModel


def test_cost_examples():
    assert total_cost(CostModel(0, 1, 500, 100, 1e-7, 4e-7)) == 0
    base = CostModel(8, 1, 500, 100, 1e-7, 4e-7, c=2)
    assert total_cost(base) == pytest.approx(8 * 2 * (5e-5 + 4e-5)) == pytest.approx(1.44e-3)
    assert total_cost(CostModel(8, 1, 500, 100, 1e-7, 4e-7)) == pytest.approx(1.44e-3)  # c defaults to 2^h
    doubled = CostModel(8, 1, 500, 100, 2e-7, 8e-7, c=2)
    assert total_cost(doubled) == pytest.approx(2 * total_cost(base))
    with pytest.raises(ValueError):
        CostModel(8, 0, 500, 100, 1e-7, 4e-7)


def test_recurring_count_brute_force():
    import random

    rng = random.Random(0)
    for _ in range(200):
        toks = [rng.randint(0, 4) for _ in range(rng.randint(0, 30))]
        c = rng.randint(1, 4)
        grams = [tuple(toks[i : i + c]) for i in range(len(toks) - c + 1)]
        ref = sum(1 for i, g in enumerate(grams) if any(g == h for j, h in enumerate(grams) if j != i))
        assert recurring_count(toks, c) == ref


def test_recurring_cgrams_trend():
    model = SyntheticModel(Vocabulary.synthetic(64), seed=0)
    rows = recurring_cgrams(model, 100, 100, [1, 2, 3, 100], seed=1)
    m = {r["c"]: r["mean_recurring"] for r in rows}
    assert m[100] == 0
    assert m[1] > 50 * m[3]
    assert m[1] >= m[2] >= m[3]


def test_delta_vs_length():
    rows = delta_vs_length(3, 0.05, [0.1, 0.2, 0.3, 0.5])
    ts = [r["required_length"] for r in rows]
    assert 7000 <= ts[0] <= 8500
    assert all(a > b for a, b in zip(ts, ts[1:]))
    assert delta_vs_length(1, 0.05, [0.5])[0]["required_length"] == 25


def test_csv_schemas():
    assert set(EXPERIMENTS) == set(SCHEMAS)
    rows = cost_table([CostModel(8, 1, 500, 100, 1e-7, 4e-7)])
    text = write_csv(rows, SCHEMAS["cost"])
    reader = csv.DictReader(io.StringIO(text))
    assert tuple(reader.fieldnames) == SCHEMAS["cost"]
    assert float(next(reader)["total_cost"]) == pytest.approx(1.44e-3)
    assert tuple(delta_vs_length(1, 0.05, [0.5])[0]) == SCHEMAS["delta_vs_length"]
    row = drift(["a b c d e f"], [{"kind": "ngram_shuffle", "n": 1}], [0.5])[0]
    assert tuple(row) == SCHEMAS["drift"]


def test_trial_seeds_are_distinct_and_signed_safe():
    seeds = [trial_seed(5, i) for i in range(1000)]
    assert len(set(seeds)) == 1000 and max(seeds) < 2**63


def test_run_trials_parallel_matches_serial():
    profile = {
        "scheme": "watermark",
        "model": {"kind": "synthetic", "vocab_size": 64, "seed": 0},
        "watermark": {"delta": 0.2, "c": 3, "T": 150, "epsilon": 0.05, "n_bits": 2},
    }
    fn = partial(watermark_attack_trial, profile, {"kind": "ngram_shuffle", "n": 3}, [0.0, 0.5])
    serial = run_trials(fn, 4, 9)
    parallel = run_trials(fn, 4, 9, workers=2)
    assert [r.text for r in serial] == [r.text for r in parallel]
    assert [r.decoded for r in serial] == [r.decoded for r in parallel]


@pytest.mark.parametrize(
    "config",
    [
        {"which": "delta_vs_length"},
        {"which": "cost"},
        {"which": "recurring_cgrams", "samples": 5, "tokens_per_sample": 40, "seed": 2},
        {"which": "drift", "samples": 3, "tokens_per_sample": 30, "seed": 2, "fractions": [0.0, 0.5]},
        {"which": "rejection_sampling", "hash_bits": [1], "chunks": 20, "seed": 2},
    ],
)
def test_experiments_reproducible(config):
    a = write_csv(run_experiment(config), SCHEMAS[config["which"]])
    b = write_csv(run_experiment(config), SCHEMAS[config["which"]])
    assert a == b
    assert a.splitlines()[0] == ",".join(SCHEMAS[config["which"]])


def test_attack_sweep_embedding_small():
    config = {
        "which": "attack_sweep",
        "trials": 2,
        "seed": 1,
        "message_bits": 4,
        "fractions": [0.0],
        "attacks": [{"kind": "synonym"}],
        "profile": {
            "scheme": "embedding",
            "model": {"kind": "ngram", "corpus": "builtin"},
            "lsh": {"kind": "random_projection", "hash_bits": 1, "dimension": 256, "seed": "00"},
            "ecc": {"kind": "none"},
            "chunk_tokens": 20,
        },
    }
    rows = run_experiment(config)
    assert rows[0]["perfect_recovery"] == 1.0 and rows[0]["mean_consistency"] == 1.0


def test_unknown_experiment():
    with pytest.raises(ValueError):
        run_experiment({"which": "figure-99"})


def test_profile_errors(tmp_path):
    with pytest.raises(ValueError):
        Profile({"scheme": "other"}).scheme
    with pytest.raises(ValueError):
        Profile({"scheme": "embedding"}).lsh()
    with pytest.raises(ValueError):
        Profile({"scheme": "embedding", "model": {"kind": "gpt"}}).model()
