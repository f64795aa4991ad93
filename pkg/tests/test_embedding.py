from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from robuststego.channel import ChannelHistory, Vocabulary
from robuststego.embedding import (
    ChunkPlan,
    DecodeError,
    OracleLsh,
    PcaLsh,
    RandomProjectionLsh,
    ToyEmbedder,
    cosine,
    decode,
    embed_text,
    encode,
    load_lsh,
    lsh_from_json,
    save_lsh,
    split_chunks,
    train_pca_lsh,
)
from robuststego.embedding.codec import join_chunks
from robuststego.harness.profile import Profile
from robuststego.langmodel import SyntheticModel

TOY = ToyEmbedder(256)
SYN = SyntheticModel(Vocabulary.synthetic(64), seed=0)


# -- LSH ---------------------------------------------------------------------


def test_rp_examples():
    lsh = RandomProjectionLsh(1, 2, hyperplanes=np.array([[1.0, 0.0]]))
    assert lsh.hash([-0.3, 5.0]) == (0,)
    assert lsh.hash([0.3, -5.0]) == (1,)
    with pytest.raises(ValueError):
        lsh.hash([1.0, 2.0, 3.0])


@given(arrays(np.float64, 16, elements=st.floats(-10, 10)), st.floats(0.01, 100))
def test_rp_positive_scale_invariance(v, s):
    lsh = RandomProjectionLsh(8, 16, b"k")
    proj = lsh.hyperplanes @ v
    if np.all(np.abs(proj) > 1e-9):
        assert lsh.hash(v) == lsh.hash(s * v)


def test_rp_key_rebuilds_hyperplanes():
    a, b = RandomProjectionLsh(4, 32, b"key"), RandomProjectionLsh(4, 32, b"key")
    assert np.array_equal(a.hyperplanes, b.hyperplanes)
    assert not np.array_equal(a.hyperplanes, RandomProjectionLsh(4, 32, b"other").hyperplanes)


def test_pca_matches_closed_form_2x2():
    rng = np.random.default_rng(0)
    u = np.array([math.cos(0.7), math.sin(0.7)])
    w = np.array([-u[1], u[0]])
    pts = rng.normal(0, 3, (500, 1)) * u + rng.normal(0, 0.1, (500, 1)) * w + [2.0, -1.0]
    model = train_pca_lsh(pts, 1)
    c = np.cov(pts.T)
    a, b, d = c[0, 0], c[0, 1], c[1, 1]
    lam = (a + d) / 2 + math.sqrt(((a - d) / 2) ** 2 + b * b)
    ref = np.array([b, lam - a])
    ref /= np.linalg.norm(ref)
    ang = math.acos(min(1.0, abs(float(model.components[0] @ ref))))
    assert ang < 1e-3
    assert math.acos(min(1.0, abs(float(model.components[0] @ u)))) < 0.05


def test_pca_components_orthonormal():
    x = np.random.default_rng(1).normal(size=(80, 12)) @ np.random.default_rng(2).normal(size=(12, 12))
    m = train_pca_lsh(x, 5)
    assert np.allclose(m.components @ m.components.T, np.eye(5), atol=1e-6)
    assert all(a >= b for a, b in zip(m.eigenvalues, m.eigenvalues[1:]))


def test_pca_errors_and_median_balance():
    with pytest.raises(ValueError):
        train_pca_lsh(np.ones((20, 4)), 2)
    with pytest.raises(ValueError):
        train_pca_lsh(np.random.default_rng(0).normal(size=(2, 4)), 2)
    with pytest.raises(ValueError):
        train_pca_lsh(np.random.default_rng(0).normal(size=(20, 4)), 2, threshold="mode")
    x = np.random.default_rng(3).exponential(size=(201, 6))
    m = train_pca_lsh(x, 3, threshold="median")
    ones = np.mean([m.hash(v) for v in x], axis=0)
    assert np.allclose(ones, 0.5, atol=0.01)


def test_save_load_bit_exact(tmp_path):
    x = np.random.default_rng(4).normal(size=(30, 8))
    for model in (train_pca_lsh(x, 3, "median"), RandomProjectionLsh(3, 8, b"s"),
                  RandomProjectionLsh(2, 8, hyperplanes=np.random.default_rng(5).normal(size=(2, 8)))):
        path = tmp_path / f"{model.kind}.json"
        save_lsh(model, path)
        back = load_lsh(path)
        for v in x:
            assert back.hash(v) == model.hash(v)
        if isinstance(model, PcaLsh):
            assert np.array_equal(back.components, model.components)
            assert np.array_equal(back.thresholds, model.thresholds)


def test_oracle_script_radius_and_flip():
    o = OracleLsh(2, 3, script=[(1, 1), (0, 1)])
    v = np.array([1.0, 2.0, 3.0])
    assert o.hash(v) == (1, 1) and o.hash(v) == (0, 1)
    assert o.hash(v) == o.hash(v)  # keyed fallback is deterministic
    r = OracleLsh(4, 3, mode="random", radius=0.5, seed=1)
    first = r.hash(v)
    assert r.hash(v + 0.1) == first
    flipper = OracleLsh(4, 3, flip_prob=1.0, seed=2)
    clean = OracleLsh(4, 3, seed=2)
    assert all(flipper.hash(v * i) != clean.hash(v * i) for i in range(1, 20))
    assert lsh_from_json(flipper.to_json()).to_json() == flipper.to_json()


# -- toy embedder --------------------------------------------------------------


def test_toy_embedder_basics():
    a = embed_text(TOY, "the cat sat on the mat")
    assert np.array_equal(a, embed_text(TOY, "the cat sat on the mat"))
    assert np.linalg.norm(a) == pytest.approx(1.0)
    for bad in ("", "   "):
        with pytest.raises(ValueError):
            embed_text(TOY, bad)
    with pytest.raises(ValueError):
        TOY.embed("!!!")  # no word characters


def _word_sets(rng, shared, size=20):
    pool = [f"tok{i}" for i in range(5000)]
    base = rng.sample(pool, size * 2)
    a = base[:size]
    k = round(shared * size)
    b = a[:k] + base[size : size + size - k]
    return " ".join(a), " ".join(b)


def test_toy_overlap_ordering():
    rng = random.Random(5)
    wins = 0
    for _ in range(100):
        x, y = _word_sets(rng, 0.9)
        p, q = _word_sets(rng, 0.1)
        wins += cosine(TOY.embed(x), TOY.embed(y)) > cosine(TOY.embed(p), TOY.embed(q))
    assert wins == 100


def test_rp_locality_on_toy_embeddings():
    rng = random.Random(6)
    lsh = RandomProjectionLsh(1, 256, b"loc")
    near = far = 0
    for _ in range(300):
        x, y = _word_sets(rng, 0.9)
        p, q = _word_sets(rng, 0.0)
        near += lsh.hash(TOY.embed(x)) == lsh.hash(TOY.embed(y))
        far += lsh.hash(TOY.embed(p)) == lsh.hash(TOY.embed(q))
    assert near / 300 - far / 300 >= 0.2


# -- codec -----------------------------------------------------------------------


def test_chunk_plan():
    plan = ChunkPlan.from_bits([1, 0, 1, 1, 0], 2)
    assert plan.chunks == ((1, 0), (1, 1), (0, 0)) and plan.r == 3
    assert plan.message_bits() == (1, 0, 1, 1, 0)
    for n, h in [(1, 1), (7, 3), (8, 4), (9, 4)]:
        assert ChunkPlan.from_bits([0] * n, h).r == math.ceil(n / h)


def test_scripted_oracle_accepts_first_attempt():
    bits = (1, 0, 1, 1)
    script = [bits[i : i + 2] for i in (0, 2)]
    enc = OracleLsh(2, 256, script=script)
    doc, rep = encode(bits, SYN, TOY, enc, ChannelHistory(), chunk_tokens=8, seed=1)
    assert rep.attempts == [1, 1] and rep.misses == []
    dec = OracleLsh(2, 256, script=script)
    assert decode(doc, TOY, dec, 4).bits == bits


def test_round_trip_random_projection():
    lsh = RandomProjectionLsh(2, 256, b"rt")
    rng = random.Random(7)
    for t in range(5):
        bits = tuple(rng.randint(0, 1) for _ in range(6))
        doc, rep = encode(bits, SYN, TOY, lsh, ChannelHistory(prompt="w001"), 500, chunk_tokens=12, seed=t)
        assert not rep.misses
        assert len(split_chunks(doc.text)) == 3
        assert decode(doc, TOY, lsh, 6).bits == bits
        assert decode(doc.text, TOY, lsh, 6).bits == bits


def test_mean_attempts_one_bit_synthetic():
    lsh = RandomProjectionLsh(1, 256, b"att")
    bits = tuple(random.Random(8).randint(0, 1) for _ in range(200))
    _, rep = encode(bits, SYN, TOY, lsh, ChannelHistory(), 1000, chunk_tokens=8, seed=8)
    assert 1.5 <= rep.mean_attempts <= 3.5


def test_ball_exact_oracle_survives_nearby_rewrite():
    lsh = OracleLsh(1, 256, mode="random", radius=0.9, seed=3)
    bits = (1, 0, 1)
    doc, _ = encode(bits, SYN, TOY, lsh, ChannelHistory(), 200, chunk_tokens=30, seed=3)
    chunks = split_chunks(doc.text)
    moved = [" ".join(c.split()[:-1]) for c in chunks]  # drop one word per chunk
    for a, b in zip(chunks, moved):
        assert np.linalg.norm(TOY.embed(a) - TOY.embed(b)) <= 0.9
    assert decode(join_chunks(moved), TOY, lsh, 3).bits == bits


def test_chunk_isolation():
    lsh = RandomProjectionLsh(2, 256, b"iso")
    bits = (1, 1, 0, 1, 0, 0)
    doc, _ = encode(bits, SYN, TOY, lsh, ChannelHistory(), 500, chunk_tokens=12, seed=4)
    chunks = split_chunks(doc.text)
    chunks[1] = "completely unrelated replacement words about weather and rivers"
    got = decode(join_chunks(chunks), TOY, lsh, 6).bits
    assert got[:2] == bits[:2] and got[4:] == bits[4:]


def test_decode_too_few_chunks():
    lsh = RandomProjectionLsh(1, 256, b"x")
    with pytest.raises(DecodeError, match="expected 3 chunks, found 2"):
        decode("one chunk\n\nanother", TOY, lsh, 3)


def test_misses_are_reported():
    lsh = OracleLsh(4, 256, script=[(0, 0, 0, 0)] * 10)
    doc, rep = encode((1, 1, 1, 1), SYN, TOY, lsh, ChannelHistory(), 3, chunk_tokens=5, seed=0)
    assert rep.misses == [0] and rep.attempts == [3]
    assert split_chunks(doc.text)


def test_pca_prompt_pipeline():
    prof = Profile({"scheme": "embedding", "model": {"kind": "ngram", "corpus": "builtin"}})
    model = prof.model()
    from robuststego.langmodel import sample_text

    texts = [sample_text(model, "", 30, s) for s in range(40)]
    m = train_pca_lsh([TOY.embed(t) for t in texts if t.strip()], 1, "median")
    bits = (1, 0, 1, 1)
    doc, rep = encode(bits, model, TOY, m, ChannelHistory(), 200, chunk_tokens=30, seed=1)
    assert not rep.misses and decode(doc, TOY, m, 4).bits == bits
