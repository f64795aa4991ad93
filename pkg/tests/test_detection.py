from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from robuststego.watermark.detection import (
    count_threshold,
    inverse_normal_cdf,
    normal_cdf,
    p_w,
    required_length,
    z_score,
    z_threshold,
)


def phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def bisect_quantile(p: float) -> float:
    lo, hi = -40.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_pw_values():
    assert abs(p_w(0.1) - 2.2 / 4.1) < 1e-12
    assert p_w(0.0) == 0.5
    assert abs(p_w(0.5) - 3.0 / 4.5) < 1e-12
    for bad in (-0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            p_w(bad)


@given(st.floats(1e-6, 0.999))
def test_pw_above_half(d):
    assert p_w(d) > 0.5


def test_inverse_normal_reference_points():
    assert inverse_normal_cdf(0.5) == pytest.approx(0.0, abs=1e-15)
    assert inverse_normal_cdf(0.975) == pytest.approx(1.959964, abs=1e-6)
    assert inverse_normal_cdf(0.95) == pytest.approx(1.644854, abs=1e-6)
    assert inverse_normal_cdf(0.975) == pytest.approx(bisect_quantile(0.975), abs=1e-9)
    assert inverse_normal_cdf(0.95) == pytest.approx(bisect_quantile(0.95), abs=1e-9)


@given(st.floats(1e-12, 1 - 1e-12))
def test_inverse_normal_round_trip(p):
    x = inverse_normal_cdf(p)
    assert abs(phi(x) - p) < 1e-9
    assert abs(normal_cdf(x) - p) < 1e-9


def test_inverse_normal_domain():
    for bad in (0.0, 1.0, -0.2, 1.2):
        with pytest.raises(ValueError):
            inverse_normal_cdf(bad)


def test_required_length_examples():
    assert 7000 <= required_length(3, 0.1, 0.05) <= 8500
    z = bisect_quantile(0.95)
    assert required_length(1, 0.5, 0.05) == math.ceil(z * z / (4 * (p_w(0.5) - 0.5) ** 2)) == 25
    assert required_length(1, 0.5, 0.05, safety_factor=2.0) == 50


def test_required_length_monotone():
    eps = [0.2, 0.1, 0.05, 0.01, 0.001]
    ts = [required_length(3, 0.1, e) for e in eps]
    assert all(a < b for a, b in zip(ts, ts[1:]))
    deltas = [0.05, 0.1, 0.2, 0.4, 0.8]
    ts = [required_length(3, d, 0.05) for d in deltas]
    assert all(a > b for a, b in zip(ts, ts[1:]))


def test_required_length_invalid():
    with pytest.raises(ValueError):
        required_length(0, 0.1, 0.05)
    with pytest.raises(ValueError):
        required_length(1, 0.0, 0.05)
    with pytest.raises(ValueError):
        required_length(1, 0.1, 1.0)


def test_threshold_split_and_count_form():
    assert z_threshold(3, 0.05) == pytest.approx(bisect_quantile(1 - 0.05 / 3), abs=1e-9)
    t, zt = 2000, z_threshold(3, 0.05)
    ct = count_threshold(t, zt)
    assert z_score(math.floor(ct), t) <= zt < z_score(math.floor(ct) + 1, t)
    assert z_score(5, 0) == 0.0
    assert z_score(60, 100) == pytest.approx(2.0)
