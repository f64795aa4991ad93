"""Label-driven perturbations of a next-token distribution."""

from __future__ import annotations

from typing import Callable

import numpy as np

Perturbation = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


def _check(p: np.ndarray, r: np.ndarray, delta: float) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    r = np.asarray(r)
    if p.shape != r.shape:
        raise ValueError(f"label vector length {r.shape} does not match distribution {p.shape}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1); got {delta!r}")
    return p, r.astype(bool)


def perturb(p: np.ndarray, r: np.ndarray, delta: float) -> np.ndarray:
    """Additive boost/suppress restricted to tokens with mass in [2δ, 1 - 2δ].

    Eligible label-1 tokens gain ``delta``; eligible label-0 tokens lose
    ``min(delta * w / (|I| - w), 2 * delta)`` where ``w`` counts eligible label-1
    tokens, then the vector is renormalized. When no eligible token carries one
    of the labels there is nowhere to move mass, and the input is returned.
    """
    p, green = _check(p, r, delta)
    eligible = (p >= 2 * delta) & (p <= 1 - 2 * delta)
    boost = eligible & green
    cut = eligible & ~green
    w = int(boost.sum())
    m = int(cut.sum())
    if w == 0 or m == 0:
        return p / p.sum()
    shrink = min(delta * w / m, 2 * delta)
    out = p.copy()
    out[boost] += delta
    out[cut] -= shrink
    np.maximum(out, 0.0, out=out)
    return out / out.sum()


def perturb_proportional(p: np.ndarray, r: np.ndarray, delta: float) -> np.ndarray:
    """Scale label-1 tokens by (1 + δ) and label-0 tokens by (1 - δ/2), then renormalize.

    With half the mass on each label the label-1 mass becomes exactly
    2(1 + δ)/(4 + δ), the shift the length estimator assumes. Works at any
    entropy, unlike :func:`perturb`, which leaves flat distributions untouched.
    """
    p, green = _check(p, r, delta)
    out = np.where(green, p * (1.0 + delta), p * (1.0 - delta / 2.0))
    total = out.sum()
    if total <= 0:
        return p / p.sum()
    return out / total


PERTURBATIONS: dict[str, Perturbation] = {
    "additive": perturb,
    "proportional": perturb_proportional,
}


def get_perturbation(name: str) -> Perturbation:
    try:
        return PERTURBATIONS[name]
    except KeyError:
        raise ValueError(f"unknown perturbation {name!r}; choose from {sorted(PERTURBATIONS)}") from None
