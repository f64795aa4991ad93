"""Z-test statistics for multi-key watermark detection and the length estimator."""

from __future__ import annotations

import math

# Acklam's rational approximation to the inverse normal CDF.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def inverse_normal_cdf(p: float) -> float:
    """Quantile of the standard normal, refined to near machine precision."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1); got {p!r}")
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
        )
    elif p <= 1 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1
        )
    else:
        q = math.sqrt(-2 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1
        )
    # Halley steps; the upper tail works on the survival function to keep precision.
    for _ in range(2):
        if p > 0.5:
            e = (1.0 - p) - _normal_sf(x)
        else:
            e = normal_cdf(x) - p
        u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
        x = x - u / (1 + x * u / 2)
    return x


def p_w(delta: float) -> float:
    """Expected label-1 fraction under an active key: 2(1 + delta) / (4 + delta)."""
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1); got {delta!r}")
    return 2.0 * (1.0 + delta) / (4.0 + delta)


def z_threshold(n_bits: int, epsilon: float) -> float:
    """One-sided per-bit threshold with the error budget split evenly: alpha = eps / n."""
    if n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1); got {epsilon!r}")
    return inverse_normal_cdf(1.0 - epsilon / n_bits)


def z_score(count: int, total: int) -> float:
    if total <= 0:
        return 0.0
    return 2.0 * math.sqrt(total) * (count / total - 0.5)


def count_threshold(total: int, z_th: float) -> float:
    """Label-1 count equivalent of the Z threshold: T/2 + z_th * sqrt(T) / 2."""
    return total / 2.0 + z_th * math.sqrt(total) / 2.0


def base_required_length(n: int, delta: float, epsilon: float) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1); got {delta!r}")
    z = z_threshold(n, epsilon)
    shift = p_w(delta) - 0.5
    return math.ceil(z * z * n * n / (4.0 * shift * shift))


def required_length(n: int, delta: float, epsilon: float, safety_factor: float = 1.0) -> int:
    """Covertext tokens needed so a 1-bit's expected Z-score reaches the threshold
    even when all ``n`` keys share the positions."""
    if safety_factor < 1.0:
        raise ValueError("safety_factor must be >= 1")
    return math.ceil(base_required_length(n, delta, epsilon) * safety_factor)


def expected_z(t: int, delta: float, active_keys: int) -> float:
    return 2.0 * math.sqrt(t) * (p_w(delta) - 0.5) / active_keys
