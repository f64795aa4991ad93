"""Error-correcting codes for embedded bits, plus byte/bit framing.

The convolutional code is feed-forward, rate 1/n, zero-tail terminated. The
most significant bit of each generator taps the current input bit, so (7, 5)
octal with K=3 maps input 1 (plus two tail zeros) to 11 10 11.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Sequence

LENGTH_HEADER_BITS = 16


class FramingError(ValueError):
    pass


@dataclass(frozen=True)
class EccSpec:
    kind: str = "none"
    repeat_factor: int = 3
    constraint_length: int = 3
    generators: tuple[int, ...] = (0o7, 0o5)
    tail_termination: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "generators", tuple(int(g) for g in self.generators))
        if self.kind not in ("none", "repetition", "convolutional"):
            raise ValueError(f"unknown ECC kind {self.kind!r}")
        if self.kind == "repetition":
            if self.repeat_factor < 3 or self.repeat_factor % 2 == 0:
                raise ValueError("repeat_factor must be odd and >= 3")
        if self.kind == "convolutional":
            k = self.constraint_length
            if k < 2:
                raise ValueError("constraint_length must be >= 2")
            if not self.generators:
                raise ValueError("need at least one generator")
            for g in self.generators:
                if g <= 0 or g >= 1 << k:
                    raise ValueError(f"generator {oct(g)} invalid for constraint length {k}")
            if not self.tail_termination:
                raise ValueError("only zero-tail terminated convolutional codes are supported")

    @property
    def rate_inverse(self) -> int:
        return len(self.generators)

    def encoded_length(self, n: int) -> int:
        if self.kind == "none":
            return n
        if self.kind == "repetition":
            return n * self.repeat_factor
        return (n + self.constraint_length - 1) * self.rate_inverse

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["generators"] = [oct(g) for g in self.generators]
        return d

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "EccSpec":
        obj = dict(obj)
        if "generators" in obj:
            obj["generators"] = tuple(
                int(g, 8) if isinstance(g, str) else int(g) for g in obj["generators"]
            )
        return cls(**obj)


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


def _check_bits(bits: Sequence[int]) -> list[int]:
    out = [int(b) for b in bits]
    if any(b not in (0, 1) for b in out):
        raise ValueError("bits must be 0 or 1")
    return out


def conv_encode(bits: Sequence[int], k: int = 3, generators: Sequence[int] = (0o7, 0o5)) -> list[int]:
    out: list[int] = []
    reg = 0
    mask = (1 << k) - 1
    for b in list(bits) + [0] * (k - 1):
        reg = ((reg >> 1) | (b << (k - 1))) & mask
        # reg holds [u_t, u_{t-1}, ..., u_{t-k+1}] from MSB to LSB.
        out.extend(_parity(reg & g) for g in generators)
    return out


def viterbi_decode(
    coded: Sequence[int], k: int = 3, generators: Sequence[int] = (0o7, 0o5)
) -> list[int]:
    """Hard-decision Viterbi over a zero-tail terminated code.

    Equal-metric survivors are resolved in favour of the lexicographically
    smaller input sequence, so the result is the lexicographically smallest
    among all minimum-Hamming-distance codewords.
    """
    r = len(generators)
    if len(coded) % r:
        raise FramingError(f"coded length {len(coded)} is not a multiple of {r}")
    steps = len(coded) // r
    if steps < k - 1:
        raise FramingError("coded sequence shorter than the zero tail")
    n_states = 1 << (k - 1)
    # state = last k-1 inputs, most recent in the MSB.
    outputs = {}
    for s in range(n_states):
        for b in (0, 1):
            reg = (b << (k - 1)) | s
            outputs[s, b] = (tuple(_parity(reg & g) for g in generators), reg >> 1)

    inf = float("inf")
    metric = [inf] * n_states
    metric[0] = 0
    paths: list[tuple[int, ...]] = [()] * n_states
    for t in range(steps):
        received = coded[t * r : (t + 1) * r]
        tail = t >= steps - (k - 1)
        new_metric = [inf] * n_states
        new_paths: list[tuple[int, ...]] = [()] * n_states
        for s in range(n_states):
            if metric[s] == inf:
                continue
            for b in ((0,) if tail else (0, 1)):
                out, nxt = outputs[s, b]
                m = metric[s] + sum(o != x for o, x in zip(out, received))
                cand = paths[s] + (b,)
                if m < new_metric[nxt] or (m == new_metric[nxt] and cand < new_paths[nxt]):
                    new_metric[nxt] = m
                    new_paths[nxt] = cand
        metric, paths = new_metric, new_paths
    if metric[0] == inf:
        raise FramingError("no path terminates in the zero state")
    return list(paths[0][: steps - (k - 1)])


def ecc_encode(spec: EccSpec, bits: Sequence[int]) -> list[int]:
    bits = _check_bits(bits)
    if not bits:
        raise ValueError("nothing to encode")
    if spec.kind == "none":
        return bits
    if spec.kind == "repetition":
        return [b for b in bits for _ in range(spec.repeat_factor)]
    return conv_encode(bits, spec.constraint_length, spec.generators)


def ecc_decode(spec: EccSpec, bits: Sequence[int]) -> list[int]:
    bits = _check_bits(bits)
    if spec.kind == "none":
        return bits
    if spec.kind == "repetition":
        f = spec.repeat_factor
        if not bits or len(bits) % f:
            raise FramingError(f"length {len(bits)} is not a positive multiple of {f}")
        return [1 if sum(bits[i : i + f]) * 2 > f else 0 for i in range(0, len(bits), f)]
    return viterbi_decode(bits, spec.constraint_length, spec.generators)


def bytes_to_bits(data: bytes) -> list[int]:
    return [(byte >> (7 - i)) & 1 for byte in data for i in range(8)]


def bits_to_bytes(bits: Sequence[int]) -> bytes:
    bits = _check_bits(bits)
    if len(bits) % 8:
        raise FramingError(f"{len(bits)} bits do not fill whole bytes")
    out = bytearray()
    for i in range(0, len(bits), 8):
        v = 0
        for b in bits[i : i + 8]:
            v = (v << 1) | b
        out.append(v)
    return bytes(out)


def frame(payload_bits: Sequence[int]) -> list[int]:
    """Prepend a 16-bit big-endian count of payload bits."""
    payload = _check_bits(payload_bits)
    n = len(payload)
    if n >= 1 << LENGTH_HEADER_BITS:
        raise ValueError("payload too long for the 16-bit length header")
    return [(n >> (LENGTH_HEADER_BITS - 1 - i)) & 1 for i in range(LENGTH_HEADER_BITS)] + payload


def unframe(bits: Sequence[int]) -> list[int]:
    bits = _check_bits(bits)
    if len(bits) < LENGTH_HEADER_BITS:
        raise FramingError("missing length header")
    n = 0
    for b in bits[:LENGTH_HEADER_BITS]:
        n = (n << 1) | b
    body = bits[LENGTH_HEADER_BITS:]
    if len(body) < n:
        raise FramingError(f"header announces {n} bits but only {len(body)} follow")
    return body[:n]


def encode_text(text: str) -> list[int]:
    return frame(bytes_to_bits(text.encode("utf-8")))


def decode_text(bits: Sequence[int]) -> str:
    return bits_to_bytes(unframe(bits)).decode("utf-8", errors="replace")
