from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class CostModel:
    """Query-cost model for the embedding codec.

    ``c`` is the expected number of queries per accepted chunk; when omitted a
    uniform hash is assumed and c = 2**h.
    """

    n: float
    h: int
    W: float
    T_out: float
    p_in: float
    p_out: float
    c: float | None = None

    def __post_init__(self) -> None:
        if self.h < 1:
            raise ValueError("h must be >= 1")
        for name in ("n", "W", "T_out", "p_in", "p_out"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.c is not None and self.c < 0:
            raise ValueError("c must be non-negative")

    @property
    def queries_per_chunk(self) -> float:
        return float(2**self.h) if self.c is None else float(self.c)

    @property
    def total_queries(self) -> float:
        return self.n / self.h * self.queries_per_chunk

    @property
    def cost_per_query(self) -> float:
        return self.W * self.p_in + self.T_out * self.p_out


def total_cost(cm: CostModel) -> float:
    """(n / h) * c * (W * p_in + T_out * p_out)."""
    return cm.total_queries * cm.cost_per_query
