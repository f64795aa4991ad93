"""Text assets shipped with the package (corpus, lexicon, sample PCA prompt)."""

from __future__ import annotations

from importlib import resources


def read_asset(name: str) -> str:
    return resources.files("robuststego").joinpath("data", name).read_text(encoding="utf-8")
