from .codec import ChunkPlan, DecodeError, EncodeReport, decode, encode, split_chunks
from .embedders import RemoteEmbedder, ToyEmbedder, cosine, embed_text
from .lsh import (
    OracleLsh,
    PcaLsh,
    RandomProjectionLsh,
    load_lsh,
    lsh_from_json,
    lsh_hash,
    save_lsh,
    train_pca_lsh,
)

__all__ = [
    "ChunkPlan",
    "DecodeError",
    "EncodeReport",
    "OracleLsh",
    "PcaLsh",
    "RandomProjectionLsh",
    "RemoteEmbedder",
    "ToyEmbedder",
    "cosine",
    "decode",
    "embed_text",
    "encode",
    "load_lsh",
    "lsh_from_json",
    "lsh_hash",
    "save_lsh",
    "split_chunks",
    "train_pca_lsh",
]
