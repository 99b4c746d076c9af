"""Reader/writer for the SSEB v1 embedding table format.

Binary little-endian layout: magic "SSEB"; u32 version = 1; u32 dim;
u64 count; then count records of (u16 key_length, key bytes UTF-8,
dim x f32). Keys are "volume_id/slice_index".
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateKey,
    MissingEmbedding,
    TrailingData,
    TruncatedFile,
    UnsupportedVersion,
    ZeroVector,
)
from .model import SliceRef

MAGIC = b"SSEB"
VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable id -> float32 vector map backing the deepnet metric."""

    dim: int
    entries: Mapping[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.entries)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Load and fully validate an SSEB v1 file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        if data[: len(MAGIC)] != MAGIC[: len(data)]:
            raise BadMagic(data[:4])
        raise TruncatedFile("incomplete header")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(magic)
    if version != VERSION:
        raise UnsupportedVersion(version)
    if dim < 1:
        raise DimensionMismatch(f"declared dim must be >= 1, got {dim}")

    entries: dict[str, np.ndarray] = {}
    offset = _HEADER.size
    vec_bytes = dim * 4
    for record in range(count):
        if offset + 2 > len(data):
            raise TruncatedFile(f"record {record}: missing key length")
        (key_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + key_len > len(data):
            raise TruncatedFile(f"record {record}: key cut short")
        key = data[offset : offset + key_len].decode("utf-8")
        offset += key_len
        remaining = len(data) - offset
        if remaining < vec_bytes:
            if remaining > 0:
                raise DimensionMismatch(
                    f"record {record} ({key!r}): {remaining // 4} of {dim} floats present"
                )
            raise TruncatedFile(f"record {record} ({key!r}): vector missing")
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        if not np.any(vec):
            raise ZeroVector(key)
        if key in entries:
            raise DuplicateKey(key)
        vec.flags.writeable = False
        entries[key] = vec
    if offset != len(data):
        raise TrailingData(len(data) - offset)
    return EmbeddingTable(dim=dim, entries=entries)


def write_embeddings(
    path: str | Path, dim: int, items: Iterable[tuple[str, np.ndarray]]
) -> int:
    """Write an SSEB v1 file; returns the record count."""
    items = list(items)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, len(items)))
        for key, vec in items:
            raw = key.encode("utf-8")
            vec = np.asarray(vec, dtype="<f4").reshape(-1)
            if vec.size != dim:
                raise DimensionMismatch(f"record {key!r}: {vec.size} floats, declared dim {dim}")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(vec.tobytes())
    return len(items)


def lookup(table: EmbeddingTable, ref: SliceRef) -> np.ndarray:
    """Vector for a manifest slice; raises MissingEmbedding if absent."""
    try:
        return table.entries[ref.key]
    except KeyError:
        raise MissingEmbedding(ref.key) from None
