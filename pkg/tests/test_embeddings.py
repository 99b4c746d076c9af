import struct

import numpy as np
import pytest

from slicereduce.embeddings import (
    MAGIC,
    EmbeddingTable,
    load_embeddings,
    lookup,
    write_embeddings,
)
from slicereduce.errors import (
    BadMagic,
    DimensionMismatch,
    DuplicateKey,
    MissingEmbedding,
    TrailingData,
    TruncatedFile,
    UnsupportedVersion,
    ZeroVector,
)
from slicereduce.model import SliceRef


def make_vec(rng, dim=16):
    return rng.normal(size=dim).astype(np.float32)


def write_file(tmp_path, items, dim=16, name="e.sseb"):
    p = tmp_path / name
    write_embeddings(p, dim, items)
    return p


class TestRoundTrip:
    def test_bit_identical(self, tmp_path, rng):
        items = [(f"v1/{i}", make_vec(rng)) for i in range(3)]
        p = write_file(tmp_path, items)
        table = load_embeddings(p)
        assert table.dim == 16
        assert len(table) == 3
        for key, vec in items:
            assert table.entries[key].tobytes() == vec.astype("<f4").tobytes()

    def test_load_is_read_only(self, tmp_path, rng):
        p = write_file(tmp_path, [("v/0", make_vec(rng))])
        before = p.read_bytes()
        load_embeddings(p)
        assert p.read_bytes() == before

    def test_large_dim(self, tmp_path, rng):
        p = write_file(tmp_path, [("v/0", make_vec(rng, 1000))], dim=1000)
        assert load_embeddings(p).dim == 1000


class TestValidation:
    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.sseb"
        p.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(BadMagic):
            load_embeddings(p)

    def test_unsupported_version(self, tmp_path):
        p = tmp_path / "v9.sseb"
        p.write_bytes(struct.pack("<4sIIQ", MAGIC, 9, 4, 0))
        with pytest.raises(UnsupportedVersion):
            load_embeddings(p)

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "t.sseb"
        p.write_bytes(MAGIC + b"\x01")
        with pytest.raises(TruncatedFile):
            load_embeddings(p)

    def test_missing_record(self, tmp_path):
        p = tmp_path / "t.sseb"
        p.write_bytes(struct.pack("<4sIIQ", MAGIC, 1, 4, 2))
        with pytest.raises(TruncatedFile):
            load_embeddings(p)

    def test_short_vector_is_dimension_mismatch(self, tmp_path, rng):
        # declared dim 1000, last record carries only 999 floats
        p = tmp_path / "short.sseb"
        key = b"v/0"
        with open(p, "wb") as fh:
            fh.write(struct.pack("<4sIIQ", MAGIC, 1, 1000, 1))
            fh.write(struct.pack("<H", len(key)))
            fh.write(key)
            fh.write(np.ones(999, dtype="<f4").tobytes())
        with pytest.raises(DimensionMismatch):
            load_embeddings(p)

    def test_cut_key(self, tmp_path):
        p = tmp_path / "cut.sseb"
        with open(p, "wb") as fh:
            fh.write(struct.pack("<4sIIQ", MAGIC, 1, 4, 1))
            fh.write(struct.pack("<H", 10))
            fh.write(b"v/")
        with pytest.raises(TruncatedFile):
            load_embeddings(p)

    def test_duplicate_key(self, tmp_path, rng):
        p = write_file(tmp_path, [("v/0", make_vec(rng)), ("v/0", make_vec(rng))])
        with pytest.raises(DuplicateKey):
            load_embeddings(p)

    def test_zero_vector(self, tmp_path):
        p = write_file(tmp_path, [("v/0", np.zeros(16, dtype=np.float32))])
        with pytest.raises(ZeroVector):
            load_embeddings(p)

    def test_trailing_data(self, tmp_path, rng):
        p = write_file(tmp_path, [("v/0", make_vec(rng))])
        with open(p, "ab") as fh:
            fh.write(b"junk")
        with pytest.raises(TrailingData):
            load_embeddings(p)


class TestLookup:
    def table(self, rng):
        a, b = make_vec(rng), make_vec(rng)
        return EmbeddingTable(dim=16, entries={"v1/0": a, "v2/0": b}), a, b

    def test_present(self, rng):
        table, a, _ = self.table(rng)
        got = lookup(table, SliceRef("v1", 0, "x.png"))
        assert np.array_equal(got, a)

    def test_absent(self, rng):
        table, _, _ = self.table(rng)
        with pytest.raises(MissingEmbedding):
            lookup(table, SliceRef("v1", 1, "x.png"))

    def test_same_index_different_volume(self, rng):
        table, a, b = self.table(rng)
        assert np.array_equal(lookup(table, SliceRef("v2", 0, "x.png")), b)
        assert not np.array_equal(a, b)
