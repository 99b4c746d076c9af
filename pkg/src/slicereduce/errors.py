"""Exception hierarchy for slicereduce.

Plain OSError is allowed to propagate from file I/O; everything the
library raises deliberately derives from SliceReduceError.
"""

from __future__ import annotations


class SliceReduceError(Exception):
    """Base class for all slicereduce errors."""


# --- manifest / model ----------------------------------------------------


class ManifestError(SliceReduceError):
    pass


class EmptyManifest(ManifestError):
    def __init__(self) -> None:
        super().__init__("manifest contains no slices")


class DuplicateIndex(ManifestError):
    def __init__(self, volume_id: str, slice_index: int) -> None:
        self.volume_id = volume_id
        self.slice_index = slice_index
        super().__init__(f"volume {volume_id!r}: duplicate slice_index {slice_index}")


class NonContiguousIndices(ManifestError):
    def __init__(self, volume_id: str, detail: str = "") -> None:
        self.volume_id = volume_id
        msg = f"volume {volume_id!r}: slice indices are not contiguous from 0"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class ParseError(ManifestError):
    def __init__(self, line_no: int, detail: str) -> None:
        self.line_no = line_no
        super().__init__(f"manifest line {line_no}: {detail}")


class MissingField(ManifestError):
    def __init__(self, line_no: int, field: str) -> None:
        self.line_no = line_no
        self.field = field
        super().__init__(f"manifest line {line_no}: missing field {field!r}")


# --- image decoding ------------------------------------------------------


class UnsupportedFormat(SliceReduceError):
    def __init__(self, path: str, detail: str) -> None:
        self.path = path
        super().__init__(f"{path}: {detail}")


# --- metrics -------------------------------------------------------------


class MetricError(SliceReduceError):
    pass


class DimensionMismatch(MetricError):
    pass


class ImageTooSmall(MetricError):
    pass


class DegenerateHistogram(MetricError):
    def __init__(self) -> None:
        super().__init__("joint histogram has zero entropy (both images constant)")


class ZeroVector(MetricError):
    def __init__(self, key: str = "") -> None:
        self.key = key
        super().__init__(f"vector has zero norm{f' (key {key!r})' if key else ''}")


# --- embedding file format -----------------------------------------------


class SsebError(SliceReduceError):
    pass


class BadMagic(SsebError):
    def __init__(self, got: bytes) -> None:
        super().__init__(f"not an SSEB file (magic {got!r})")


class UnsupportedVersion(SsebError):
    def __init__(self, version: int) -> None:
        self.version = version
        super().__init__(f"unsupported SSEB version {version}")


class TruncatedFile(SsebError):
    def __init__(self, detail: str) -> None:
        super().__init__(f"truncated SSEB file: {detail}")


class TrailingData(SsebError):
    def __init__(self, extra: int) -> None:
        super().__init__(f"{extra} bytes of trailing data after final record")


class DuplicateKey(SsebError):
    def __init__(self, key: str) -> None:
        self.key = key
        super().__init__(f"duplicate embedding key {key!r}")


class MissingEmbedding(SsebError):
    def __init__(self, key: str) -> None:
        self.key = key
        super().__init__(f"no embedding for key {key!r} (manifest and embedding file out of sync)")


# --- reduction -----------------------------------------------------------


class ReducerError(SliceReduceError):
    pass


class InvalidTarget(ReducerError):
    pass


class PairScoreError(ReducerError):
    def __init__(self, volume_id: str, a: int, b: int, cause: Exception) -> None:
        self.volume_id = volume_id
        self.a = a
        self.b = b
        super().__init__(f"volume {volume_id!r}, pair ({a}, {b}): {cause}")


class PlanManifestMismatch(ReducerError):
    pass


# --- analysis ------------------------------------------------------------


class ManifestMismatch(SliceReduceError):
    pass
