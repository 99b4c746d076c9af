"""Core domain types shared by every other module.

All types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    DuplicateIndex,
    EmptyManifest,
    InvalidTarget,
    NonContiguousIndices,
)

TOOL_VERSION = "0.1.0"


@dataclass(frozen=True)
class SliceRef:
    """One slice of one volume, as listed in a dataset manifest."""

    volume_id: str
    slice_index: int
    path: str
    rescale_slope: float = 1.0
    rescale_intercept: float = 0.0

    def __post_init__(self) -> None:
        if not self.path:
            raise ValueError("SliceRef.path must be non-empty")
        if self.slice_index < 0:
            raise ValueError(f"SliceRef.slice_index must be >= 0, got {self.slice_index}")

    @property
    def key(self) -> str:
        """Join key used by the embedding table: 'volume_id/slice_index'."""
        return f"{self.volume_id}/{self.slice_index}"


@dataclass(frozen=True)
class VolumeSeries:
    """Ordered slices of one scan; the unit of pairwise comparison."""

    volume_id: str
    slices: tuple[SliceRef, ...]

    def __post_init__(self) -> None:
        if not self.slices:
            raise NonContiguousIndices(self.volume_id, "volume has no slices")
        seen: set[int] = set()
        for ref in self.slices:
            if ref.slice_index in seen:
                raise DuplicateIndex(self.volume_id, ref.slice_index)
            seen.add(ref.slice_index)
        indices = [ref.slice_index for ref in self.slices]
        if indices != list(range(len(self.slices))):
            raise NonContiguousIndices(
                self.volume_id, f"got indices {sorted(seen)[:8]}{'...' if len(seen) > 8 else ''}"
            )

    def __len__(self) -> int:
        return len(self.slices)


@dataclass(frozen=True, eq=False)
class SliceImage:
    """Decoded 2-D grayscale raster with 8-bit intensities.

    `pixels` is a read-only C-contiguous (height, width) uint8 array.
    """

    width: int
    height: int
    pixels: np.ndarray
    source_bit_depth: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("SliceImage dimensions must be >= 1")
        if self.source_bit_depth not in (8, 16):
            raise ValueError("source_bit_depth must be 8 or 16")
        px = self.pixels
        if px.dtype != np.uint8 or px.shape != (self.height, self.width):
            raise ValueError(
                f"pixels must be uint8 of shape ({self.height}, {self.width}), "
                f"got {px.dtype} {px.shape}"
            )
        if not px.flags.c_contiguous:
            px = np.ascontiguousarray(px)
            object.__setattr__(self, "pixels", px)
        px.flags.writeable = False

    @classmethod
    def from_array(cls, pixels: np.ndarray, source_bit_depth: int = 8) -> "SliceImage":
        pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
        h, w = pixels.shape
        return cls(width=w, height=h, pixels=pixels, source_bit_depth=source_bit_depth)


@dataclass(frozen=True, order=True)
class PairScore:
    """Similarity score for one intra-volume slice pair.

    Semantics depend on the metric: SSIM/NMI/cosine are similarities
    (larger = more similar); for the hash metric `score` is the Hamming
    distance in bits (smaller = more similar).
    """

    a: int
    b: int
    score: float

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ValueError(f"PairScore requires a < b, got ({self.a}, {self.b})")


class MetricKind(Enum):
    EVERY_N = "every-n"
    SSIM = "ssim"
    MI = "mi"
    DEEPNET = "deepnet"
    HASH = "hash"


#: Default joint-histogram resolution: one bin per 8-bit gray level.
DEFAULT_MI_BINS = 256


@dataclass(frozen=True)
class MetricSpec:
    """A metric choice plus the parameters that variant requires."""

    kind: MetricKind
    n: int | None = None
    bins: int | None = None
    embeddings_path: str | None = None

    def __post_init__(self) -> None:
        if self.kind is MetricKind.EVERY_N:
            if self.n is None or self.n < 1:
                raise InvalidTarget(f"every-n requires stride n >= 1, got {self.n}")
        elif self.n is not None:
            raise InvalidTarget(f"stride n only applies to every-n, not {self.kind.value}")
        if self.kind is MetricKind.MI:
            if self.bins is None:
                object.__setattr__(self, "bins", DEFAULT_MI_BINS)
            elif self.bins < 2:
                raise InvalidTarget(f"mi requires bins >= 2, got {self.bins}")
        elif self.bins is not None:
            raise InvalidTarget(f"bins only applies to mi, not {self.kind.value}")
        if self.kind is MetricKind.DEEPNET:
            if not self.embeddings_path:
                raise InvalidTarget("deepnet requires an embeddings file")
        elif self.embeddings_path is not None:
            raise InvalidTarget(f"embeddings only apply to deepnet, not {self.kind.value}")

    def describe(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.n is not None:
            out["n"] = self.n
        if self.bins is not None:
            out["bins"] = self.bins
        if self.embeddings_path is not None:
            out["embeddings_path"] = self.embeddings_path
        return out


@dataclass(frozen=True)
class Fraction:
    """Keep round(value * m) slices per volume, at least one."""

    value: float

    def __post_init__(self) -> None:
        if not 0.0 < self.value <= 1.0:
            raise InvalidTarget(f"fraction must be in (0, 1], got {self.value}")


@dataclass(frozen=True)
class Count:
    """Keep exactly `value` slices per volume."""

    value: int

    def __post_init__(self) -> None:
        if self.value < 1:
            raise InvalidTarget(f"count must be >= 1, got {self.value}")


@dataclass(frozen=True)
class Threshold:
    """Remove until no kept pair is strictly more similar than `value`."""

    value: float


Mode = Union[Fraction, Count, Threshold]


def describe_mode(mode: Mode) -> dict:
    return {"mode": type(mode).__name__.lower(), "value": mode.value}


@dataclass(frozen=True)
class VolumeDecision:
    """Keep/remove split for one volume; kept and removed partition 0..m-1."""

    volume_id: str
    kept: frozenset[int]
    removed: frozenset[int]

    def __post_init__(self) -> None:
        if not self.kept:
            raise ValueError(f"volume {self.volume_id!r}: kept set may not be empty")
        if self.kept & self.removed:
            raise ValueError(f"volume {self.volume_id!r}: kept and removed overlap")
        full = self.kept | self.removed
        if full != set(range(len(full))):
            raise ValueError(f"volume {self.volume_id!r}: kept+removed must cover 0..m-1")

    @property
    def total(self) -> int:
        return len(self.kept) + len(self.removed)


@dataclass(frozen=True)
class ReductionPlan:
    """Per-volume keep/remove decisions plus provenance."""

    method: MetricSpec
    mode: Mode
    decisions: Mapping[str, VolumeDecision]
    decode_seconds: float = 0.0
    scoring_seconds: float = 0.0
    selection_seconds: float = 0.0
    tool_version: str = TOOL_VERSION

    def kept_pairs(self) -> set[tuple[str, int]]:
        """All kept slices as (volume_id, slice_index) pairs."""
        out: set[tuple[str, int]] = set()
        for vid, dec in self.decisions.items():
            out.update((vid, i) for i in dec.kept)
        return out

    def total_kept(self) -> int:
        return sum(len(d.kept) for d in self.decisions.values())

    def total_slices(self) -> int:
        return sum(d.total for d in self.decisions.values())

    def digest(self) -> str:
        """SHA-256 over the semantic content (method, mode, decisions).

        Wall-times and tool version are excluded so runs that make the
        same decisions have the same digest regardless of speed.
        """
        doc = {
            "method": self.method.describe(),
            **describe_mode(self.mode),
            "volumes": {
                vid: sorted(dec.kept)
                for vid, dec in sorted(self.decisions.items())
            },
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def merge_plans(plans: Sequence[ReductionPlan]) -> ReductionPlan:
    """Combine per-volume plans produced with one method/mode into one."""
    if not plans:
        raise ValueError("no plans to merge")
    first = plans[0]
    decisions: dict[str, VolumeDecision] = {}
    for plan in plans:
        for vid, dec in plan.decisions.items():
            if vid in decisions:
                raise ValueError(f"volume {vid!r} appears in more than one plan")
            decisions[vid] = dec
    return ReductionPlan(
        method=first.method,
        mode=first.mode,
        decisions=dict(sorted(decisions.items())),
        decode_seconds=sum(p.decode_seconds for p in plans),
        scoring_seconds=sum(p.scoring_seconds for p in plans),
        selection_seconds=sum(p.selection_seconds for p in plans),
        tool_version=first.tool_version,
    )


def validate_manifest(entries: Iterable[SliceRef]) -> list[VolumeSeries]:
    """Group manifest entries into volumes and check their invariants.

    Volumes are returned sorted by volume_id; slices within a volume are
    sorted by slice_index. The grouping is a partition: every entry ends
    up in exactly one volume.
    """
    entries = list(entries)
    if not entries:
        raise EmptyManifest()
    groups: dict[str, list[SliceRef]] = {}
    for ref in entries:
        groups.setdefault(ref.volume_id, []).append(ref)
    volumes = []
    for vid in sorted(groups):
        refs = groups[vid]
        seen: set[int] = set()
        for ref in refs:
            if ref.slice_index in seen:
                raise DuplicateIndex(vid, ref.slice_index)
            seen.add(ref.slice_index)
        if seen != set(range(len(refs))):
            raise NonContiguousIndices(vid, f"indices {sorted(seen)[:8]}{'...' if len(seen) > 8 else ''}")
        volumes.append(
            VolumeSeries(volume_id=vid, slices=tuple(sorted(refs, key=lambda r: r.slice_index)))
        )
    return volumes
