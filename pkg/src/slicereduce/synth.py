"""Seeded synthetic CT-like corpora for tests, demos and benchmarks.

Volumes are elliptical phantoms over an air background: a smooth
intensity pattern drifts slowly along the slice axis (so adjacent
slices are near-duplicates, like real scans) with pixel noise on top.

PNGs are written by a minimal encoder (filter type 0 rows, fixed zlib
level) so a given seed produces byte-identical corpora on any platform
or library version. Files decode with any PNG reader.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .ingest import write_manifest
from .model import SliceRef


def write_png_gray(path: str | Path, img: np.ndarray, compress_level: int = 6) -> None:
    """Write an 8-bit grayscale PNG with unfiltered (type 0) rows."""
    if img.dtype != np.uint8 or img.ndim != 2:
        raise ValueError("expected a 2-D uint8 array")
    h, w = img.shape
    raw = bytearray()
    for r in range(h):
        raw.append(0)
        raw.extend(img[r].tobytes())

    def chunk(tag: bytes, payload: bytes) -> bytes:
        return (
            struct.pack(">I", len(payload))
            + tag
            + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
        )

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    idat = zlib.compress(bytes(raw), compress_level)
    with open(path, "wb") as fh:
        fh.write(b"\x89PNG\r\n\x1a\n")
        fh.write(chunk(b"IHDR", ihdr))
        fh.write(chunk(b"IDAT", idat))
        fh.write(chunk(b"IEND", b""))


def phantom_slice(
    size: int,
    z: float,
    rng: np.random.Generator,
    *,
    noise: float = 5.0,
    body_rx: float = 0.46,
    body_ry: float = 0.42,
    phase: float = 0.0,
) -> np.ndarray:
    """One slice of a drifting phantom; z in [0, 1] along the volume."""
    yy, xx = np.mgrid[0:size, 0:size]
    cy = cx = (size - 1) / 2.0
    body = ((yy - cy) ** 2 / (body_ry * size) ** 2 + (xx - cx) ** 2 / (body_rx * size) ** 2) <= 1.0
    grad = (
        45.0
        + 130.0 * z
        + 55.0 * np.sin(xx / (0.16 * size) + 3.0 * z + phase)
        * np.cos(yy / (0.19 * size) - 2.0 * z + phase)
    )
    img = np.where(body, grad + rng.normal(0.0, noise, (size, size)), 0.0)
    return np.clip(img, 0.0, 255.0).astype(np.uint8)


def generate_corpus(
    out_dir: str | Path,
    volumes: int,
    slices: int | tuple[int, int],
    *,
    size: int = 64,
    seed: int = 0,
    noise: float = 5.0,
    compress_level: int = 6,
) -> Path:
    """Write a seeded corpus of PNG volumes plus its manifest.jsonl.

    `slices` is either a fixed per-volume count or an inclusive (lo, hi)
    range sampled per volume. Returns the manifest path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    refs: list[SliceRef] = []
    for v in range(volumes):
        vid = f"vol{v:04d}"
        if isinstance(slices, tuple):
            lo, hi = slices
            m = int(rng.integers(lo, hi + 1))
        else:
            m = slices
        vol_dir = out / vid
        vol_dir.mkdir(exist_ok=True)
        phase = float(rng.uniform(0.0, 6.283))
        body_rx = float(rng.uniform(0.40, 0.48))
        body_ry = float(rng.uniform(0.36, 0.45))
        for i in range(m):
            z = i / max(m - 1, 1)
            img = phantom_slice(
                size, z, rng, noise=noise, body_rx=body_rx, body_ry=body_ry, phase=phase
            )
            write_png_gray(vol_dir / f"{i:04d}.png", img, compress_level)
            # manifest paths stay relative to the corpus directory so a
            # given seed produces byte-identical output anywhere
            refs.append(SliceRef(volume_id=vid, slice_index=i, path=f"{vid}/{i:04d}.png"))
    manifest = out / "manifest.jsonl"
    write_manifest(manifest, refs)
    return manifest
