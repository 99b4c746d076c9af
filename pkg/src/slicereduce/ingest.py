"""Manifest loading and slice decoding.

Slices arrive as 8- or 16-bit single-channel PNG files. Stored pixel
values map to physical intensities (Hounsfield units for CT) through
the per-slice affine rescale from the manifest; an optional intensity
window then clamps the physical range and maps it to 8-bit gray.
"""

from __future__ import annotations

import functools
import io
import json
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .errors import EmptyManifest, MissingField, ParseError, UnsupportedFormat
from .model import SliceImage, SliceRef

_REQUIRED_FIELDS = ("volume_id", "slice_index", "path")


@dataclass(frozen=True)
class WindowSpec:
    """Intensity window: physical values in [center - width/2, center + width/2]."""

    center: float
    width: float

    def __post_init__(self) -> None:
        if not self.width > 0:
            raise ValueError(f"window width must be > 0, got {self.width}")


def load_manifest(path: str | Path) -> list[SliceRef]:
    """Read a JSON-Lines manifest, one SliceRef per line, in file order.

    Relative image paths are resolved against the manifest's directory,
    so corpora stay relocatable.
    """
    base = Path(path).resolve().parent
    refs: list[SliceRef] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(line_no, f"invalid JSON ({e.msg})") from e
            if not isinstance(obj, dict):
                raise ParseError(line_no, f"expected an object, got {type(obj).__name__}")
            for fieldname in _REQUIRED_FIELDS:
                if fieldname not in obj:
                    raise MissingField(line_no, fieldname)
            try:
                raw_path = str(obj["path"])
                refs.append(
                    SliceRef(
                        volume_id=str(obj["volume_id"]),
                        slice_index=int(obj["slice_index"]),
                        path=raw_path if Path(raw_path).is_absolute() else str(base / raw_path),
                        rescale_slope=float(obj.get("rescale_slope", 1.0)),
                        rescale_intercept=float(obj.get("rescale_intercept", 0.0)),
                    )
                )
            except (TypeError, ValueError) as e:
                raise ParseError(line_no, str(e)) from e
    if not refs:
        raise EmptyManifest()
    return refs


def write_manifest(path: str | Path, refs: Sequence[SliceRef]) -> None:
    """Write refs as JSON Lines (inverse of load_manifest)."""
    with open(path, "w", encoding="utf-8") as fh:
        for ref in refs:
            fh.write(manifest_line(ref) + "\n")


def manifest_line(ref: SliceRef) -> str:
    obj: dict = {
        "volume_id": ref.volume_id,
        "slice_index": ref.slice_index,
        "path": ref.path,
    }
    if ref.rescale_slope != 1.0:
        obj["rescale_slope"] = ref.rescale_slope
    if ref.rescale_intercept != 0.0:
        obj["rescale_intercept"] = ref.rescale_intercept
    return json.dumps(obj, separators=(", ", ": "))


_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _decode_png_gray_fast(data: bytes) -> np.ndarray | None:
    """Direct decode of non-interlaced grayscale PNGs with unfiltered rows.

    Covers the common case for pre-converted medical corpora (and this
    tool's own synthetic PNGs) without PIL's per-open overhead. Returns
    None for anything it does not handle; pixels are identical to what
    PIL would produce (PNG is lossless).
    """
    if not data.startswith(_PNG_SIG):
        return None
    pos = len(_PNG_SIG)
    header = None
    idat: list[bytes] = []
    while pos + 8 <= len(data):
        length = int.from_bytes(data[pos : pos + 4], "big")
        tag = data[pos + 4 : pos + 8]
        body = data[pos + 8 : pos + 8 + length]
        if tag == b"IHDR":
            if length != 13:
                return None
            header = struct.unpack(">IIBBBBB", body)
        elif tag == b"IDAT":
            idat.append(body)
        elif tag == b"IEND":
            break
        pos += 12 + length
    if header is None or not idat:
        return None
    width, height, bit_depth, color_type, compression, filter_method, interlace = header
    if color_type != 0 or compression != 0 or filter_method != 0 or interlace != 0:
        return None
    if bit_depth not in (8, 16) or width < 1 or height < 1:
        return None
    try:
        raw = zlib.decompress(b"".join(idat))
    except zlib.error:
        return None
    stride = 1 + width * (bit_depth // 8)
    if len(raw) != stride * height:
        return None
    rows = np.frombuffer(raw, dtype=np.uint8).reshape(height, stride)
    if rows[:, 0].any():
        return None  # some row uses a non-trivial filter; let PIL handle it
    samples = rows[:, 1:]
    if bit_depth == 8:
        return np.ascontiguousarray(samples)
    return np.ascontiguousarray(samples).view(">u2").astype(np.uint16)


def _read_file(path: str) -> bytes:
    # raw syscalls; the buffered wrapper costs more than the read on
    # network filesystems
    fd = os.open(path, os.O_RDONLY)
    try:
        chunks = []
        while True:
            chunk = os.read(fd, 1 << 20)
            if not chunk:
                break
            chunks.append(chunk)
    finally:
        os.close(fd)
    return chunks[0] if len(chunks) == 1 else b"".join(chunks)


def decode_slice(ref: SliceRef) -> np.ndarray:
    """Decode a slice file to its stored values (uint8 or uint16 2-D array).

    Physical value = stored * rescale_slope + rescale_intercept.
    """
    path = ref.path
    data = _read_file(path)
    fast = _decode_png_gray_fast(data)
    if fast is not None:
        return fast
    with Image.open(io.BytesIO(data)) as im:
        if im.format != "PNG":
            raise UnsupportedFormat(path, f"expected PNG, got {im.format}")
        if im.mode == "L":
            return np.asarray(im)
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im)
            if arr.dtype != np.uint16:
                if arr.min() < 0 or arr.max() > 0xFFFF:
                    raise UnsupportedFormat(path, f"pixel values outside 16-bit range")
                arr = arr.astype(np.uint16)
            return arr
        raise UnsupportedFormat(path, f"expected single-channel grayscale, got mode {im.mode!r}")


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


@functools.lru_cache(maxsize=16)
def _physical_values(domain: int, rescale_slope: float, rescale_intercept: float) -> np.ndarray:
    out = np.arange(domain, dtype=np.float64) * rescale_slope + rescale_intercept
    out.flags.writeable = False
    return out


def _window_lut(
    stored: np.ndarray,
    window: WindowSpec | None,
    rescale_slope: float,
    rescale_intercept: float,
) -> tuple[np.ndarray, int]:
    """8-bit output value for every possible stored value; (lut, depth)."""
    if stored.ndim != 2:
        raise UnsupportedFormat("<array>", f"expected 2-D raster, got {stored.ndim}-D")
    if stored.dtype == np.uint8:
        depth, domain = 8, 256
    elif stored.dtype == np.uint16:
        depth, domain = 16, 65536
    else:
        raise UnsupportedFormat("<array>", f"expected uint8/uint16 raster, got {stored.dtype}")

    physical = _physical_values(domain, rescale_slope, rescale_intercept)
    if window is not None:
        lo = window.center - window.width / 2.0
        hi = window.center + window.width / 2.0
    else:
        vmin, vmax = int(stored.min()), int(stored.max())
        lo = min(physical[vmin], physical[vmax])
        hi = max(physical[vmin], physical[vmax])
        if hi == lo:
            return np.zeros(domain, dtype=np.uint8), depth
    scaled = (np.clip(physical, lo, hi) - lo) * (255.0 / (hi - lo))
    lut = np.clip(_round_half_up(scaled), 0, 255).astype(np.uint8)
    return lut, depth


def apply_window(
    stored: np.ndarray,
    window: WindowSpec | None = None,
    *,
    rescale_slope: float = 1.0,
    rescale_intercept: float = 0.0,
) -> SliceImage:
    """Map stored values to an 8-bit SliceImage.

    With a window, physical values are clamped to [center - width/2,
    center + width/2] then mapped linearly to [0, 255], rounded half-up.
    Without a window, the slice's own physical min-max is mapped to
    [0, 255]; a constant slice maps to all zeros.

    Monotone non-decreasing in the input. Re-windowing an already
    windowed 8-bit image with the same spec is NOT idempotent in
    general (metrics always run on single-windowed data).

    Built as a lookup table over the stored-value domain, so the whole
    image is transformed in one indexing pass.
    """
    lut, depth = _window_lut(stored, window, rescale_slope, rescale_intercept)
    return SliceImage.from_array(np.take(lut, stored), source_bit_depth=depth)


def windowed_float(
    stored: np.ndarray,
    window: WindowSpec | None = None,
    *,
    rescale_slope: float = 1.0,
    rescale_intercept: float = 0.0,
) -> np.ndarray:
    """apply_window's pixel values as float64, in one table lookup.

    Exactly equal to apply_window(...).pixels.astype(float64); used on
    hot paths that feed the resampler directly.
    """
    lut, _ = _window_lut(stored, window, rescale_slope, rescale_intercept)
    return np.take(lut.astype(np.float64), stored)


def load_slice_image(ref: SliceRef, window: WindowSpec | None = None) -> SliceImage:
    """decode_slice + apply_window in one step; what the metrics consume."""
    stored = decode_slice(ref)
    return apply_window(
        stored,
        window,
        rescale_slope=ref.rescale_slope,
        rescale_intercept=ref.rescale_intercept,
    )
