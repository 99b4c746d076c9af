"""Batch ResNet50 embedding export to SSEB v1.

Reads a slicereduce dataset manifest (JSON Lines), runs every slice
through an ImageNet-style ResNet50 and writes one embedding record per
slice, keyed "volume_id/slice_index".

Preprocessing is fixed: decode the PNG, apply the intensity window (or
per-slice min-max without one) to 8-bit exactly as the reduction tool
does, resize to 224x224 (bilinear), replicate the gray channel to three
channels, scale to [0, 1], then standard ImageNet channel
normalization.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
import torch
from PIL import Image

MAGIC = b"SSEB"
VERSION = 1

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

SOURCE_DIMS = {"final": 1000, "pooled": 2048}


class ExportError(Exception):
    pass


@dataclass(frozen=True)
class ExporterConfig:
    manifest: str
    out: str
    source: str = "final"  # final: 1000-dim output; pooled: 2048-dim features
    batch_size: int = 8
    weights: str = "imagenet"  # imagenet | random | path to a .pth state dict
    seed: int = 0
    device: str = "cpu"
    window_center: float | None = None
    window_width: float | None = None
    error_log: str | None = None

    def __post_init__(self) -> None:
        if self.source not in SOURCE_DIMS:
            raise ExportError(f"source must be one of {sorted(SOURCE_DIMS)}, got {self.source!r}")
        if self.batch_size < 1:
            raise ExportError("batch_size must be >= 1")
        if (self.window_center is None) != (self.window_width is None):
            raise ExportError("window center and width must be given together")
        if self.window_width is not None and self.window_width <= 0:
            raise ExportError("window width must be > 0")

    @property
    def dim(self) -> int:
        return SOURCE_DIMS[self.source]


@dataclass
class SliceEntry:
    volume_id: str
    slice_index: int
    path: str
    rescale_slope: float = 1.0
    rescale_intercept: float = 0.0

    @property
    def key(self) -> str:
        return f"{self.volume_id}/{self.slice_index}"


def read_manifest(path: str | Path) -> list[SliceEntry]:
    base = Path(path).resolve().parent
    entries: list[SliceEntry] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ExportError(f"manifest line {line_no}: invalid JSON ({e.msg})") from e
            for name in ("volume_id", "slice_index", "path"):
                if name not in obj:
                    raise ExportError(f"manifest line {line_no}: missing field {name!r}")
            raw = str(obj["path"])
            entries.append(
                SliceEntry(
                    volume_id=str(obj["volume_id"]),
                    slice_index=int(obj["slice_index"]),
                    path=raw if Path(raw).is_absolute() else str(base / raw),
                    rescale_slope=float(obj.get("rescale_slope", 1.0)),
                    rescale_intercept=float(obj.get("rescale_intercept", 0.0)),
                )
            )
    if not entries:
        raise ExportError("manifest contains no slices")
    return entries


def _window_to_uint8(stored: np.ndarray, entry: SliceEntry, config: ExporterConfig) -> np.ndarray:
    physical = stored.astype(np.float64) * entry.rescale_slope + entry.rescale_intercept
    if config.window_center is not None:
        lo = config.window_center - config.window_width / 2.0
        hi = config.window_center + config.window_width / 2.0
    else:
        lo = float(physical.min())
        hi = float(physical.max())
        if hi == lo:
            return np.zeros(stored.shape, dtype=np.uint8)
    scaled = (np.clip(physical, lo, hi) - lo) * (255.0 / (hi - lo))
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def load_preprocessed(entry: SliceEntry, config: ExporterConfig) -> torch.Tensor:
    """One slice as a (3, 224, 224) normalized float tensor."""
    with Image.open(entry.path) as im:
        if im.format != "PNG":
            raise ExportError(f"{entry.path}: expected PNG, got {im.format}")
        if im.mode == "L":
            stored = np.asarray(im)
        elif im.mode in ("I;16", "I;16B", "I"):
            stored = np.asarray(im).astype(np.int64)
        else:
            raise ExportError(f"{entry.path}: expected grayscale, got mode {im.mode!r}")
    gray = _window_to_uint8(np.asarray(stored), entry, config)
    resized = Image.fromarray(gray, mode="L").resize((224, 224), Image.Resampling.BILINEAR)
    arr = np.asarray(resized, dtype=np.float32) / 255.0
    chan = np.stack([arr, arr, arr], axis=0)
    mean = np.asarray(IMAGENET_MEAN, dtype=np.float32).reshape(3, 1, 1)
    std = np.asarray(IMAGENET_STD, dtype=np.float32).reshape(3, 1, 1)
    return torch.from_numpy((chan - mean) / std)


def build_model(config: ExporterConfig) -> tuple[torch.nn.Module, str]:
    """ResNet50 for the configured vector source; returns (model, weight id)."""
    from torchvision import models

    if config.weights == "imagenet":
        weights = models.ResNet50_Weights.IMAGENET1K_V1
        model = models.resnet50(weights=weights)
        weight_id = str(weights)
    elif config.weights == "random":
        torch.manual_seed(config.seed)
        model = models.resnet50(weights=None)
        weight_id = f"random(seed={config.seed})"
    else:
        model = models.resnet50(weights=None)
        state = torch.load(config.weights, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
        weight_id = f"file:{config.weights}"
    if config.source == "pooled":
        model.fc = torch.nn.Identity()
    model.eval()
    model.to(config.device)
    for p in model.parameters():
        p.requires_grad_(False)
    return model, weight_id


def _batches(entries: list[SliceEntry], size: int) -> Iterator[list[SliceEntry]]:
    for start in range(0, len(entries), size):
        yield entries[start : start + size]


def write_sseb(path: str | Path, dim: int, records: list[tuple[str, np.ndarray]]) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIQ", MAGIC, VERSION, dim, len(records)))
        for key, vec in records:
            raw = key.encode("utf-8")
            vec = np.asarray(vec, dtype="<f4").reshape(-1)
            if vec.size != dim:
                raise ExportError(f"record {key!r}: got {vec.size} floats, expected {dim}")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(vec.tobytes())


def export_embeddings(config: ExporterConfig) -> dict:
    """Run the export; returns the sidecar document.

    Raises ExportError after writing the per-slice error log if any
    slice cannot be processed; the output file is only written when
    every slice succeeded.
    """
    entries = read_manifest(config.manifest)
    seen: set[str] = set()
    for e in entries:
        if e.key in seen:
            raise ExportError(f"duplicate manifest key {e.key!r}")
        seen.add(e.key)

    model, weight_id = build_model(config)
    records: list[tuple[str, np.ndarray]] = []
    failures: list[tuple[str, str]] = []
    with torch.no_grad():
        for batch in _batches(entries, config.batch_size):
            tensors = []
            ok_entries = []
            for entry in batch:
                try:
                    tensors.append(load_preprocessed(entry, config))
                    ok_entries.append(entry)
                except (OSError, ExportError) as e:
                    failures.append((entry.key, str(e)))
            if not tensors:
                continue
            out = model(torch.stack(tensors).to(config.device)).cpu().numpy()
            for entry, vec in zip(ok_entries, out):
                vec = vec.astype(np.float32, copy=False)
                if not np.any(vec):
                    failures.append((entry.key, "model produced an all-zero vector"))
                    continue
                records.append((entry.key, vec))

    if failures:
        log_path = config.error_log or (str(config.out) + ".errors.log")
        with open(log_path, "w", encoding="utf-8") as fh:
            for key, msg in failures:
                fh.write(f"{key}\t{msg}\n")
        raise ExportError(f"{len(failures)} slice(s) failed; per-slice log at {log_path}")

    write_sseb(config.out, config.dim, records)
    sidecar = {
        "tool": "sliceembed",
        "format": "SSEB v1",
        "source": config.source,
        "dim": config.dim,
        "count": len(records),
        "weights": weight_id,
        "device": config.device,
        "preprocessing": {
            "window": (
                {"center": config.window_center, "width": config.window_width}
                if config.window_center is not None
                else "per-slice min-max"
            ),
            "resize": "224x224 bilinear",
            "channels": "gray replicated x3",
            "normalization": {"mean": IMAGENET_MEAN, "std": IMAGENET_STD},
        },
    }
    with open(str(config.out) + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar
