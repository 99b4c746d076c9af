"""Method-comparison analytics: retained-set overlap, reduction
statistics, and the timing benchmark harness.

Outputs are plain data (CSV for timings, JSON-friendly dicts for
overlap and stats); no plotting here.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import reducer
from .errors import ManifestMismatch
from .ingest import WindowSpec, load_manifest
from .model import Fraction, MetricSpec, Mode, ReductionPlan, validate_manifest


@dataclass(frozen=True)
class VolumeOverlap:
    volume_id: str
    kept_a: int
    kept_b: int
    intersection: int
    union: int

    @property
    def jaccard(self) -> float:
        return self.intersection / self.union if self.union else 1.0


@dataclass(frozen=True)
class OverlapReport:
    """How alike two retained sets are, as Jaccard and containments."""

    method_a: str
    method_b: str
    jaccard: float
    containment_a: float
    containment_b: float
    volumes: tuple[VolumeOverlap, ...]

    def to_dict(self) -> dict:
        return {
            "method_a": self.method_a,
            "method_b": self.method_b,
            "jaccard": self.jaccard,
            "containment_a": self.containment_a,
            "containment_b": self.containment_b,
            "volumes": [
                {
                    "volume_id": v.volume_id,
                    "kept_a": v.kept_a,
                    "kept_b": v.kept_b,
                    "intersection": v.intersection,
                    "union": v.union,
                    "jaccard": v.jaccard,
                }
                for v in self.volumes
            ],
        }


def _check_same_manifest(plan_a: ReductionPlan, plan_b: ReductionPlan) -> None:
    if set(plan_a.decisions) != set(plan_b.decisions):
        raise ManifestMismatch("plans cover different volume sets")
    for vid, dec_a in plan_a.decisions.items():
        dec_b = plan_b.decisions[vid]
        if dec_a.kept | dec_a.removed != dec_b.kept | dec_b.removed:
            raise ManifestMismatch(f"volume {vid!r}: plans cover different slice sets")


def overlap(plan_a: ReductionPlan, plan_b: ReductionPlan) -> OverlapReport:
    """Set overlap of two plans' kept slices over the same manifest."""
    _check_same_manifest(plan_a, plan_b)
    kept_a = plan_a.kept_pairs()
    kept_b = plan_b.kept_pairs()
    inter = kept_a & kept_b
    union = kept_a | kept_b
    per_volume = []
    for vid in sorted(plan_a.decisions):
        ka = plan_a.decisions[vid].kept
        kb = plan_b.decisions[vid].kept
        per_volume.append(
            VolumeOverlap(
                volume_id=vid,
                kept_a=len(ka),
                kept_b=len(kb),
                intersection=len(ka & kb),
                union=len(ka | kb),
            )
        )
    return OverlapReport(
        method_a=plan_a.method.kind.value,
        method_b=plan_b.method.kind.value,
        jaccard=len(inter) / len(union) if union else 1.0,
        containment_a=len(inter) / len(kept_a) if kept_a else 0.0,
        containment_b=len(inter) / len(kept_b) if kept_b else 0.0,
        volumes=tuple(per_volume),
    )


def overlap_from_kept(
    name_a: str,
    kept_a: set[tuple[str, int]],
    name_b: str,
    kept_b: set[tuple[str, int]],
) -> dict:
    """Overlap of two kept-slice sets given as (volume_id, index) pairs."""
    inter = kept_a & kept_b
    union = kept_a | kept_b
    return {
        "method_a": name_a,
        "method_b": name_b,
        "kept_a": len(kept_a),
        "kept_b": len(kept_b),
        "intersection": len(inter),
        "jaccard": len(inter) / len(union) if union else 1.0,
        "containment_a": len(inter) / len(kept_a) if kept_a else 0.0,
        "containment_b": len(inter) / len(kept_b) if kept_b else 0.0,
    }


def stats(plan: ReductionPlan) -> dict:
    """Kept/removed counts and fractions, per volume and total."""
    volumes = {}
    for vid, dec in sorted(plan.decisions.items()):
        volumes[vid] = {
            "kept": len(dec.kept),
            "removed": len(dec.removed),
            "total": dec.total,
            "kept_fraction": len(dec.kept) / dec.total,
        }
    total = plan.total_slices()
    kept = plan.total_kept()
    return {
        "method": plan.method.describe(),
        "volumes": volumes,
        "totals": {
            "kept": kept,
            "removed": total - kept,
            "slices": total,
            "kept_fraction": kept / total if total else 0.0,
        },
    }


def score_histogram(scores: Sequence[float], bins: int = 16) -> dict:
    """Histogram of pairwise scores (e.g. of the kept set)."""
    arr = np.asarray(list(scores), dtype=np.float64)
    if arr.size == 0:
        return {"edges": [], "counts": [], "n": 0}
    counts, edges = np.histogram(arr, bins=bins)
    return {
        "edges": [float(e) for e in edges],
        "counts": [int(c) for c in counts],
        "n": int(arr.size),
        "min": float(arr.min()),
        "max": float(arr.max()),
    }


# --- timing benchmark ---------------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    method: str
    phase: str
    wall_seconds: float
    slices_per_second: float
    repetition: int


BENCH_PHASES = ("decode", "score_pairs", "select", "total")


def bench(
    manifest_path: str | Path,
    methods: Sequence[MetricSpec],
    repetitions: int = 3,
    *,
    mode: Mode = Fraction(0.1),
    window: WindowSpec | None = None,
) -> list[BenchRow]:
    """Time each method's reduction phases over one manifest.

    Manifest parsing is excluded; image decode (plus per-slice hashing
    or embedding lookup) is measured as its own phase so per-pair costs
    stay comparable across methods. Single-threaded by design.
    """
    entries = load_manifest(manifest_path)
    volumes = validate_manifest(entries)
    n_slices = len(entries)
    rows: list[BenchRow] = []
    for metric in methods:
        for rep in range(1, repetitions + 1):
            plan = reducer.reduce_dataset(volumes, metric, mode, window=window, threads=1)
            phase_walls = {
                "decode": plan.decode_seconds,
                "score_pairs": plan.scoring_seconds,
                "select": plan.selection_seconds,
            }
            phase_walls["total"] = sum(phase_walls.values())
            for phase in BENCH_PHASES:
                wall = phase_walls[phase]
                rows.append(
                    BenchRow(
                        method=metric.kind.value,
                        phase=phase,
                        wall_seconds=wall,
                        slices_per_second=n_slices / wall if wall > 0 else float("inf"),
                        repetition=rep,
                    )
                )
    return rows


def bench_csv_text(rows: Sequence[BenchRow]) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["method", "phase", "wall_seconds", "slices_per_second", "repetition"])
    for row in rows:
        writer.writerow(
            [row.method, row.phase, f"{row.wall_seconds:.6f}", f"{row.slices_per_second:.2f}", row.repetition]
        )
    return buf.getvalue()


def write_bench_csv(rows: Sequence[BenchRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(bench_csv_text(rows))


def bench_summary(rows: Sequence[BenchRow]) -> list[dict]:
    """Min/median wall-seconds per (method, phase) across repetitions."""
    grouped: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        grouped.setdefault((row.method, row.phase), []).append(row.wall_seconds)
    out = []
    for (method, phase), walls in sorted(grouped.items()):
        out.append(
            {
                "method": method,
                "phase": phase,
                "min_seconds": min(walls),
                "median_seconds": statistics.median(walls),
                "repetitions": len(walls),
            }
        )
    return out
