"""Slice selection: the every-n baseline and greedy pairwise removal.

Similarity-based reduction scores every intra-volume slice pair, sorts
the pairs from most similar to most dissimilar, then walks that order
removing the higher-indexed slice of each pair whose endpoints are both
still kept, until the stop rule fires (threshold / count / fraction).

Scoring may run in parallel across volumes; results are gathered and
sorted with a total order (score, a, b) before the strictly sequential
walk, so output is identical for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import metrics
from .embeddings import EmbeddingTable, load_embeddings, lookup
from .errors import InvalidTarget, PairScoreError, PlanManifestMismatch
from .ingest import (
    WindowSpec,
    decode_slice,
    load_manifest,
    load_slice_image,
    manifest_line,
    windowed_float,
)
from .model import (
    Count,
    Fraction,
    MetricKind,
    MetricSpec,
    Mode,
    PairScore,
    ReductionPlan,
    SliceRef,
    Threshold,
    VolumeDecision,
    VolumeSeries,
    describe_mode,
    merge_plans,
)

#: Policy choices recorded in every provenance sidecar so alternative
#: removal/tie-break rules can be compared against this tool's output.
SELECTION_POLICY = {
    "removed_endpoint": "higher_index",
    "tie_break": "ascending_pair",
    "fraction_rounding": "half_up_min_1",
}


@dataclass(frozen=True)
class SortedPairList:
    """All intra-volume pair scores, ordered most-similar-first."""

    pairs: tuple[PairScore, ...]
    larger_is_more_similar: bool


def sort_pairs(scores: Sequence[PairScore], larger_is_more_similar: bool) -> SortedPairList:
    if larger_is_more_similar:
        key = lambda p: (-p.score, p.a, p.b)
    else:
        key = lambda p: (p.score, p.a, p.b)
    return SortedPairList(tuple(sorted(scores, key=key)), larger_is_more_similar)


def reduce_every_n(volume: VolumeSeries, n: int) -> ReductionPlan:
    """Keep every n-th slice: indices with i mod n == 0."""
    if n < 1:
        raise InvalidTarget(f"every-n stride must be >= 1, got {n}")
    t0 = time.perf_counter()
    m = len(volume)
    kept = frozenset(range(0, m, n))
    decision = VolumeDecision(
        volume_id=volume.volume_id,
        kept=kept,
        removed=frozenset(range(m)) - kept,
    )
    return ReductionPlan(
        method=MetricSpec(MetricKind.EVERY_N, n=n),
        mode=Fraction(1.0 / n),
        decisions={volume.volume_id: decision},
        selection_seconds=time.perf_counter() - t0,
    )


# --- pairwise scoring ------------------------------------------------------


def prepare_items(
    volume: VolumeSeries,
    metric: MetricSpec,
    *,
    window: WindowSpec | None = None,
    table: EmbeddingTable | None = None,
) -> list:
    """Per-slice inputs for pair scoring: images, hashes, or vectors."""
    kind = metric.kind
    if kind is MetricKind.DEEPNET:
        if table is None:
            table = load_embeddings(metric.embeddings_path)
        return [lookup(table, ref) for ref in volume.slices]
    if kind is MetricKind.HASH:
        # same pixels dhash(load_slice_image(...)) would see, fused into
        # one float64 lookup to keep per-slice cost low
        return [
            metrics.dhash_array(
                windowed_float(
                    decode_slice(ref),
                    window,
                    rescale_slope=ref.rescale_slope,
                    rescale_intercept=ref.rescale_intercept,
                )
            )
            for ref in volume.slices
        ]
    return [load_slice_image(ref, window) for ref in volume.slices]


def _pair_fn(metric: MetricSpec) -> tuple[Callable, bool]:
    """(score function over prepared items, larger_is_more_similar)."""
    kind = metric.kind
    if kind is MetricKind.HASH:
        return metrics.hamming, False
    if kind is MetricKind.SSIM:
        return metrics.ssim, True
    if kind is MetricKind.MI:
        return (lambda x, y: metrics.nmi(x, y, metric.bins)), True
    if kind is MetricKind.DEEPNET:
        return metrics.cosine, True
    raise InvalidTarget(f"{kind.value} is not a pairwise metric")


def pairwise_scores(volume: VolumeSeries, metric: MetricSpec, items: Sequence) -> SortedPairList:
    """Score all m(m-1)/2 pairs of a volume and sort most-similar-first."""
    m = len(items)
    if metric.kind is MetricKind.HASH and m > 2:
        # Hamming distances of all pairs at once; per-pair calls would
        # dominate wall time on realistic volume sizes
        hashes = np.asarray(items, dtype=np.uint64)
        rows, cols = np.triu_indices(m, 1)
        dists = np.bitwise_count(hashes[rows] ^ hashes[cols])
        scores = [
            PairScore(a=a, b=b, score=d)
            for a, b, d in zip(rows.tolist(), cols.tolist(), dists.tolist())
        ]
        return sort_pairs(scores, larger_is_more_similar=False)
    fn, larger = _pair_fn(metric)
    scores = []
    for a in range(m):
        item_a = items[a]
        for b in range(a + 1, m):
            try:
                scores.append(PairScore(a=a, b=b, score=fn(item_a, items[b])))
            except Exception as e:
                raise PairScoreError(volume.volume_id, a, b, e) from e
    return sort_pairs(scores, larger)


# --- greedy selection -------------------------------------------------------


def _more_similar_than(score: float, t: float, larger_is_more_similar: bool) -> bool:
    return score > t if larger_is_more_similar else score < t


def target_count(mode: Fraction | Count, m: int) -> int:
    """Slices to keep for count/fraction modes (round half-up, floor 1)."""
    if isinstance(mode, Count):
        k = mode.value
        if k > m:
            raise InvalidTarget(f"count {k} exceeds volume size {m}")
        return k
    return max(1, int(math.floor(mode.value * m + 0.5)))


def greedy_reduce(
    pairs: SortedPairList,
    m: int,
    mode: Mode,
    volume_id: str = "volume",
    method: MetricSpec = MetricSpec(MetricKind.HASH),
) -> ReductionPlan:
    """Walk pairs most-similar-first, dropping the higher-indexed slice.

    Threshold mode removes from every visited pair that is strictly more
    similar than the threshold and stops at the first pair that is not;
    afterwards no kept pair is more similar than the threshold. Count
    and fraction modes ignore the threshold test and stop when exactly
    the target number of slices is left. A volume is never emptied.
    """
    t0 = time.perf_counter()
    if m < 1:
        raise InvalidTarget("volume must contain at least one slice")
    kept = [True] * m
    n_kept = m
    if isinstance(mode, Threshold):
        for pair in pairs.pairs:
            if not _more_similar_than(pair.score, mode.value, pairs.larger_is_more_similar):
                break
            if kept[pair.a] and kept[pair.b]:
                kept[pair.b] = False
                n_kept -= 1
    else:
        target = target_count(mode, m)
        for pair in pairs.pairs:
            if n_kept <= target:
                break
            if kept[pair.a] and kept[pair.b]:
                kept[pair.b] = False
                n_kept -= 1
    decision = VolumeDecision(
        volume_id=volume_id,
        kept=frozenset(i for i in range(m) if kept[i]),
        removed=frozenset(i for i in range(m) if not kept[i]),
    )
    return ReductionPlan(
        method=method,
        mode=mode,
        decisions={volume_id: decision},
        selection_seconds=time.perf_counter() - t0,
    )


# --- dataset orchestration ---------------------------------------------------


@dataclass(frozen=True)
class VolumeTiming:
    decode_seconds: float
    scoring_seconds: float
    selection_seconds: float


def reduce_volume(
    volume: VolumeSeries,
    metric: MetricSpec,
    mode: Mode,
    *,
    window: WindowSpec | None = None,
    table: EmbeddingTable | None = None,
) -> ReductionPlan:
    """Score and select one volume, with per-phase wall-times."""
    if metric.kind is MetricKind.EVERY_N:
        return reduce_every_n(volume, metric.n)
    t0 = time.perf_counter()
    items = prepare_items(volume, metric, window=window, table=table)
    t1 = time.perf_counter()
    pairs = pairwise_scores(volume, metric, items)
    t2 = time.perf_counter()
    plan = greedy_reduce(pairs, len(volume), mode, volume.volume_id, method=metric)
    return ReductionPlan(
        method=plan.method,
        mode=plan.mode,
        decisions=plan.decisions,
        decode_seconds=t1 - t0,
        scoring_seconds=t2 - t1,
        selection_seconds=plan.selection_seconds,
    )


def reduce_dataset(
    volumes: Sequence[VolumeSeries],
    metric: MetricSpec,
    mode: Mode,
    *,
    window: WindowSpec | None = None,
    threads: int = 1,
) -> ReductionPlan:
    """Reduce every volume; scoring parallel over volumes, walk sequential."""
    table = load_embeddings(metric.embeddings_path) if metric.kind is MetricKind.DEEPNET else None
    if threads > 1 and len(volumes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            plans = list(
                pool.map(
                    lambda v: reduce_volume(v, metric, mode, window=window, table=table),
                    volumes,
                )
            )
    else:
        plans = [reduce_volume(v, metric, mode, window=window, table=table) for v in volumes]
    return merge_plans(plans)


# --- plan application ---------------------------------------------------------


def filter_entries(plan: ReductionPlan, entries: Sequence[SliceRef]) -> list[SliceRef]:
    """Kept slices only, original manifest order preserved."""
    by_volume: dict[str, set[int]] = {}
    for ref in entries:
        by_volume.setdefault(ref.volume_id, set()).add(ref.slice_index)
    if set(by_volume) != set(plan.decisions):
        missing = set(by_volume) ^ set(plan.decisions)
        raise PlanManifestMismatch(f"plan and manifest volumes differ: {sorted(missing)[:5]}")
    for vid, indices in by_volume.items():
        dec = plan.decisions[vid]
        if dec.kept | dec.removed != indices:
            raise PlanManifestMismatch(f"volume {vid!r}: plan indices do not match manifest")
    return [ref for ref in entries if ref.slice_index in plan.decisions[ref.volume_id].kept]


def manifest_digest(path: str | Path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def provenance_document(plan: ReductionPlan, input_digest: str | None = None) -> dict:
    return {
        "tool": "slicereduce",
        "tool_version": plan.tool_version,
        "method": plan.method.describe(),
        **describe_mode(plan.mode),
        "policy": dict(SELECTION_POLICY),
        "volumes": {
            vid: {"kept": len(dec.kept), "removed": len(dec.removed)}
            for vid, dec in sorted(plan.decisions.items())
        },
        "totals": {
            "kept": plan.total_kept(),
            "removed": plan.total_slices() - plan.total_kept(),
            "slices": plan.total_slices(),
        },
        "timing": {
            "decode_seconds": plan.decode_seconds,
            "scoring_seconds": plan.scoring_seconds,
            "selection_seconds": plan.selection_seconds,
        },
        "input_manifest_digest": input_digest,
        "plan_digest": plan.digest(),
    }


def apply_plan(
    plan: ReductionPlan,
    entries: Sequence[SliceRef],
    out_dir: str | Path | None = None,
    *,
    input_digest: str | None = None,
) -> list[SliceRef]:
    """Filter the manifest down to kept slices; optionally write outputs.

    When out_dir is given, writes reduced.jsonl (same JSON-Lines schema,
    kept slices only) and provenance.json alongside it.
    """
    kept = filter_entries(plan, entries)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "reduced.jsonl", "w", encoding="utf-8") as fh:
            for ref in kept:
                fh.write(manifest_line(ref) + "\n")
        with open(out / "provenance.json", "w", encoding="utf-8") as fh:
            json.dump(provenance_document(plan, input_digest), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return kept


def plan_from_run_dir(run_dir: str | Path) -> tuple[dict, list[SliceRef]]:
    """Load (provenance, kept entries) from a reduce output directory."""
    run = Path(run_dir)
    with open(run / "provenance.json", "r", encoding="utf-8") as fh:
        prov = json.load(fh)
    return prov, load_manifest(run / "reduced.jsonl")
