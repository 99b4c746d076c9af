import csv
import io

import pytest

from slicereduce.analysis import (
    bench,
    bench_csv_text,
    bench_summary,
    overlap,
    overlap_from_kept,
    score_histogram,
    stats,
)
from slicereduce.errors import ManifestMismatch
from slicereduce.model import (
    Fraction,
    MetricKind,
    MetricSpec,
    ReductionPlan,
    Threshold,
    VolumeDecision,
)


def plan_with(kept_by_volume: dict[str, set[int]], totals: dict[str, int], method=MetricKind.HASH):
    decisions = {}
    for vid, total in totals.items():
        kept = frozenset(kept_by_volume[vid])
        decisions[vid] = VolumeDecision(vid, kept, frozenset(range(total)) - kept)
    spec = MetricSpec(method) if method is not MetricKind.EVERY_N else MetricSpec(method, n=2)
    return ReductionPlan(method=spec, mode=Threshold(6), decisions=decisions)


class TestOverlap:
    def test_set_arithmetic(self):
        # A={a,b,c}, B={b,c,d} over slices 0..3 of one volume
        a = plan_with({"v": {0, 1, 2}}, {"v": 4})
        b = plan_with({"v": {1, 2, 3}}, {"v": 4})
        rep = overlap(a, b)
        assert rep.jaccard == pytest.approx(0.5)
        assert rep.containment_a == pytest.approx(2 / 3)
        assert rep.containment_b == pytest.approx(2 / 3)

    def test_identical(self):
        a = plan_with({"v": {0, 2}}, {"v": 4})
        b = plan_with({"v": {0, 2}}, {"v": 4}, method=MetricKind.SSIM)
        assert overlap(a, b).jaccard == 1.0

    def test_disjoint(self):
        a = plan_with({"v": {0, 1}}, {"v": 4})
        b = plan_with({"v": {2, 3}}, {"v": 4})
        assert overlap(a, b).jaccard == 0.0

    def test_symmetry(self):
        a = plan_with({"v": {0, 1, 2}, "w": {0}}, {"v": 5, "w": 3})
        b = plan_with({"v": {2, 3}, "w": {0, 1}}, {"v": 5, "w": 3})
        assert overlap(a, b).jaccard == overlap(b, a).jaccard

    def test_per_volume_breakdown(self):
        a = plan_with({"v": {0, 1}, "w": {0}}, {"v": 4, "w": 2})
        b = plan_with({"v": {1, 2}, "w": {0}}, {"v": 4, "w": 2})
        rep = overlap(a, b)
        by_vid = {v.volume_id: v for v in rep.volumes}
        assert by_vid["v"].jaccard == pytest.approx(1 / 3)
        assert by_vid["w"].jaccard == 1.0

    def test_mismatched_volumes(self):
        a = plan_with({"v": {0}}, {"v": 2})
        b = plan_with({"w": {0}}, {"w": 2})
        with pytest.raises(ManifestMismatch):
            overlap(a, b)

    def test_mismatched_indices(self):
        a = plan_with({"v": {0}}, {"v": 2})
        b = plan_with({"v": {0}}, {"v": 3})
        with pytest.raises(ManifestMismatch):
            overlap(a, b)

    def test_from_kept_sets(self):
        rep = overlap_from_kept("x", {("v", 0), ("v", 1)}, "y", {("v", 1), ("v", 2)})
        assert rep["jaccard"] == pytest.approx(1 / 3)
        assert rep["containment_a"] == pytest.approx(0.5)


class TestStats:
    def test_identity_plan(self):
        p = plan_with({"v": {0, 1, 2}}, {"v": 3})
        s = stats(p)
        assert s["totals"]["kept_fraction"] == 1.0

    def test_fractions_sum(self):
        p = plan_with({"v": {0, 2}, "w": {0}}, {"v": 4, "w": 5})
        s = stats(p)
        for vid, row in s["volumes"].items():
            assert row["kept"] + row["removed"] == row["total"]
        assert s["totals"]["kept"] == 3
        assert s["totals"]["slices"] == 9
        assert s["totals"]["kept_fraction"] == pytest.approx(3 / 9)

    def test_one_per_volume(self):
        p = plan_with({"v": {0}, "w": {0}}, {"v": 4, "w": 6})
        assert stats(p)["totals"]["kept_fraction"] == pytest.approx(2 / 10)

    def test_reference_corpus_fraction(self):
        # whole-body corpus reference: hash threshold 6 keeps 48,718 of
        # 541,439 slices = 9.00%
        p = plan_with({"v": set(range(48718))}, {"v": 541439})
        assert stats(p)["totals"]["kept_fraction"] == pytest.approx(0.0900, abs=5e-5)


class TestScoreHistogram:
    def test_counts_sum(self):
        h = score_histogram([1, 2, 3, 4, 60], bins=4)
        assert sum(h["counts"]) == h["n"] == 5
        assert h["min"] == 1 and h["max"] == 60

    def test_empty(self):
        assert score_histogram([])["n"] == 0


class TestBench:
    def test_rows_and_phases(self, small_corpus):
        rows = bench(
            small_corpus,
            [MetricSpec(MetricKind.EVERY_N, n=10), MetricSpec(MetricKind.HASH)],
            repetitions=3,
            mode=Fraction(0.1),
        )
        by_key = {}
        for r in rows:
            by_key.setdefault((r.method, r.phase), []).append(r)
        # three repetition rows per method and phase
        assert all(len(v) == 3 for v in by_key.values())
        assert {m for m, _ in by_key} == {"every-n", "hash"}
        reps = [r.repetition for r in by_key[("hash", "total")]]
        assert reps == [1, 2, 3]

    def test_every_n_selection_is_fast(self, small_corpus):
        rows = bench(small_corpus, [MetricSpec(MetricKind.EVERY_N, n=10)], repetitions=1)
        total = [r for r in rows if r.phase == "total"][0]
        assert total.wall_seconds < 1.0

    def test_csv_shape(self, small_corpus, tmp_path):
        rows = bench(small_corpus, [MetricSpec(MetricKind.HASH)], repetitions=2)
        text = bench_csv_text(rows)
        parsed = list(csv.reader(io.StringIO(text)))
        assert parsed[0] == ["method", "phase", "wall_seconds", "slices_per_second", "repetition"]
        assert len(parsed) == 1 + len(rows)

    def test_summary_reports_min_median(self, small_corpus):
        rows = bench(small_corpus, [MetricSpec(MetricKind.HASH)], repetitions=3)
        summary = bench_summary(rows)
        entry = [s for s in summary if s["phase"] == "total"][0]
        assert entry["min_seconds"] <= entry["median_seconds"]
        assert entry["repetitions"] == 3
