import numpy as np
import pytest

from slicereduce.errors import (
    DuplicateIndex,
    EmptyManifest,
    InvalidTarget,
    NonContiguousIndices,
)
from slicereduce.model import (
    Count,
    Fraction,
    MetricKind,
    MetricSpec,
    PairScore,
    ReductionPlan,
    SliceRef,
    Threshold,
    VolumeDecision,
    validate_manifest,
)


def ref(vid, idx):
    return SliceRef(volume_id=vid, slice_index=idx, path=f"{vid}/{idx}.png")


class TestValidateManifest:
    def test_groups_by_volume(self):
        volumes = validate_manifest([ref("v1", 0), ref("v1", 1), ref("v2", 0)])
        assert [v.volume_id for v in volumes] == ["v1", "v2"]
        assert [len(v) for v in volumes] == [2, 1]

    def test_duplicate_index(self):
        with pytest.raises(DuplicateIndex):
            validate_manifest([ref("v1", 0), ref("v1", 0)])

    def test_non_contiguous(self):
        with pytest.raises(NonContiguousIndices):
            validate_manifest([ref("v1", 0), ref("v1", 2)])

    def test_empty(self):
        with pytest.raises(EmptyManifest):
            validate_manifest([])

    def test_unsorted_input_is_sorted(self):
        volumes = validate_manifest([ref("v1", 2), ref("v1", 0), ref("v1", 1)])
        assert [r.slice_index for r in volumes[0].slices] == [0, 1, 2]

    def test_partition_preserves_count(self):
        rng = np.random.default_rng(3)
        entries = []
        for v in range(12):
            m = int(rng.integers(1, 9))
            entries.extend(ref(f"v{v}", i) for i in range(m))
        rng.shuffle(entries)
        volumes = validate_manifest(entries)
        assert sum(len(v) for v in volumes) == len(entries)

    def test_idempotent(self):
        entries = [ref("b", 0), ref("a", 1), ref("a", 0)]
        once = validate_manifest(entries)
        flat = [r for v in once for r in v.slices]
        again = validate_manifest(flat)
        assert once == again


class TestTypes:
    def test_slice_ref_requires_path(self):
        with pytest.raises(ValueError):
            SliceRef(volume_id="v", slice_index=0, path="")

    def test_slice_ref_rejects_negative_index(self):
        with pytest.raises(ValueError):
            SliceRef(volume_id="v", slice_index=-1, path="x.png")

    def test_pair_score_orders_endpoints(self):
        with pytest.raises(ValueError):
            PairScore(a=2, b=1, score=0.0)
        with pytest.raises(ValueError):
            PairScore(a=1, b=1, score=0.0)

    def test_volume_decision_must_partition(self):
        with pytest.raises(ValueError):
            VolumeDecision("v", kept=frozenset({0, 2}), removed=frozenset())
        with pytest.raises(ValueError):
            VolumeDecision("v", kept=frozenset(), removed=frozenset({0}))
        with pytest.raises(ValueError):
            VolumeDecision("v", kept=frozenset({0}), removed=frozenset({0}))

    def test_metric_spec_parameters(self):
        assert MetricSpec(MetricKind.MI).bins == 256
        assert MetricSpec(MetricKind.EVERY_N, n=5).n == 5
        with pytest.raises(InvalidTarget):
            MetricSpec(MetricKind.EVERY_N)
        with pytest.raises(InvalidTarget):
            MetricSpec(MetricKind.HASH, bins=16)
        with pytest.raises(InvalidTarget):
            MetricSpec(MetricKind.DEEPNET)

    @pytest.mark.parametrize("bad", [0.0, -0.1, 1.5])
    def test_fraction_range(self, bad):
        with pytest.raises(InvalidTarget):
            Fraction(bad)

    def test_count_range(self):
        with pytest.raises(InvalidTarget):
            Count(0)


class TestPlanDigest:
    def _plan(self, scoring=0.0):
        dec = VolumeDecision("v1", kept=frozenset({0, 2}), removed=frozenset({1}))
        return ReductionPlan(
            method=MetricSpec(MetricKind.HASH),
            mode=Threshold(6),
            decisions={"v1": dec},
            scoring_seconds=scoring,
        )

    def test_digest_ignores_timing(self):
        assert self._plan(0.0).digest() == self._plan(123.4).digest()

    def test_digest_tracks_decisions(self):
        other = ReductionPlan(
            method=MetricSpec(MetricKind.HASH),
            mode=Threshold(6),
            decisions={"v1": VolumeDecision("v1", frozenset({0, 1}), frozenset({2}))},
        )
        assert other.digest() != self._plan().digest()
