import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_nmi, naive_ssim
from conftest import image, random_image
from slicereduce.errors import (
    DegenerateHistogram,
    DimensionMismatch,
    ImageTooSmall,
    ZeroVector,
)
from slicereduce.metrics import cosine, hamming, nmi, ssim


class TestSsim:
    def test_identity(self, rng):
        x = random_image(rng)
        assert ssim(x, x) == pytest.approx(1.0, abs=1e-9)

    def test_constant_images_closed_form(self):
        # sigma terms vanish for constant images, leaving the luminance
        # factor (2*100*120 + 6.5025) / (100^2 + 120^2 + 6.5025)
        x = image(np.full((32, 32), 100))
        y = image(np.full((32, 32), 120))
        expected = (2 * 100 * 120 + 6.5025) / (100**2 + 120**2 + 6.5025)
        assert ssim(x, y) == pytest.approx(expected, abs=1e-6)
        assert ssim(x, y) == pytest.approx(0.983611, abs=1e-6)

    def test_symmetry_exact(self, rng):
        for _ in range(5):
            x, y = random_image(rng, 32, 48), random_image(rng, 32, 48)
            assert ssim(x, y) == ssim(y, x)

    def test_matches_bruteforce(self, rng):
        for _ in range(5):
            a = rng.integers(0, 256, (24, 24), dtype=np.uint8)
            b = np.clip(a.astype(int) + rng.integers(-40, 41, a.shape), 0, 255).astype(np.uint8)
            assert ssim(image(a), image(b)) == pytest.approx(naive_ssim(a, b), abs=1e-6)

    def test_at_most_one(self, rng):
        for _ in range(10):
            x, y = random_image(rng, 16, 16), random_image(rng, 16, 16)
            assert ssim(x, y) <= 1.0 + 1e-9

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            ssim(random_image(rng, 16, 16), random_image(rng, 16, 17))

    def test_too_small(self, rng):
        with pytest.raises(ImageTooSmall):
            ssim(random_image(rng, 8, 8), random_image(rng, 8, 8))


class TestNmi:
    def test_identity_is_two(self, rng):
        x = random_image(rng)
        assert nmi(x, x) == pytest.approx(2.0, abs=1e-9)

    def test_checkerboard_independent(self):
        # joint uniform over the 4 cells: H(X)=H(Y)=1, H(X,Y)=2 bits
        x = image([[0, 0], [255, 255]])
        y = image([[0, 255], [0, 255]])
        assert nmi(x, y, bins=2) == pytest.approx(1.0, abs=1e-12)

    def test_both_constant_degenerate(self):
        x = image(np.full((8, 8), 3))
        y = image(np.full((8, 8), 250))
        with pytest.raises(DegenerateHistogram):
            nmi(x, y, bins=2)

    def test_one_constant_is_one(self, rng):
        x = image(np.zeros((16, 16)))
        y = random_image(rng, 16, 16)
        assert nmi(x, y) == pytest.approx(1.0, abs=1e-9)

    def test_symmetry(self, rng):
        for _ in range(5):
            x, y = random_image(rng, 16, 16), random_image(rng, 16, 16)
            assert nmi(x, y) == pytest.approx(nmi(y, x), abs=1e-12)

    def test_range(self, rng):
        for _ in range(10):
            x, y = random_image(rng, 16, 16), random_image(rng, 16, 16)
            v = nmi(x, y)
            assert 1.0 - 1e-9 <= v <= 2.0 + 1e-9

    @pytest.mark.parametrize("bins", [2, 16, 64, 256])
    def test_matches_bruteforce(self, rng, bins):
        a = rng.integers(0, 256, (24, 24), dtype=np.uint8)
        b = np.clip(a.astype(int) + rng.integers(-64, 65, a.shape), 0, 255).astype(np.uint8)
        assert nmi(image(a), image(b), bins) == pytest.approx(naive_nmi(a, b, bins), abs=1e-9)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            nmi(random_image(rng, 16, 16), random_image(rng, 16, 17))


class TestHamming:
    def test_self_distance_zero(self):
        assert hamming(0x123456789ABCDEF0, 0x123456789ABCDEF0) == 0

    def test_full_distance(self):
        assert hamming(0, 0xFFFFFFFFFFFFFFFF) == 64

    def test_specific_bits(self):
        h1 = 0
        h2 = (1 << 0) | (1 << 7) | (1 << 63)
        assert hamming(h1, h2) == 3

    @settings(max_examples=200, deadline=None)
    @given(
        a=st.integers(min_value=0, max_value=2**64 - 1),
        b=st.integers(min_value=0, max_value=2**64 - 1),
        c=st.integers(min_value=0, max_value=2**64 - 1),
    )
    def test_symmetry_range_triangle(self, a, b, c):
        assert hamming(a, b) == hamming(b, a)
        assert 0 <= hamming(a, b) <= 64
        assert hamming(a, c) <= hamming(a, b) + hamming(b, c)


class TestCosine:
    def test_identity(self):
        v = np.array([1.0, -2.0, 3.0])
        assert cosine(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_opposite(self):
        v = np.array([0.5, 2.5, -1.0])
        assert cosine(v, -v) == pytest.approx(-1.0, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(
        alpha=st.floats(min_value=1e-3, max_value=1e3),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_scale_invariance(self, alpha, seed):
        r = np.random.default_rng(seed)
        a = r.normal(size=8)
        b = r.normal(size=8)
        assert cosine(alpha * a, b) == pytest.approx(cosine(a, b), abs=1e-12)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine(np.zeros(4), np.ones(4))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine(np.ones(3), np.ones(4))

    def test_clamped(self, rng):
        for _ in range(20):
            a = rng.normal(size=16)
            assert -1.0 <= cosine(a, a * 3.7) <= 1.0
