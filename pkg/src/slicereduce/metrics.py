"""Pairwise similarity measures over 8-bit slice images.

Four measures: windowed structural similarity (ssim), normalized mutual
information (nmi), 64-bit difference hashes compared by Hamming distance
(dhash / hamming), and cosine similarity over embedding vectors.

All functions are pure and reentrant; ssim, nmi, hamming and cosine are
exactly symmetric in their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import lanczos
from .errors import (
    DegenerateHistogram,
    DimensionMismatch,
    ImageTooSmall,
    ZeroVector,
)
from .model import DEFAULT_MI_BINS, SliceImage

# Reduced-image geometry for the difference hash: 8 rows of 9 pixels
# give 8 left/right comparisons per row, 64 bits total.
HASH_WIDTH = 9
HASH_HEIGHT = 8
HASH_BITS = 64


@dataclass(frozen=True)
class SsimParams:
    """Stabilizer constants and window shape for ssim."""

    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    window_size: int = 11
    gaussian_sigma: float = 1.5

    def __post_init__(self) -> None:
        if self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("k1 and k2 must be > 0")
        if self.window_size % 2 != 1:
            raise ValueError("window_size must be odd")


DEFAULT_SSIM = SsimParams()


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    t = np.arange(size, dtype=np.float64) - half
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable correlation, keeping only fully-interior window positions."""
    n = kernel.shape[0]
    out = sliding_window_view(img, n, axis=1) @ kernel
    out = sliding_window_view(out, n, axis=0) @ kernel
    return out


def _as_float(image: SliceImage) -> np.ndarray:
    return image.pixels.astype(np.float64)


def ssim(x: SliceImage, y: SliceImage, params: SsimParams = DEFAULT_SSIM) -> float:
    """Mean structural similarity over all fully-interior window positions.

    Window statistics (means, variances, covariance) are Gaussian
    weighted; the two stabilizers are (k1*L)^2 and (k2*L)^2 with L the
    dynamic range. Identical images score exactly 1.
    """
    if (x.width, x.height) != (y.width, y.height):
        raise DimensionMismatch(
            f"ssim needs equal dimensions, got {x.width}x{x.height} vs {y.width}x{y.height}"
        )
    n = params.window_size
    if x.width < n or x.height < n:
        raise ImageTooSmall(f"ssim needs at least {n}x{n} pixels, got {x.width}x{x.height}")

    kernel = _gaussian_kernel(n, params.gaussian_sigma)
    fx = _as_float(x)
    fy = _as_float(y)
    mu_x = _filter_valid(fx, kernel)
    mu_y = _filter_valid(fy, kernel)
    e_xx = _filter_valid(fx * fx, kernel)
    e_yy = _filter_valid(fy * fy, kernel)
    e_xy = _filter_valid(fx * fy, kernel)
    var_x = e_xx - mu_x * mu_x
    var_y = e_yy - mu_y * mu_y
    cov_xy = e_xy - mu_x * mu_y

    c1 = (params.k1 * params.dynamic_range) ** 2
    c2 = (params.k2 * params.dynamic_range) ** 2
    ssim_map = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    return float(ssim_map.mean())


def _entropy_bits(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def nmi(x: SliceImage, y: SliceImage, bins: int = DEFAULT_MI_BINS) -> float:
    """Normalized mutual information (H(X) + H(Y)) / H(X, Y), in [1, 2].

    Built from a bins x bins joint histogram of co-located pixel values
    with uniform bin edges over [0, 255]; entropies in bits.
    """
    if (x.width, x.height) != (y.width, y.height):
        raise DimensionMismatch(
            f"nmi needs equal dimensions, got {x.width}x{x.height} vs {y.width}x{y.height}"
        )
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    joint, _, _ = np.histogram2d(
        x.pixels.reshape(-1),
        y.pixels.reshape(-1),
        bins=bins,
        range=[[0, 255], [0, 255]],
    )
    p = joint / joint.sum()
    h_xy = _entropy_bits(p.reshape(-1))
    if h_xy == 0.0:
        raise DegenerateHistogram()
    h_x = _entropy_bits(p.sum(axis=1))
    h_y = _entropy_bits(p.sum(axis=0))
    return (h_x + h_y) / h_xy


def dhash_array(pixels: np.ndarray) -> int:
    """dhash over a bare 2-D array of 8-bit gray values."""
    reduced = lanczos.resize(pixels, HASH_WIDTH, HASH_HEIGHT)
    reduced = np.clip(np.floor(reduced + 0.5), 0.0, 255.0)
    bits = reduced[:, 1:] > reduced[:, :-1]
    packed = np.packbits(bits, bitorder="little").tobytes()
    return int.from_bytes(packed, "little")


def dhash(x: SliceImage) -> int:
    """64-bit difference hash of one image.

    The image is low-pass resampled to 9x8 with a Lanczos-3 kernel,
    rounded half-up and clamped to [0, 255]; each pixel is then compared
    with its right neighbor, bit = 1 iff the neighbor is strictly
    larger. The comparison for row r, column c lands at bit position
    r*8 + c, with position 63 the most significant bit.
    """
    return dhash_array(x.pixels)


def hamming(h1: int, h2: int) -> int:
    """Number of differing bits between two 64-bit hashes, in [0, 64]."""
    return ((h1 ^ h2) & 0xFFFFFFFFFFFFFFFF).bit_count()


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity dot(a,b) / (|a||b|), clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cosine needs equal dimensions, got {a.shape} vs {b.shape}")
    if a.size < 1:
        raise DimensionMismatch("cosine needs dimension >= 1")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector()
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))
