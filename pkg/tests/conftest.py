from __future__ import annotations

import numpy as np
import pytest

from slicereduce.model import SliceImage


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def image(arr) -> SliceImage:
    return SliceImage.from_array(np.asarray(arr, dtype=np.uint8))


def random_image(rng: np.random.Generator, h: int = 64, w: int = 64) -> SliceImage:
    return image(rng.integers(0, 256, (h, w), dtype=np.uint8))


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """20 small phantom volumes; shared by CLI/reducer integration tests."""
    from slicereduce.synth import generate_corpus

    root = tmp_path_factory.mktemp("small_corpus")
    manifest = generate_corpus(root, volumes=20, slices=(3, 12), size=64, seed=11)
    return manifest
