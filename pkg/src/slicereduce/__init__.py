"""slicereduce: near-duplicate slice reduction for volumetric-image
pre-training datasets.

Library layout:
    model       domain types and manifest validation
    ingest      manifest I/O, PNG decoding, intensity windowing
    metrics     ssim, nmi, dhash/hamming, cosine
    embeddings  SSEB v1 embedding table reader/writer
    reducer     every-n baseline and greedy pairwise removal
    analysis    overlap, stats, timing benchmarks
    synth       seeded synthetic corpora
    cli         the `slicereduce` command
"""

from .model import TOOL_VERSION as __version__

__all__ = ["__version__"]
