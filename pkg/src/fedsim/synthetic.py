"""Deterministic MNIST-shaped synthetic corpus.

No dataset download exists in this environment, so figure recipes fall back
to a generated 10-class image problem with the same file format, sizes and
value ranges as MNIST. Each class is a smooth random prototype; samples are
brightness-jittered prototypes plus pixel noise, quantized to bytes and
written as ordinary IDX files so the ingestion path is exercised unchanged.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import Dataset, write_idx
from .seeding import rng as derive_rng

TRAIN_IMAGES = "train-images-idx3-ubyte.gz"
TRAIN_LABELS = "train-labels-idx1-ubyte.gz"
TEST_IMAGES = "t10k-images-idx3-ubyte.gz"
TEST_LABELS = "t10k-labels-idx1-ubyte.gz"


def _upsample(coarse: np.ndarray, out_size: int) -> np.ndarray:
    """Bilinear upsample of a square grid."""
    src = np.linspace(0.0, coarse.shape[0] - 1, out_size)
    i0 = np.floor(src).astype(int)
    frac = src - i0
    i1 = np.minimum(i0 + 1, coarse.shape[0] - 1)
    rows = coarse[i0] * (1 - frac)[:, None] + coarse[i1] * frac[:, None]
    return rows[:, i0] * (1 - frac)[None, :] + rows[:, i1] * frac[None, :]


def class_prototypes(seed: int, side: int = 28, coarse: int = 7, contrast: float = 0.9) -> np.ndarray:
    """Ten smooth random patterns in [0, contrast], shape (10, side*side)."""
    gen = derive_rng("synthetic-prototypes", seed)
    protos = []
    for _ in range(10):
        field = _upsample(gen.standard_normal((coarse, coarse)), side)
        lo, hi = field.min(), field.max()
        protos.append(((field - lo) / (hi - lo) * contrast).ravel())
    return np.stack(protos)


def make_synthetic(n: int, seed: int, split: str, noise: float = 0.25) -> Dataset:
    """Balanced labeled sample set; byte-quantized exactly like a loaded file."""
    protos = class_prototypes(seed)
    gen = derive_rng("synthetic-samples", seed, split)
    labels = gen.permutation(np.arange(n) % 10)
    brightness = gen.uniform(0.75, 1.0, size=(n, 1))
    x = protos[labels] * brightness + gen.normal(0.0, noise, size=(n, protos.shape[1]))
    bytes_img = np.clip(np.rint(np.clip(x, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    return Dataset(bytes_img.astype(np.float64) / 255.0, labels.astype(np.int64))


def ensure_synthetic_dir(
    directory, n_train: int, n_test: int, seed: int, noise: float = 0.25
) -> dict[str, Path]:
    """Write the four IDX files if absent; regeneration is byte-identical."""
    directory = Path(directory)
    paths = {
        "train_images": directory / TRAIN_IMAGES,
        "train_labels": directory / TRAIN_LABELS,
        "test_images": directory / TEST_IMAGES,
        "test_labels": directory / TEST_LABELS,
    }
    if not all(p.exists() for p in paths.values()):
        train = make_synthetic(n_train, seed, "train", noise)
        test = make_synthetic(n_test, seed, "test", noise)
        write_idx(train, paths["train_images"], paths["train_labels"], compress=True)
        write_idx(test, paths["test_images"], paths["test_labels"], compress=True)
    return paths
