"""MNIST-format ingestion and client partitioning.

IDX layout is parsed bit-exactly: big-endian, images magic 0x00000803 with
dims [count, 28, 28], labels magic 0x00000801 with dims [count]. Files may
be gzip-wrapped; that is detected from the 0x1f 0x8b prefix, not the name.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, IdxParseError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
IMAGE_ROWS = 28
IMAGE_COLS = 28


@dataclass
class Dataset:
    """Labeled examples with pixels already scaled to [0, 1].

    ``images`` is (n, 784) float64; ``labels`` is (n,) int64 in [0, 9].
    """

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ConfigError("dataset: image count != label count")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() > 9):
            raise ConfigError("dataset: labels outside [0, 9]")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.images[indices], self.labels[indices])


def _read_file(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _read_header(path, data: bytes, expected_magic: int, n_dims: int) -> tuple[int, ...]:
    header_len = 4 * (1 + n_dims)
    if len(data) < header_len:
        raise IdxParseError(path, len(data), "truncated header")
    magic = struct.unpack(">I", data[:4])[0]
    if magic != expected_magic:
        raise IdxParseError(
            path, 0, f"wrong magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    return struct.unpack(f">{n_dims}I", data[4:header_len])


def load_idx(images_path, labels_path) -> Dataset:
    """Parse an IDX image/label pair into a Dataset.

    Raises IdxParseError naming the file and byte offset on wrong magic,
    truncated payload, bad dimensions, or a count mismatch between files.
    """
    img_data = _read_file(images_path)
    count, rows, cols = _read_header(images_path, img_data, IMAGES_MAGIC, 3)
    if (rows, cols) != (IMAGE_ROWS, IMAGE_COLS):
        raise IdxParseError(images_path, 8, f"image dims {rows}x{cols}, expected 28x28")
    need = 16 + count * rows * cols
    if len(img_data) < need:
        raise IdxParseError(images_path, len(img_data), "truncated image payload")
    pixels = np.frombuffer(img_data, dtype=np.uint8, count=count * rows * cols, offset=16)

    lbl_data = _read_file(labels_path)
    (lbl_count,) = _read_header(labels_path, lbl_data, LABELS_MAGIC, 1)
    if lbl_count != count:
        raise IdxParseError(
            labels_path, 4, f"{lbl_count} labels for {count} images in {images_path}"
        )
    if len(lbl_data) < 8 + lbl_count:
        raise IdxParseError(labels_path, len(lbl_data), "truncated label payload")
    labels = np.frombuffer(lbl_data, dtype=np.uint8, count=lbl_count, offset=8)
    if lbl_count and labels.max() > 9:
        raise IdxParseError(labels_path, 8, "label byte outside [0, 9]")

    images = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    return Dataset(images, labels.astype(np.int64))


def write_idx(dataset: Dataset, images_path, labels_path, compress: bool = False) -> None:
    """Inverse of load_idx; used for fixtures and synthetic corpora."""
    n = len(dataset)
    pixels = np.rint(dataset.images * 255.0).astype(np.uint8)
    img = struct.pack(">IIII", IMAGES_MAGIC, n, IMAGE_ROWS, IMAGE_COLS) + pixels.tobytes()
    lbl = struct.pack(">II", LABELS_MAGIC, n) + dataset.labels.astype(np.uint8).tobytes()
    for path, blob in ((images_path, img), (labels_path, lbl)):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        if compress:
            # mtime pinned so identical data gives identical bytes
            blob = gzip.compress(blob, mtime=0)
        Path(path).write_bytes(blob)


@dataclass
class PartitionMap:
    """Disjoint example-index shards, one entry per client id."""

    client_shards: dict[int, np.ndarray]

    def __post_init__(self):
        seen = set()
        for cid, shard in self.client_shards.items():
            if len(shard) == 0:
                raise ConfigError(f"partition: client {cid} got an empty shard")
            ids = set(int(i) for i in shard)
            if seen & ids:
                raise ConfigError("partition: shards overlap")
            seen |= ids

    def shard(self, client_id: int) -> np.ndarray:
        return self.client_shards[client_id]

    @property
    def n_clients(self) -> int:
        return len(self.client_shards)


def partition_non_iid(
    dataset: Dataset, n_clients: int, shards_per_client: int, seed
) -> PartitionMap:
    """Label-sorted shard assignment, the classic pathological split.

    Examples are stably sorted by label, cut into n_clients*shards_per_client
    equal contiguous shards (remainder truncated), and shards are dealt to
    clients by a seeded permutation.
    """
    rng = np.random.default_rng(seed)
    n = len(dataset)
    if n_clients < 1 or shards_per_client < 1:
        raise ConfigError("partition: n_clients and shards_per_client must be >= 1")
    total_shards = n_clients * shards_per_client
    shard_size = n // total_shards
    if shard_size == 0:
        raise ConfigError(f"partition: {n} examples cannot fill {total_shards} shards")
    order = np.argsort(dataset.labels, kind="stable")
    order = order[: total_shards * shard_size]
    shards = order.reshape(total_shards, shard_size)
    deal = rng.permutation(total_shards)
    client_shards = {
        cid: np.sort(np.concatenate([shards[s] for s in deal[cid * shards_per_client : (cid + 1) * shards_per_client]]))
        for cid in range(n_clients)
    }
    return PartitionMap(client_shards)


def partition_iid(dataset: Dataset, n_clients: int, seed) -> PartitionMap:
    """Seeded shuffle, then equal contiguous cuts (sizes differ by at most 1)."""
    rng = np.random.default_rng(seed)
    n = len(dataset)
    if n_clients < 1:
        raise ConfigError("partition: n_clients must be >= 1")
    if n_clients > n:
        raise ConfigError(f"partition: {n_clients} clients exceed {n} examples")
    order = rng.permutation(n)
    cuts = np.array_split(order, n_clients)
    return PartitionMap({cid: np.sort(cut) for cid, cut in enumerate(cuts)})
