"""Datasets for the simulator: Gaussian blobs, Dirichlet client partitions, IDX files."""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# mean/std applied after scaling pixels to [0, 1]
NORMALIZATION = {
    "mnist": (0.1307, 0.1307),
    "fmnist": (0.5, 0.5),
    "none": (0.0, 1.0),
}


@dataclass
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int
    image_shape: tuple[int, int] | None = None
    max_value: float = 1.0  # brightest pixel value after normalisation (image triggers)

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be (n, d) with one label per row")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain NaN or Inf")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes, self.image_shape, self.max_value)

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.features, labels, self.num_classes, self.image_shape, self.max_value)


def make_synthetic_dataset(num_classes: int, dim: int, n_per_class: int, spread: float, rng: np.random.Generator) -> Dataset:
    """Isotropic Gaussian blobs; class c is centred at ``2 * e_(c mod dim)``."""
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if dim < 1 or n_per_class < 1:
        raise ValueError("dim and n_per_class must be positive")
    centres = np.zeros((num_classes, dim))
    centres[np.arange(num_classes), np.arange(num_classes) % dim] = 2.0
    labels = np.repeat(np.arange(num_classes), n_per_class)
    features = centres[labels] + spread * rng.standard_normal((labels.size, dim))
    return Dataset(features, labels, num_classes)


def label_entropy(labels: np.ndarray, num_classes: int) -> float:
    if labels.size == 0:
        return 0.0
    p = np.bincount(labels, minlength=num_classes) / labels.size
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def dirichlet_partition(dataset: Dataset, num_clients: int, alpha: float, rng: np.random.Generator) -> list[np.ndarray]:
    """Split sample indices across clients with per-class Dirichlet(alpha) proportions.

    Any client left empty takes one sample from the currently largest client.
    Returns sorted index arrays; together they partition ``range(len(dataset))``.
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot partition an empty dataset")
    if num_clients < 1:
        raise ValueError("num_clients must be positive")
    if num_clients > n:
        raise ValueError(f"{num_clients} clients but only {n} samples")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    buckets: list[list[int]] = [[] for _ in range(num_clients)]
    for c in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == c)
        if idx.size == 0:
            continue
        idx = idx[rng.permutation(idx.size)]
        p = rng.dirichlet(np.full(num_clients, alpha))
        counts = rng.multinomial(idx.size, p)
        start = 0
        for k, cnt in enumerate(counts):
            buckets[k].extend(idx[start:start + cnt].tolist())
            start += cnt
    for k in range(num_clients):
        if not buckets[k]:
            donor = max(range(num_clients), key=lambda j: (len(buckets[j]), -j))
            buckets[k].append(buckets[donor].pop())
    return [np.array(sorted(b), dtype=np.intp) for b in buckets]


def _open(path: Path):
    path = Path(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def read_idx_images(path) -> np.ndarray:
    """Big-endian IDX3: magic 0x00000803, count, rows, cols, then uint8 pixels row-major."""
    with _open(path) as fh:
        header = fh.read(16)
        if len(header) < 16:
            raise ValueError(f"{path}: truncated IDX image header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGES_MAGIC:
            raise ValueError(f"{path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
        data = np.frombuffer(fh.read(), dtype=np.uint8)
    if data.size != count * rows * cols:
        raise ValueError(f"{path}: expected {count * rows * cols} pixels, found {data.size}")
    return data.reshape(count, rows, cols)


def read_idx_labels(path) -> np.ndarray:
    with _open(path) as fh:
        header = fh.read(8)
        if len(header) < 8:
            raise ValueError(f"{path}: truncated IDX label header")
        magic, count = struct.unpack(">II", header)
        if magic != IDX_LABELS_MAGIC:
            raise ValueError(f"{path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
        data = np.frombuffer(fh.read(), dtype=np.uint8)
    if data.size != count:
        raise ValueError(f"{path}: expected {count} labels, found {data.size}")
    return data.astype(np.int64)


def write_idx_images(path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def load_idx_dataset(images_path, labels_path, num_classes: int = 10, normalization: str = "none",
                     pad_to: int | None = None, limit: int | None = None) -> Dataset:
    """Load an IDX pair, scale pixels to [0, 1], optionally pad and standardise."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise ValueError("image and label counts differ")
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    x = images.astype(np.float64) / 255.0
    if pad_to is not None:
        ph, pw = pad_to - x.shape[1], pad_to - x.shape[2]
        if ph < 0 or pw < 0:
            raise ValueError(f"cannot pad {x.shape[1:]} images to {pad_to}")
        x = np.pad(x, ((0, 0), (ph // 2, ph - ph // 2), (pw // 2, pw - pw // 2)))
    mean, std = NORMALIZATION[normalization]
    x = (x - mean) / std
    shape = (x.shape[1], x.shape[2])
    return Dataset(x.reshape(x.shape[0], -1), labels, num_classes, shape, (1.0 - mean) / std)
