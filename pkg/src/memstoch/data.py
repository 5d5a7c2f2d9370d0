"""MNIST IDX loading, normalization and input-noise corruption."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")

DATA_DIR_ENV = "MEMSTOCH_DATA_DIR"


class IdxFormatError(ValueError):
    """Malformed IDX content; the message carries the byte offset."""


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    split: str = "train"

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    def head(self, n: int | None) -> "Dataset":
        if n is None or n >= len(self):
            return self
        return Dataset(self.images[:n], self.labels[:n], self.split)


@dataclass(frozen=True)
class NoiseSpec:
    variance: float
    seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("noise variance must be >= 0")


def _open(path) -> bytes:
    path = Path(path)
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _header(raw: bytes, magic: int, ndims: int, what: str) -> tuple[int, ...]:
    need = 4 * (1 + ndims)
    if len(raw) < need:
        raise IdxFormatError(f"{what}: truncated header, {len(raw)} bytes < {need} at offset 0")
    (m,) = struct.unpack(">I", raw[:4])
    if m != magic:
        raise IdxFormatError(f"{what}: bad magic 0x{m:08x} at offset 0 (expected 0x{magic:08x})")
    return struct.unpack(">" + "I" * ndims, raw[4:need])


def read_idx_images(path) -> np.ndarray:
    raw = _open(path)
    n, rows, cols = _header(raw, IMAGE_MAGIC, 3, str(path))
    if (rows, cols) != (28, 28):
        raise IdxFormatError(f"{path}: image size {rows}x{cols} at offset 8, expected 28x28")
    body = len(raw) - 16
    if body < n * rows * cols:
        raise IdxFormatError(
            f"{path}: truncated at offset {len(raw)}, need {16 + n * rows * cols} bytes")
    return np.frombuffer(raw, np.uint8, n * rows * cols, offset=16).reshape(n, rows * cols)


def read_idx_labels(path) -> np.ndarray:
    raw = _open(path)
    (n,) = _header(raw, LABEL_MAGIC, 1, str(path))
    if len(raw) - 8 < n:
        raise IdxFormatError(f"{path}: truncated at offset {len(raw)}, need {8 + n} bytes")
    labels = np.frombuffer(raw, np.uint8, n, offset=8)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise IdxFormatError(f"{path}: label {labels[bad[0]]} out of range at offset {8 + bad[0]}")
    return labels


def load_idx(images_path, labels_path, split: str = "train") -> Dataset:
    """Read an IDX image/label pair (optionally gzipped); pixels scaled to [0, 1]."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise IdxFormatError(
            f"count mismatch at offset 4: {len(images)} images vs {len(labels)} labels")
    return Dataset(images.astype(np.float64) / 255.0, labels.astype(np.int64), split)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path,
              compress: bool = False) -> None:
    """Write ``uint8`` images ``(n, 784)`` and labels as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8).reshape(len(images), -1)
    labels = np.asarray(labels, dtype=np.uint8)
    img = struct.pack(">IIII", IMAGE_MAGIC, len(images), 28, 28) + images.tobytes()
    lab = struct.pack(">II", LABEL_MAGIC, len(labels)) + labels.tobytes()
    for path, blob in ((images_path, img), (labels_path, lab)):
        with open(path, "wb") as f:
            f.write(gzip.compress(blob, mtime=0) if compress else blob)


def _find(data_dir: Path, name: str) -> Path:
    for cand in (name, name + ".gz"):
        if (data_dir / cand).exists():
            return data_dir / cand
    raise FileNotFoundError(f"{name}[.gz] not found in {data_dir}")


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data/mnist"))


def load_mnist(data_dir=None) -> tuple[Dataset, Dataset]:
    """Train and test splits from a directory holding the four canonical files."""
    d = Path(data_dir) if data_dir is not None else default_data_dir()
    train = load_idx(_find(d, TRAIN_FILES[0]), _find(d, TRAIN_FILES[1]), "train")
    test = load_idx(_find(d, TEST_FILES[0]), _find(d, TEST_FILES[1]), "test")
    return train, test


@dataclass(frozen=True)
class MeanNormalizer:
    """Per-pixel mean subtraction followed by one global min-max rescale.

    Fitted on the training split and applied unchanged to any other split.
    Pixels that are constant in the training data map to 0. Output is clipped
    to [0, 1] so unseen data stays encodable as stream probabilities.
    """

    mean: np.ndarray
    lo: float
    hi: float
    live: np.ndarray

    @classmethod
    def fit(cls, images: np.ndarray) -> "MeanNormalizer":
        mean = images.mean(axis=0)
        live = images.max(axis=0) > images.min(axis=0)
        centered = (images - mean)[:, live]
        lo = float(centered.min()) if centered.size else 0.0
        hi = float(centered.max()) if centered.size else 0.0
        return cls(mean, lo, hi, live)

    def scale(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-pixel ``(gain, offset)`` of the affine map ``x -> gain*x + offset``."""
        span = self.hi - self.lo
        if span <= 0:
            z = np.zeros_like(self.mean)
            return z, z
        gain = np.where(self.live, 1.0 / span, 0.0)
        offset = np.where(self.live, -(self.mean + self.lo) / span, 0.0)
        return gain, offset

    def __call__(self, images: np.ndarray) -> np.ndarray:
        gain, offset = self.scale()
        return np.clip(images * gain + offset, 0.0, 1.0)


def mean_normalize(train: Dataset, apply_to: Dataset) -> Dataset:
    norm = MeanNormalizer.fit(train.images)
    return Dataset(norm(apply_to.images), apply_to.labels, apply_to.split)


def normalize_pair(train: Dataset, test: Dataset, method: str = "mean") -> tuple[Dataset, Dataset]:
    """Normalize both splits with training statistics.

    ``"mean"`` is :class:`MeanNormalizer`; ``"scale"`` keeps the plain
    ``pixel / 255`` values produced by the loader.
    """
    if method == "scale":
        return train, test
    if method != "mean":
        raise ValueError(f"unknown normalization {method!r}")
    norm = MeanNormalizer.fit(train.images)
    return (Dataset(norm(train.images), train.labels, train.split),
            Dataset(norm(test.images), test.labels, test.split))


def add_gaussian_noise(ds: Dataset, spec: NoiseSpec) -> Dataset:
    """I.i.d. zero-mean Gaussian pixel noise, clipped back into [0, 1]."""
    if spec.variance == 0:
        return ds
    rng = np.random.default_rng(spec.seed)
    noisy = ds.images + rng.normal(0.0, np.sqrt(spec.variance), size=ds.images.shape)
    return Dataset(np.clip(noisy, 0.0, 1.0), ds.labels, ds.split)


def write_pgm(path, image: np.ndarray, side: int = 28) -> None:
    """Binary (P5) PGM of one [0, 1] image."""
    pix = np.clip(np.rint(np.asarray(image).reshape(side, side) * 255), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (side, side))
        f.write(pix.tobytes())
