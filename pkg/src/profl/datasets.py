"""Datasets: IDX-format loaders, a synthetic stand-in, and IID sharding.

Real MNIST/FashionMNIST files (idx3-ubyte images, idx1-ubyte labels,
optionally gzipped) load from a data directory when present.  When they are
not, ``synthetic_blobs`` generates a class-blob dataset with the same shape
(784 features, 10 classes by default) so the full pipeline runs anywhere;
separation is calibrated so a logistic model lands in the mid-90s on clean
data.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801


@dataclass
class Dataset:
    train_x: np.ndarray  # float64 [n, features]
    train_y: np.ndarray  # int64 [n]
    test_x: np.ndarray
    test_y: np.ndarray
    name: str

    @property
    def features(self) -> int:
        return self.train_x.shape[1]

    @property
    def classes(self) -> int:
        return int(max(self.train_y.max(), self.test_y.max())) + 1


def _open_maybe_gzip(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(path: str | Path) -> np.ndarray:
    """Parse one IDX file (big-endian magic, dims, raw uint8 data)."""
    path = Path(path)
    with _open_maybe_gzip(path) as fh:
        data = fh.read()
    (magic,) = struct.unpack_from(">I", data, 0)
    if magic == IDX_MAGIC_LABELS:
        ndim = 1
    elif magic == IDX_MAGIC_IMAGES:
        ndim = 3
    else:
        raise ValueError(f"{path}: unrecognized IDX magic 0x{magic:08x}")
    shape = struct.unpack_from(f">{ndim}I", data, 4)
    offset = 4 + 4 * ndim
    array = np.frombuffer(data, dtype=np.uint8, offset=offset)
    expected = int(np.prod(shape))
    if array.size != expected:
        raise ValueError(f"{path}: expected {expected} bytes of data, found {array.size}")
    return array.reshape(shape)


def _find_idx(data_dir: Path, stem: str) -> Path | None:
    for suffix in ("", ".gz"):
        candidate = data_dir / f"{stem}{suffix}"
        if candidate.exists():
            return candidate
    return None


def load_mnist(
    data_dir: str | Path, train_limit: int = 6000, test_limit: int = 1000
) -> Dataset:
    """Load an MNIST-layout dataset from IDX files, subsampled to desk scale."""
    data_dir = Path(data_dir)
    stems = {
        "train_x": "train-images-idx3-ubyte",
        "train_y": "train-labels-idx1-ubyte",
        "test_x": "t10k-images-idx3-ubyte",
        "test_y": "t10k-labels-idx1-ubyte",
    }
    paths = {}
    for key, stem in stems.items():
        found = _find_idx(data_dir, stem)
        if found is None:
            raise FileNotFoundError(f"missing IDX file {stem}[.gz] under {data_dir}")
        paths[key] = found
    train_x = load_idx(paths["train_x"]).reshape(-1, 784).astype(np.float64) / 255.0
    train_y = load_idx(paths["train_y"]).astype(np.int64)
    test_x = load_idx(paths["test_x"]).reshape(-1, 784).astype(np.float64) / 255.0
    test_y = load_idx(paths["test_y"]).astype(np.int64)
    return Dataset(
        train_x[:train_limit],
        train_y[:train_limit],
        test_x[:test_limit],
        test_y[:test_limit],
        name="mnist",
    )


def synthetic_blobs(
    seed: int,
    n_train: int = 6000,
    n_test: int = 1000,
    features: int = 784,
    classes: int = 10,
    center_scale: float = 0.16,
    noise: float = 1.0,
    name: str = "synthetic",
) -> Dataset:
    """Gaussian class blobs with MNIST-like shape and balanced labels."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB10B]))
    means = rng.normal(0.0, center_scale, size=(classes, features))

    def draw(count: int) -> tuple[np.ndarray, np.ndarray]:
        labels = rng.integers(0, classes, size=count)
        xs = means[labels] + rng.normal(0.0, noise, size=(count, features))
        return xs, labels.astype(np.int64)

    train_x, train_y = draw(n_train)
    test_x, test_y = draw(n_test)
    return Dataset(train_x, train_y, test_x, test_y, name=name)


def iid_shards(
    train_x: np.ndarray, train_y: np.ndarray, n_users: int, rng: np.random.Generator
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffle and split the training set into equal-size user shards."""
    order = rng.permutation(len(train_x))
    shard_size = len(train_x) // n_users
    shards = []
    for u in range(n_users):
        idx = order[u * shard_size : (u + 1) * shard_size]
        shards.append((train_x[idx], train_y[idx]))
    return shards
