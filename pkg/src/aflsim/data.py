"""Dataset ingestion and non-IID partitioning.

Supports IDX image/label files (the MNIST container format, gzip
optional), deterministic synthetic Gaussian blobs, and label-skewed
client allocation via per-class Dirichlet draws.  Server-held
distillation and test subsets are carved out before client allocation so
they stay disjoint from every shard.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    IdxCountMismatchError,
    IdxMagicError,
    IdxTruncatedError,
    PartitionInfeasibleError,
)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, dim), float64 in [0, 1]
    labels: np.ndarray  # (n,), int64 class indices
    class_count: int

    def __post_init__(self):
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature rows vs {self.labels.shape[0]} labels"
            )
        if self.labels.size and int(self.labels.max()) >= self.class_count:
            raise ValueError(f"label {int(self.labels.max())} >= class_count {self.class_count}")

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class PartitionSpec:
    """Disjoint index sets: one shard per client plus server hold-outs."""

    client_shards: tuple[np.ndarray, ...]
    distill_indices: np.ndarray
    test_indices: np.ndarray
    dirichlet_alpha: float
    seed: int

    @property
    def num_clients(self) -> int:
        return len(self.client_shards)


def _read_exact(f, n: int, path: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise IdxTruncatedError(f"{path}: expected {n} more bytes, got {len(data)}")
    return data


def _open_maybe_gzip(path: str):
    with open(path, "rb") as probe:
        magic = probe.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(images_path: str, labels_path: str) -> Dataset:
    """Load an IDX image/label file pair into a flat-feature Dataset.

    Pixels are scaled by 1/255.  Raises distinct errors for a bad magic
    number, a truncated payload, or an image/label count mismatch, each
    naming the offending file.
    """
    with _open_maybe_gzip(images_path) as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, images_path))
        if magic != IDX_IMAGE_MAGIC:
            raise IdxMagicError(f"{images_path}: magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}")
        count, rows, cols = struct.unpack(">III", _read_exact(f, 12, images_path))
        raw = _read_exact(f, count * rows * cols, images_path)
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)

    with _open_maybe_gzip(labels_path) as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, labels_path))
        if magic != IDX_LABEL_MAGIC:
            raise IdxMagicError(f"{labels_path}: magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}")
        (label_count,) = struct.unpack(">I", _read_exact(f, 4, labels_path))
        labels = np.frombuffer(_read_exact(f, label_count, labels_path), dtype=np.uint8)

    if label_count != count:
        raise IdxCountMismatchError(
            f"{images_path} has {count} images but {labels_path} has {label_count} labels"
        )
    features = pixels.astype(np.float64) / 255.0
    labels64 = labels.astype(np.int64)
    classes = int(labels64.max()) + 1 if label_count else 0
    return Dataset(features, labels64, classes)


def synth_blobs(
    class_count: int,
    per_class: int,
    dim: int,
    seed: int,
    spread: float = 0.08,
) -> Dataset:
    """Gaussian cluster per class, means drawn uniformly in [0.2, 0.8]^dim.

    Samples are clipped into [0, 1]; with the default spread the clipping
    is negligible.  Fully deterministic per seed.
    """
    if class_count < 1 or per_class < 1 or dim < 1:
        raise ValueError("class_count, per_class and dim must all be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xB10B)))
    means = rng.uniform(0.2, 0.8, size=(class_count, dim))
    feats = np.empty((class_count * per_class, dim))
    labels = np.empty(class_count * per_class, dtype=np.int64)
    for c in range(class_count):
        block = slice(c * per_class, (c + 1) * per_class)
        feats[block] = means[c] + spread * rng.standard_normal((per_class, dim))
        labels[block] = c
    np.clip(feats, 0.0, 1.0, out=feats)
    order = rng.permutation(class_count * per_class)
    return Dataset(feats[order], labels[order], class_count)


def dirichlet_partition(
    ds: Dataset,
    num_clients: int,
    alpha: float,
    distill_frac: float = 0.005,
    test_frac: float = 0.0,
    seed: int = 0,
) -> PartitionSpec:
    """Carve out test and distillation sets, then split the rest per class.

    Test indices are drawn uniformly first, then the distillation set is
    drawn uniformly from the remaining training pool (its size is
    round(distill_frac * pool size)).  Each class of the final pool is
    divided across clients by one Dirichlet(alpha, ..., alpha) draw.
    Raises PartitionInfeasibleError if any client ends up empty.
    """
    if num_clients < 1:
        raise ValueError("need at least one client")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    for name, frac in (("distill_frac", distill_frac), ("test_frac", test_frac)):
        if not 0.0 <= frac < 0.5:
            raise ValueError(f"{name} must be in [0, 0.5), got {frac}")

    n = len(ds)
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xD117)))
    perm = rng.permutation(n)
    n_test = int(round(test_frac * n))
    test_idx = np.sort(perm[:n_test])

    pool = perm[n_test:]
    n_distill = int(round(distill_frac * pool.size))
    distill_idx = np.sort(pool[:n_distill])
    pool = np.sort(pool[n_distill:])

    shards: list[list[int]] = [[] for _ in range(num_clients)]
    pool_labels = ds.labels[pool]
    for c in range(ds.class_count):
        members = pool[pool_labels == c]
        if members.size == 0:
            continue
        members = rng.permutation(members)
        props = rng.dirichlet(np.full(num_clients, alpha))
        cuts = (np.cumsum(props)[:-1] * members.size).astype(np.int64)
        for cid, chunk in enumerate(np.split(members, cuts)):
            shards[cid].extend(chunk.tolist())

    if any(len(s) == 0 for s in shards):
        empty = [i for i, s in enumerate(shards) if not s]
        raise PartitionInfeasibleError(
            f"clients {empty} received no samples (alpha={alpha}, seed={seed}); retry with a new seed"
        )
    return PartitionSpec(
        client_shards=tuple(np.sort(np.asarray(s, dtype=np.int64)) for s in shards),
        distill_indices=distill_idx.astype(np.int64),
        test_indices=test_idx.astype(np.int64),
        dirichlet_alpha=float(alpha),
        seed=int(seed),
    )


def save_partition(spec: PartitionSpec, path: str) -> None:
    """Write a partition as a plain-text key-value + index-list file."""
    with open(path, "w") as f:
        f.write("format = aflsim-partition-v1\n")
        f.write(f"clients = {spec.num_clients}\n")
        f.write(f"dirichlet_alpha = {spec.dirichlet_alpha!r}\n")
        f.write(f"seed = {spec.seed}\n")
        f.write("distill = " + " ".join(map(str, spec.distill_indices.tolist())) + "\n")
        f.write("test = " + " ".join(map(str, spec.test_indices.tolist())) + "\n")
        for cid, shard in enumerate(spec.client_shards):
            f.write(f"client_{cid} = " + " ".join(map(str, shard.tolist())) + "\n")


def load_partition(path: str) -> PartitionSpec:
    kv: dict[str, str] = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
    if kv.get("format") != "aflsim-partition-v1":
        raise ValueError(f"{path}: not an aflsim partition file")

    def indices(text: str) -> np.ndarray:
        return np.asarray([int(t) for t in text.split()], dtype=np.int64)

    num = int(kv["clients"])
    return PartitionSpec(
        client_shards=tuple(indices(kv[f"client_{cid}"]) for cid in range(num)),
        distill_indices=indices(kv["distill"]),
        test_indices=indices(kv["test"]),
        dirichlet_alpha=float(kv["dirichlet_alpha"]),
        seed=int(kv["seed"]),
    )
