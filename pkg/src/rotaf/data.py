"""Datasets, IDX ingestion, client partitioning and synthetic quadratics."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
DATA_ENV = "ROTAF_DATA_DIR"


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int = 10

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels differ in length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx], self.num_classes)


@dataclass(frozen=True)
class PartitionConfig:
    mode: str = "iid"  # iid | noniid
    gamma: float = 1.0

    def __post_init__(self):
        if self.mode not in ("iid", "noniid"):
            raise ValueError(f"unknown partition mode {self.mode!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")


def _read(path) -> bytes:
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as fh:
        return fh.read()


def _parse_idx(raw: bytes, magic: int, what: str) -> np.ndarray:
    if len(raw) < 8:
        raise IdxFormatError(f"{what}: file too short for an IDX header")
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise IdxFormatError(f"{what}: bad magic 0x{got:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(f"{what}: truncated header")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise IdxFormatError(f"{what}: truncated payload ({len(raw) - header} of {count} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(path_images, path_labels) -> LabeledDataset:
    """Read an IDX image/label pair; pixels are scaled to [0, 1] and flattened row-major."""
    images = _parse_idx(_read(path_images), IMAGE_MAGIC, str(path_images))
    labels = _parse_idx(_read(path_labels), LABEL_MAGIC, str(path_labels))
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    feats = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return LabeledDataset(feats, labels.astype(np.int64), 10)


def resolve_data_root(root: str | os.PathLike | None = None) -> Path:
    root = root or os.environ.get(DATA_ENV)
    if not root:
        raise FileNotFoundError(f"no dataset directory given; set {DATA_ENV} or data_root")
    return Path(root)


def _find(root: Path, name: str) -> Path:
    for cand in (root / name, root / (name + ".gz")):
        if cand.exists():
            return cand
    raise FileNotFoundError(f"{name} not found under {root}")


_MNIST_CACHE: dict = {}


def load_mnist(root=None, split: str = "train") -> LabeledDataset:
    """Load an MNIST split from ``root`` (or ``$ROTAF_DATA_DIR``), cached per process."""
    root = resolve_data_root(root)
    key = (str(root.resolve()), split)
    if key not in _MNIST_CACHE:
        img, lab = MNIST_FILES[split]
        _MNIST_CACHE[key] = load_idx(_find(root, img), _find(root, lab))
    return _MNIST_CACHE[key]


# -- partitioning ----------------------------------------------------------

def iid_shard_indices(n: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """Random permutation cut into ``N`` equal contiguous blocks, shape (N, n // N)."""
    if N < 1 or N > n:
        raise ValueError(f"cannot split {n} samples among {N} clients")
    per = n // N
    return rng.permutation(n)[: N * per].reshape(N, per)


def partition_iid(ds: LabeledDataset, N: int, rng: np.random.Generator) -> list[LabeledDataset]:
    return [ds.subset(row) for row in iid_shard_indices(len(ds), N, rng)]


def retained_counts(labels: np.ndarray, gamma: float, num_classes: int) -> np.ndarray:
    """Per-class retention ``round(gamma**i * count_i)``, at least one sample per present class."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    counts = np.bincount(labels, minlength=num_classes)
    keep = np.floor(gamma ** np.arange(num_classes) * counts + 0.5).astype(np.int64)
    return np.where(counts > 0, np.clip(keep, 1, counts), 0)


def noniid_subsample_indices(labels: np.ndarray, gamma: float, num_classes: int,
                             rng: np.random.Generator) -> np.ndarray:
    """Keep a random ``gamma**i`` share of class ``i``; result is sorted by label."""
    keep = retained_counts(labels, gamma, num_classes)
    out = []
    for c in range(num_classes):
        members = np.flatnonzero(labels == c)
        if keep[c]:
            out.append(rng.choice(members, size=keep[c], replace=False))
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def noniid_shard_indices(labels: np.ndarray, N: int, gamma: float, num_classes: int,
                         rng: np.random.Generator) -> np.ndarray:
    kept = noniid_subsample_indices(labels, gamma, num_classes, rng)
    if N < 1 or N > len(kept):
        raise ValueError(f"cannot split {len(kept)} retained samples among {N} clients")
    per = len(kept) // N
    return kept[: N * per].reshape(N, per)


def partition_noniid(ds: LabeledDataset, N: int, gamma: float,
                     rng: np.random.Generator) -> list[LabeledDataset]:
    rows = noniid_shard_indices(ds.labels, N, gamma, ds.num_classes, rng)
    return [ds.subset(r) for r in rows]


def subsample_noniid(ds: LabeledDataset, gamma: float, rng: np.random.Generator) -> LabeledDataset:
    """Class-skewed subsample of a whole dataset (used for the test split)."""
    return ds.subset(noniid_subsample_indices(ds.labels, gamma, ds.num_classes, rng))


# -- synthetic quadratics --------------------------------------------------

@dataclass(frozen=True)
class SyntheticQuadratic:
    """Clients share the Hessian ``A``; client ``n`` has linear term ``b[n]``.

    Sample ``j`` of client ``n`` contributes the gradient
    ``A w - b[n] + noise[n, j]``; ``noise[n]`` is zero-mean over ``j``, so the
    client loss is ``0.5 w'Aw - b[n]'w`` and the global minimiser is ``w_star``.
    """

    A: np.ndarray  # (p, p)
    b: np.ndarray  # (N, p)
    noise: np.ndarray  # (N, M, p)
    w_star: np.ndarray  # (p,)
    mu: float
    L: float

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def num_clients(self) -> int:
        return self.b.shape[0]

    @property
    def samples_per_client(self) -> int:
        return self.noise.shape[1]

    @property
    def b_mean(self) -> np.ndarray:
        return self.A @ self.w_star

    def client_grad(self, w: np.ndarray, n: int) -> np.ndarray:
        return self.A @ w - self.b[n]

    def grad(self, w: np.ndarray) -> np.ndarray:
        return self.A @ w - self.b_mean

    def loss(self, w: np.ndarray, clients=None) -> float:
        bs = self.b if clients is None else self.b[np.asarray(clients)]
        return float(0.5 * w @ self.A @ w - (bs @ w).mean())


def _scaled_zero_mean(raw: np.ndarray, bound: float) -> np.ndarray:
    """Center along axis -2 and rescale so the largest row norm equals ``bound``."""
    centered = raw - raw.mean(axis=-2, keepdims=True)
    norms = np.linalg.norm(centered, axis=-1)
    top = norms.max() if norms.size else 0.0
    if bound == 0.0 or top == 0.0:
        return np.zeros_like(centered)
    return centered * (bound / top)


def make_quadratic(p: int, N: int, mu: float, L: float, outer_delta: float, inner_kappa: float,
                   rng: np.random.Generator, samples: int = 100, w_star_norm: float = 1.0) -> SyntheticQuadratic:
    if not 0.0 < mu <= L:
        raise ValueError("need 0 < mu <= L")
    if outer_delta < 0 or inner_kappa < 0:
        raise ValueError("outer_delta and inner_kappa must be non-negative")
    if mu == L:
        A = mu * np.eye(p)
    else:
        q, _ = np.linalg.qr(rng.standard_normal((p, p)))
        eig = np.linspace(mu, L, p)
        A = (q * eig) @ q.T
        A = 0.5 * (A + A.T)
    w_star = rng.standard_normal(p)
    w_star *= w_star_norm / np.linalg.norm(w_star)
    b_mean = A @ w_star
    pert = _scaled_zero_mean(rng.standard_normal((N, p)), outer_delta)
    # pert sums to zero over clients up to rounding; fold the residual back in
    pert -= pert.mean(axis=0)
    noise = _scaled_zero_mean(rng.standard_normal((N, samples, p)), inner_kappa)
    return SyntheticQuadratic(A=A, b=b_mean + pert, noise=noise, w_star=w_star, mu=float(mu), L=float(L))
