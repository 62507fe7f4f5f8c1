"""Loss models, minibatch gradients and local SGD.

Gradients are computed on a *stack* of clients at once: every method takes a
leading client axis so a whole round of local SGD is a handful of array
operations. A single client is a stack of one, which keeps the per-client API
and the batched engine on the same code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, SyntheticQuadratic


@dataclass(frozen=True)
class LocalTrainConfig:
    H: int = 1
    b: int = 50
    eta: float = 0.01
    reduction: str = "mean"  # mean | sum over the minibatch

    def __post_init__(self):
        if self.H < 1 or self.b < 1 or not self.eta > 0:
            raise ValueError("need H >= 1, b >= 1 and eta > 0")
        if self.reduction not in ("mean", "sum"):
            raise ValueError(f"unknown reduction {self.reduction!r}")

    @property
    def step(self) -> float:
        return self.eta * (self.b if self.reduction == "sum" else 1)


@dataclass(frozen=True)
class LogisticShards:
    """Client shards as rows into one shared feature matrix."""

    features: np.ndarray  # (n_total, d)
    labels: np.ndarray  # (k, n_per) per-client labels, possibly poisoned
    rows: np.ndarray  # (k, n_per) row indices into features

    @classmethod
    def from_dataset(cls, ds: LabeledDataset) -> "LogisticShards":
        return cls(ds.features, ds.labels[None, :], np.arange(len(ds))[None, :])

    @property
    def shard_size(self) -> int:
        return self.rows.shape[1]

    def take(self, clients) -> "LogisticShards":
        clients = np.atleast_1d(clients)
        return LogisticShards(self.features, self.labels[clients], self.rows[clients])


@dataclass(frozen=True)
class QuadraticShards:
    clients: np.ndarray  # (k,) client ids into the problem

    def take(self, clients) -> "QuadraticShards":
        return QuadraticShards(self.clients[np.atleast_1d(clients)])


class LogisticModel:
    """Multiclass logistic regression; parameters are ``C`` rows of ``[weights, bias]``."""

    kind = "logistic"

    def __init__(self, d: int, C: int = 10):
        self.d, self.C = int(d), int(C)

    @property
    def p(self) -> int:
        return self.C * (self.d + 1)

    def shard_size(self, shards: LogisticShards) -> int:
        return shards.shard_size

    def scores(self, w: np.ndarray, X: np.ndarray) -> np.ndarray:
        W = w.reshape(self.C, self.d + 1)
        return X @ W[:, : self.d].T + W[:, self.d]

    def gradient(self, ws: np.ndarray, shards: LogisticShards, batch: np.ndarray) -> np.ndarray:
        """Mean cross-entropy gradient per client; ``ws`` (k, p), ``batch`` (k, b)."""
        k, bsz = batch.shape
        if bsz == 0:
            raise ValueError("empty minibatch")
        ar = np.arange(k)[:, None]
        X = shards.features[shards.rows[ar, batch]]  # (k, b, d)
        y = shards.labels[ar, batch]  # (k, b)
        W = ws.reshape(k, self.C, self.d + 1)
        S = X @ W[:, :, : self.d].transpose(0, 2, 1) + W[:, None, :, self.d]
        S -= S.max(axis=2, keepdims=True)
        P = np.exp(S)
        P /= P.sum(axis=2, keepdims=True)
        P[ar, np.arange(bsz)[None, :], y] -= 1.0
        g = np.empty((k, self.C, self.d + 1))
        g[:, :, : self.d] = P.transpose(0, 2, 1) @ X
        g[:, :, self.d] = P.sum(axis=1)
        g /= bsz
        return g.reshape(k, self.p)

    def loss_accuracy(self, w: np.ndarray, features: np.ndarray, labels: np.ndarray,
                      rows: np.ndarray | None = None, chunk: int = 8192) -> tuple[float, float]:
        """Mean cross-entropy and argmax accuracy over ``rows`` (default: all samples)."""
        n = len(labels) if rows is None else len(rows)
        if n == 0:
            raise ValueError("empty evaluation set")
        total, correct = 0.0, 0
        for lo in range(0, n, chunk):
            if rows is None:
                X, y = features[lo:lo + chunk], labels[lo:lo + chunk]
            else:
                sel = rows[lo:lo + chunk]
                X, y = features[sel], labels[sel]
            S = self.scores(w, X)
            m = S.max(axis=1)
            lse = m + np.log(np.exp(S - m[:, None]).sum(axis=1))
            total += float((lse - S[np.arange(len(y)), y]).sum())
            # argmax returns the first maximum, i.e. ties go to the lowest class id
            correct += int((S.argmax(axis=1) == y).sum())
        return total / n, correct / n


class QuadraticModel:
    kind = "quadratic"

    def __init__(self, problem: SyntheticQuadratic):
        self.problem = problem

    @property
    def p(self) -> int:
        return self.problem.dim

    def shard_size(self, shards: QuadraticShards) -> int:
        return self.problem.samples_per_client

    def gradient(self, ws: np.ndarray, shards: QuadraticShards, batch: np.ndarray) -> np.ndarray:
        if batch.shape[1] == 0:
            raise ValueError("empty minibatch")
        pr = self.problem
        c = shards.clients
        return ws @ pr.A - pr.b[c] + pr.noise[c[:, None], batch].mean(axis=1)

    def loss_value(self, w: np.ndarray, clients=None) -> float:
        return self.problem.loss(w, clients)


def grad_minibatch(lm, w: np.ndarray, shard, batch_idx) -> np.ndarray:
    """Average minibatch gradient of one client at ``w``."""
    batch = np.asarray(batch_idx, dtype=np.int64).reshape(1, -1)
    if batch.size == 0:
        raise ValueError("empty minibatch")
    if isinstance(shard, LabeledDataset):
        shard = LogisticShards.from_dataset(shard)
    size = lm.shard_size(shard)
    if batch.min() < 0 or batch.max() >= size:
        raise IndexError("minibatch index outside the shard")
    return lm.gradient(np.asarray(w, dtype=np.float64)[None, :], shard, batch)[0]


def draw_batches(rng: np.random.Generator, k: int, cfg: LocalTrainConfig, shard_size: int) -> np.ndarray:
    """Uniform with-replacement minibatch indices, shape (k, H, b)."""
    return rng.integers(0, shard_size, size=(k, cfg.H, cfg.b))


def local_updates(lm, w_t: np.ndarray, cfg: LocalTrainConfig, shards, batches: np.ndarray) -> np.ndarray:
    """H local SGD steps for a stack of clients; returns ``w_{t,H} - w_t`` per row."""
    k = batches.shape[0]
    ws = np.repeat(w_t[None, :], k, axis=0)
    step = cfg.step
    for i in range(cfg.H):
        ws -= step * lm.gradient(ws, shards, batches[:, i, :])
    return ws - w_t


def local_update(lm, w_t: np.ndarray, cfg: LocalTrainConfig, shard, rng: np.random.Generator | None = None,
                 batches: np.ndarray | None = None) -> np.ndarray:
    """Model update of one client. Minibatches come from ``rng`` unless given as (H, b)."""
    if isinstance(shard, LabeledDataset):
        shard = LogisticShards.from_dataset(shard)
    if batches is None:
        batches = draw_batches(rng, 1, cfg, lm.shard_size(shard))[0]
    return local_updates(lm, np.asarray(w_t, dtype=np.float64), cfg, shard, batches[None])[0]


def evaluate(lm, w: np.ndarray, test: LabeledDataset) -> tuple[float, float]:
    """Mean test loss and argmax accuracy."""
    if len(test) == 0:
        raise ValueError("empty test set")
    return lm.loss_accuracy(np.asarray(w, dtype=np.float64), test.features, test.labels)
