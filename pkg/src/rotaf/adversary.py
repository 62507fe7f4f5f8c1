"""Byzantine behaviour: Gaussian updates, label flipping and update mimicry."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import LabeledDataset

ATTACKS = ("none", "gaussian", "class_flip", "mimic")


class UnsupportedAttack(ValueError):
    pass


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    byzantine_ids: frozenset = field(default_factory=frozenset)
    variance: float = 30.0
    target: int | None = None  # mimic target; None picks the lowest regular id

    def __post_init__(self):
        if self.kind not in ATTACKS:
            raise UnsupportedAttack(f"unknown attack {self.kind!r}")
        if self.kind == "gaussian" and not self.variance > 0:
            raise ValueError("gaussian attack variance must be positive")
        if self.target is not None and self.target in self.byzantine_ids:
            raise ValueError("mimic target must be a regular client")

    @property
    def B(self) -> int:
        return len(self.byzantine_ids)

    def mask(self, N: int) -> np.ndarray:
        out = np.zeros(N, dtype=bool)
        ids = np.fromiter(self.byzantine_ids, dtype=np.int64, count=len(self.byzantine_ids))
        if ids.size and (ids.min() < 0 or ids.max() >= N):
            raise ValueError("byzantine ids outside [0, N)")
        out[ids] = True
        return out

    def mimic_target(self, N: int) -> int:
        if self.target is not None:
            return int(self.target)
        regular = np.flatnonzero(~self.mask(N))
        if regular.size == 0:
            raise ValueError("mimic attack needs at least one regular client")
        return int(regular[0])


def choose_byzantine(N: int, B: int, rng: np.random.Generator | None = None,
                     placement: str = "random") -> frozenset:
    if not 0 <= B <= N:
        raise ValueError("need 0 <= B <= N")
    if placement == "first":
        return frozenset(range(B))
    if placement == "random":
        return frozenset(int(i) for i in rng.choice(N, size=B, replace=False))
    raise ValueError(f"unknown placement {placement!r}")


def gaussian_update(p: int, variance: float, rng: np.random.Generator) -> np.ndarray:
    if not variance > 0:
        raise ValueError("variance must be positive")
    return rng.normal(0.0, np.sqrt(variance), size=p)


def class_flip(ds: LabeledDataset) -> LabeledDataset:
    if ds.num_classes != 10:
        raise UnsupportedAttack("class flipping is defined for 10 classes only")
    return LabeledDataset(ds.features, 9 - ds.labels, ds.num_classes)


def flip_labels(labels: np.ndarray) -> np.ndarray:
    return 9 - labels


def mimic_update(target_update: np.ndarray) -> np.ndarray:
    return np.array(target_update, dtype=np.float64, copy=True)
