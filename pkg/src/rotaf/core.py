"""Shared vector helpers and the deterministic randomness contract.

Parameter vectors are plain 1-D ``float64`` numpy arrays. The helpers here
only add the dimension and finiteness checks the simulator relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Raised when two parameter vectors have different lengths."""


def as_vector(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def _pair(a, b):
    a, b = as_vector(a), as_vector(b)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} != {b.shape[0]}")
    return a, b


def add(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    return a + b


def sub(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    return a - b


def scale(a, c: float) -> np.ndarray:
    return as_vector(a) * float(c)


def dot(a, b) -> float:
    a, b = _pair(a, b)
    return float(a @ b)


def norm2(a) -> float:
    a = as_vector(a)
    return float(np.sqrt(a @ a))


def check_finite(v: np.ndarray, what: str = "vector") -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise FloatingPointError(f"{what} contains NaN or Inf")
    return v


# Stable purpose codes. Never renumber: the codes are part of the seed
# derivation, so changing one changes every recorded experiment.
PURPOSES = {
    "grouping": 1,
    "channel": 2,
    "noise": 3,
    "minibatch": 4,
    "attack": 5,
    "resample": 6,
    "partition": 7,
    "problem": 8,
    "byzantine": 9,
    "estimate": 10,
    "test-partition": 11,
}


@dataclass(frozen=True)
class RngStream:
    """A named random substream.

    The stream is fully identified by ``(seed, purpose, round, entity)``; the
    same key always yields the same draws, and distinct keys are
    statistically independent (``numpy.random.SeedSequence`` spawn keys).
    ``entity=None`` denotes a per-round population stream whose draws are
    laid out in blocks with one row per client or group.
    """

    seed: int
    purpose: str
    round: int = 0
    entity: int | None = None

    def key(self) -> tuple[int, int, int]:
        if self.purpose not in PURPOSES:
            raise KeyError(f"unknown rng purpose {self.purpose!r}")
        if self.round < 0:
            raise ValueError("round must be non-negative")
        ent = 0 if self.entity is None else int(self.entity) + 1
        return (PURPOSES[self.purpose], int(self.round), ent)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=self.key())
        return np.random.Generator(np.random.PCG64(ss))


def rng_for(seed: int, purpose: str, round: int = 0, entity: int | None = None) -> np.random.Generator:
    return RngStream(seed, purpose, round, entity).generator()
