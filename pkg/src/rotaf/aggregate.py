"""Aggregation of group updates: smoothed geometric median, s-resampling, mean."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels


class GeomedNotConverged(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GeomedConfig:
    epsilon: float = 1e-4
    tol: float = 1e-6  # relative to max(1, |z|)
    max_iters: int = 100

    def __post_init__(self):
        if not (self.epsilon > 0 and self.tol > 0 and self.max_iters >= 1):
            raise ValueError("need epsilon > 0, tol > 0 and max_iters >= 1")


@dataclass(frozen=True)
class GeomedResult:
    median: np.ndarray
    iterations: int
    converged: bool
    objective: np.ndarray  # smoothed objective at every iterate, starting with the init


def smoothed_norm(x, epsilon: float) -> float:
    r = float(np.linalg.norm(x))
    if r <= epsilon:
        return r * r / (2 * epsilon) + epsilon / 2
    return r


def smoothed_objective(z, vectors, epsilon: float) -> float:
    V = np.asarray(vectors, dtype=np.float64)
    return float(sum(smoothed_norm(z - v, epsilon) for v in V))


def _stack(vectors) -> np.ndarray:
    V = np.asarray(vectors, dtype=np.float64)
    if V.ndim != 2:
        raise ValueError("expected a sequence of equal-length vectors")
    if V.shape[0] == 0:
        raise ValueError("cannot aggregate an empty set")
    return V


def weiszfeld(vectors, cfg: GeomedConfig = GeomedConfig(), init=None) -> GeomedResult:
    """Smoothed Weiszfeld iteration with full diagnostics.

    Starts from the coordinate-wise mean unless ``init`` is given.
    """
    V = _stack(vectors)
    if V.shape[0] == 1:
        return GeomedResult(V[0].copy(), 0, True, np.array([cfg.epsilon / 2]))
    z0 = V.mean(axis=0) if init is None else np.asarray(init, dtype=np.float64)
    if z0.shape != V.shape[1:]:
        raise ValueError("init has the wrong dimension")
    z, it, conv, obj = _kernels.weiszfeld(V, z0, cfg.epsilon, cfg.tol, cfg.max_iters)
    # majorize-minimize: the smoothed objective never increases (up to rounding)
    assert np.all(np.diff(obj) <= 1e-12 * max(1.0, obj[0])), "smoothed objective increased"
    return GeomedResult(z, int(it), bool(conv), obj)


def geomed(vectors, cfg: GeomedConfig = GeomedConfig(), init=None) -> np.ndarray:
    res = weiszfeld(vectors, cfg, init)
    if not res.converged:
        warnings.warn(f"Weiszfeld stopped after {res.iterations} iterations without converging",
                      GeomedNotConverged, stacklevel=2)
    return res.median


def resample_plan(R: int, s: int, rng: np.random.Generator) -> np.ndarray:
    """Index plan (R, s) in which every input appears exactly ``s`` times.

    Each draw is uniform over the remaining copies of the s-fold multiset,
    i.e. a random permutation of it cut into R consecutive chunks.
    """
    if s < 1:
        raise ValueError("resampling rate must be >= 1")
    return rng.permutation(np.repeat(np.arange(R), s)).reshape(R, s)


def resample(vectors, s: int, rng: np.random.Generator) -> np.ndarray:
    V = _stack(vectors)
    plan = resample_plan(V.shape[0], int(s), rng)
    return V[plan].mean(axis=1)


def mean_aggregate(vectors) -> np.ndarray:
    return _stack(vectors).mean(axis=0)
