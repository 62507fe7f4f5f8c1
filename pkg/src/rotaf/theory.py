"""Closed-form convergence bounds and an empirical validation harness.

The asymptotic errors are

    A1 = (2 / mu^2) C_a^2 (delta2 + kappa2 + p sigma2 K2 / (m P h_min^2))
    A2 = (2 / mu^2) C_sa^2 (d + (1 - d) / (G - B)) (same bracket)

with ``C_a = (2 - 2a) / (1 - 2a)``, ``a = B / G`` and ``d = (G - 1) / (G s - 1)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .core import rng_for
from .data import SyntheticQuadratic, make_quadratic
from .engine import Federation, rotaf_round


@dataclass(frozen=True)
class TheoryConstants:
    mu: float
    L: float
    delta2: float
    kappa2: float
    K2: float
    P: float
    sigma2: float
    h_min: float
    p: int
    m: int
    G: int
    B: int = 0
    s: int = 1
    eta: float = 0.0

    def __post_init__(self):
        if not 0 < self.mu <= self.L:
            raise ValueError("need 0 < mu <= L")
        if min(self.delta2, self.kappa2, self.K2, self.sigma2) < 0:
            raise ValueError("variation constants and sigma2 must be non-negative")
        if not (self.P > 0 and self.h_min > 0 and self.m >= 1 and self.G >= 1 and self.s >= 1):
            raise ValueError("need P > 0, h_min > 0, m >= 1, G >= 1, s >= 1")
        if not 0 <= self.B <= self.G * self.m:
            raise ValueError("B out of range")

    @property
    def alpha(self) -> float:
        return self.B / self.G

    @property
    def step_ok(self) -> bool:
        return 0 < self.eta < min(self.mu / (2 * self.L ** 2), 2 / self.mu)

    @property
    def variation(self) -> float:
        noise = self.p * self.sigma2 * self.K2 / (self.m * self.P * self.h_min ** 2)
        return self.delta2 + self.kappa2 + noise


def c_alpha(alpha: float) -> float:
    if not 0 <= alpha < 0.5:
        raise ValueError(f"alpha must lie in [0, 1/2), got {alpha}")
    return (2 - 2 * alpha) / (1 - 2 * alpha)


def d_factor(G: int, s: int) -> float:
    if G < 1 or s < 1:
        raise ValueError("need G >= 1 and s >= 1")
    if G * s == 1:
        return 1.0
    return (G - 1) / (G * s - 1)


def _require_step(tc: TheoryConstants) -> None:
    if not tc.step_ok:
        raise ValueError(f"eta={tc.eta} violates eta < min(mu/(2L^2), 2/mu)")


def asymptotic_error_a1(tc: TheoryConstants) -> float:
    _require_step(tc)
    return 2 / tc.mu ** 2 * c_alpha(tc.alpha) ** 2 * tc.variation


def resampling_coefficient(tc: TheoryConstants) -> float:
    """``C_sa^2 (d + (1 - d) / (G - B))``; reduces to ``C_a^2`` for ``s = 1``."""
    d = d_factor(tc.G, tc.s)
    if tc.G == tc.B:
        raise ValueError("need at least one regular group")
    return c_alpha(tc.s * tc.alpha) ** 2 * (d + (1 - d) / (tc.G - tc.B))


def asymptotic_error_a2(tc: TheoryConstants) -> float:
    _require_step(tc)
    return 2 / tc.mu ** 2 * resampling_coefficient(tc) * tc.variation


def bound_curve(tc: TheoryConstants, delta0: float, T: int, mode: str = "a1") -> np.ndarray:
    """``(1 - eta mu)^t (delta0 - A) + A`` for ``t = 0..T``.

    ``delta0 - A`` may be negative; the curve then rises towards ``A``.
    """
    if not tc.eta * tc.mu < 1:
        raise ValueError("need eta * mu < 1")
    A = {"a1": asymptotic_error_a1, "a2": asymptotic_error_a2}[mode](tc)
    t = np.arange(T + 1)
    return (1 - tc.eta * tc.mu) ** t * (delta0 - A) + A


def estimate_constants(problem: SyntheticQuadratic, ws, rng: np.random.Generator, cfg: ExperimentConfig,
                       draws: int = 1000, margin: float = 1.1, clients=None) -> TheoryConstants:
    """Variation constants along a sample of iterates ``ws``.

    delta2 is exact for a quadratic (the gradient gap does not depend on ``w``);
    kappa2 and K2 are the largest per-client Monte-Carlo second moments of a
    minibatch gradient, times ``margin``.
    """
    W = np.atleast_2d(np.asarray(ws, dtype=np.float64))
    if W.shape[0] == 0 or W.size == 0:
        raise ValueError("need a nonempty sample of iterates")
    clients = np.arange(problem.num_clients) if clients is None else np.asarray(clients)
    gap = problem.b[clients] - problem.b_mean
    delta2 = float(np.max(np.einsum("ij,ij->i", gap, gap)))
    kappa2 = K2 = 0.0
    n = problem.samples_per_client
    for w in W:
        full = w @ problem.A - problem.b[clients]  # (k, p)
        idx = rng.integers(0, n, size=(len(clients), draws, cfg.b))
        noise = problem.noise[clients[:, None, None], idx].mean(axis=2)  # (k, draws, p)
        kappa2 = max(kappa2, float(np.max(np.mean(np.sum(noise ** 2, axis=2), axis=1))))
        g = full[:, None, :] + noise
        K2 = max(K2, float(np.max(np.mean(np.sum(g ** 2, axis=2), axis=1))))
    return TheoryConstants(problem.mu, problem.L, delta2, kappa2 * margin, K2 * margin,
                           cfg.p_power, cfg.sigma2, cfg.h_min, problem.dim, cfg.m, cfg.G,
                           cfg.B, cfg.s, cfg.eta)


@dataclass(frozen=True)
class BoundReport:
    mode: str
    empirical: np.ndarray  # seed-averaged |w_t - w*|^2, t = 0..T
    bound: np.ndarray
    constants: TheoryConstants
    slack: float

    @property
    def within(self) -> np.ndarray:
        return self.empirical <= self.bound * self.slack

    @property
    def fraction(self) -> float:
        return float(self.within.mean())

    def passed(self, required: float = 0.95) -> bool:
        return self.fraction >= required


def _trajectory(cfg: ExperimentConfig, problem: SyntheticQuadratic, keep_every: int):
    fed = Federation.build(cfg, problem)
    w = fed.w0.copy()
    dist = np.empty(cfg.T + 1)
    sample = []
    for t in range(cfg.T + 1):
        d = w - problem.w_star
        dist[t] = d @ d
        if t % keep_every == 0:
            sample.append(w.copy())
        if t < cfg.T:
            w, _ = rotaf_round(fed, w, t, cfg)
    honest = np.flatnonzero(~fed.byzantine)
    return dist, sample, honest


def validate_bounds(cfg: ExperimentConfig, seeds=range(20), slack: float = 1.05,
                    keep_every: int = 10, draws: int = 1000, max_sample: int = 48) -> BoundReport:
    """Seed-averaged distance to the optimum against the closed-form curve.

    Uses A1 for ``s = 1`` and A2 otherwise. Constants are estimated on the
    iterates visited by all seeds (thinned evenly to ``max_sample``), over the
    regular clients.
    """
    if cfg.problem != "quadratic":
        raise ValueError("bound validation needs the quadratic problem")
    q = cfg.quadratic
    problem = make_quadratic(q.p, cfg.N, q.mu, q.L, q.outer_delta, q.inner_kappa,
                             rng_for(q.problem_seed, "problem"), q.samples, q.w_star_norm)
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    total = np.zeros(cfg.T + 1)
    sample = []
    honest = None
    for seed in seeds:
        dist, ws, hon = _trajectory(dataclasses.replace(cfg, seed=int(seed)), problem, keep_every)
        total += dist
        sample.extend(ws)
        honest = hon if honest is None else np.intersect1d(honest, hon)
    empirical = total / len(seeds)
    pick = np.unique(np.linspace(0, len(sample) - 1, min(max_sample, len(sample))).round().astype(int))
    tc = estimate_constants(problem, np.array(sample)[pick], rng_for(cfg.seed, "estimate"), cfg, draws,
                            clients=honest)
    mode = "a1" if cfg.s == 1 else "a2"
    delta0 = float(problem.w_star @ problem.w_star)
    return BoundReport(mode, empirical, bound_curve(tc, delta0, cfg.T, mode), tc, slack)

