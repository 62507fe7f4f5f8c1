"""Global round loop for grouped over-the-air FL (ROTAF) and the COTAF baseline.

Every random draw of round ``t`` comes from a named per-round stream laid out
with one row per client (minibatches, channels) or group (receiver noise);
attack draws use one stream per Byzantine client. Results therefore do not
depend on evaluation order, and switching an attack on never changes what
the regular clients compute.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from . import channel
from .adversary import AttackSpec, choose_byzantine, flip_labels, gaussian_update
from .aggregate import GeomedConfig, geomed, mean_aggregate, resample
from .config import ExperimentConfig
from .core import check_finite, rng_for
from .data import (LabeledDataset, iid_shard_indices, load_mnist, make_quadratic,
                   noniid_shard_indices, subsample_noniid)
from .model import (LocalTrainConfig, LogisticModel, LogisticShards, QuadraticModel,
                    QuadraticShards, draw_batches, local_updates)


class RoundError(RuntimeError):
    pass


@dataclass(frozen=True)
class RoundInfo:
    groups_dropped: int
    contaminated_groups: int
    rho: float
    transmitting: np.ndarray  # (N,) bool


@dataclass(frozen=True)
class RoundMetrics:
    t: int
    train_loss: float
    test_loss: float
    test_acc: float
    dist2_opt: float
    groups_dropped: int
    contaminated_groups: int


@dataclass
class Federation:
    """Everything that stays fixed over an experiment."""

    cfg: ExperimentConfig
    model: object
    shards: object
    attack: AttackSpec
    w0: np.ndarray
    w_star: np.ndarray | None = None
    train: LabeledDataset | None = None
    train_rows: np.ndarray | None = None  # honest clients' rows into train
    test: LabeledDataset | None = None

    @property
    def byzantine(self) -> np.ndarray:
        return self.attack.mask(self.cfg.N)

    @classmethod
    def build(cls, cfg: ExperimentConfig, problem=None) -> "Federation":
        cfg.validate()
        ids = choose_byzantine(cfg.N, cfg.B, rng_for(cfg.seed, "byzantine"), cfg.attack.placement)
        target = None if cfg.attack.target == "auto" else int(cfg.attack.target)
        attack = AttackSpec(cfg.attack.kind if cfg.B else "none", ids, cfg.attack.variance,
                            target if cfg.attack.kind == "mimic" else None)
        byz = attack.mask(cfg.N)
        if cfg.problem == "quadratic":
            q = cfg.quadratic
            if problem is None:
                # the problem instance is shared by all seeds of a configuration
                problem = make_quadratic(q.p, cfg.N, q.mu, q.L, q.outer_delta, q.inner_kappa,
                                         rng_for(q.problem_seed, "problem"), q.samples, q.w_star_norm)
            return cls(cfg, QuadraticModel(problem), QuadraticShards(np.arange(cfg.N)), attack,
                       np.zeros(problem.dim), w_star=problem.w_star)
        train = load_mnist(cfg.data_root or None, "train")
        test = load_mnist(cfg.data_root or None, "test")
        prng = rng_for(cfg.seed, "partition")
        if cfg.partition.mode == "iid":
            rows = iid_shard_indices(len(train), cfg.N, prng)
        else:
            rows = noniid_shard_indices(train.labels, cfg.N, cfg.partition.gamma, train.num_classes, prng)
            test = subsample_noniid(test, cfg.partition.gamma, rng_for(cfg.seed, "test-partition"))
        labels = train.labels[rows]
        if attack.kind == "class_flip":
            labels[byz] = flip_labels(labels[byz])
        model = LogisticModel(train.dim, train.num_classes)
        return cls(cfg, model, LogisticShards(train.features, labels, rows), attack,
                   np.zeros(model.p), train=train, train_rows=rows[~byz].ravel(), test=test)

    def evaluate(self, w: np.ndarray) -> tuple[float, float, float, float]:
        """(train loss over honest clean data, test loss, test accuracy, |w - w*|^2)."""
        if isinstance(self.model, QuadraticModel):
            honest = np.flatnonzero(~self.byzantine)
            d = w - self.w_star
            return (self.model.loss_value(w, honest), self.model.loss_value(w), math.nan, float(d @ d))
        tr_loss, _ = self.model.loss_accuracy(w, self.train.features, self.train.labels, self.train_rows)
        te_loss, te_acc = self.model.loss_accuracy(w, self.test.features, self.test.labels)
        return tr_loss, te_loss, te_acc, math.nan


def assign_groups(N: int, G: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random partition of the clients into ``G`` equal groups, shape (G, N // G)."""
    if G < 1 or N % G:
        raise ValueError(f"G={G} does not divide N={N}")
    return rng.permutation(N).reshape(G, N // G)


def client_updates(fed: Federation, w: np.ndarray, t: int) -> np.ndarray:
    """Model updates of all clients for round ``t`` with Byzantine substitutions applied."""
    cfg = fed.cfg
    lcfg = LocalTrainConfig(cfg.H, cfg.b, cfg.eta, cfg.reduction)
    batches = draw_batches(rng_for(cfg.seed, "minibatch", t), cfg.N, lcfg, fed.model.shard_size(fed.shards))
    M = local_updates(fed.model, w, lcfg, fed.shards, batches)
    att = fed.attack
    if att.kind == "gaussian":
        for n in sorted(att.byzantine_ids):
            M[n] = gaussian_update(M.shape[1], att.variance, rng_for(cfg.seed, "attack", t, n))
    elif att.kind == "mimic":
        target = att.mimic_target(cfg.N)
        M[fed.byzantine] = M[target]
    return M


def rotaf_round(fed: Federation, w: np.ndarray, t: int, cfg: ExperimentConfig | None = None):
    """One global round; returns ``(w_next, RoundInfo)``."""
    cfg = cfg or fed.cfg
    N, G, p = cfg.N, cfg.G, w.shape[0]
    byz = fed.byzantine
    M = client_updates(fed, w, t)

    ch = channel.draw_channels(N, rng_for(cfg.seed, "channel", t))
    active = ch.h > cfg.h_min
    if fed.attack.kind == "mimic":
        active[byz] &= active[fed.attack.mimic_target(N)]

    policy = channel.PowerPolicy(cfg.rho_mode, cfg.rho, cfg.p_power, cfg.h_min)
    honest = M[~byz] if (~byz).any() else M
    rho = channel.rho_t(policy, honest)
    gain = np.where(active, rho * (cfg.h_min / ch.h), 0.0)
    X = M * gain[:, None]
    if cfg.rho_mode == "analytic":
        power = np.einsum("ij,ij->i", X, X)[active & ~byz]
        assert np.all(power <= cfg.p_power * (1 + 1e-9)), "transmit power above budget"

    groups = assign_groups(N, G, rng_for(cfg.seed, "grouping", t))
    noise = rng_for(cfg.seed, "noise", t).standard_normal((G, p)) if cfg.sigma2 > 0 else None
    Y = channel.receive_groups(X, ch.h, groups, cfg.sigma2, noise)
    k = active[groups].sum(axis=1)
    keep = k > 0
    if not keep.any():
        raise RoundError(f"round {t}: no group had a transmitting client")
    U = Y[keep] / (rho * cfg.h_min * k[keep])[:, None]

    if cfg.s > 1:
        U = resample(U, cfg.s, rng_for(cfg.seed, "resample", t))
    if cfg.aggregator == "geomed":
        step = geomed(U, GeomedConfig(cfg.epsilon, cfg.geomed_tol, cfg.geomed_max_iters))
    else:
        step = mean_aggregate(U)
    w_next = check_finite(w + step, "global model")
    info = RoundInfo(int(G - keep.sum()), int(byz[groups].any(axis=1).sum()), rho, active)
    return w_next, info


def cotaf_round(fed: Federation, w: np.ndarray, t: int, cfg: ExperimentConfig | None = None):
    """All clients share one slot and the server takes the noisy mean."""
    cfg = dataclasses.replace(cfg or fed.cfg, G=1, s=1, aggregator="mean")
    return rotaf_round(fed, w, t, cfg)


def run_experiment(cfg: ExperimentConfig, fed: Federation | None = None, on_record=None,
                   return_model: bool = False):
    """Run ``cfg.T`` rounds; metrics at t = 0, every ``eval_every`` rounds and at ``T``."""
    fed = fed or Federation.build(cfg)
    step = rotaf_round if cfg.scheme == "rotaf" else cotaf_round
    w = fed.w0.copy()
    records = []
    last = RoundInfo(0, 0, math.nan, np.zeros(cfg.N, dtype=bool))

    def record(t):
        rec = RoundMetrics(t, *fed.evaluate(w), last.groups_dropped, last.contaminated_groups)
        records.append(rec)
        if on_record is not None:
            on_record(rec)

    record(0)
    for t in range(cfg.T):
        w, last = step(fed, w, t, cfg)
        if (t + 1) % cfg.eval_every == 0 or t + 1 == cfg.T:
            record(t + 1)
    return (records, w) if return_model else records
