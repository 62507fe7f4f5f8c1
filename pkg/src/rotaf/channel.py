"""Block-fading uplink with truncated channel inversion.

Perfect CSI lets every transmitter cancel its channel phase exactly, so the
simulation works with real magnitudes only: a precoded signal multiplied by
its channel gain arrives as ``rho * h_min * m``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GroupEmpty(Exception):
    """No client of a group cleared the fading threshold this round."""


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray  # magnitudes, > 0
    phase: np.ndarray  # radians in [-pi, pi]

    def __len__(self):
        return len(self.h)


@dataclass(frozen=True)
class PowerPolicy:
    mode: str = "fixed"  # fixed | analytic
    rho: float = 10.0
    P: float = 1.0
    h_min: float = 0.1

    def __post_init__(self):
        if self.mode not in ("fixed", "analytic"):
            raise ValueError(f"unknown power mode {self.mode!r}")
        if self.mode == "fixed" and not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.mode == "analytic" and not self.P > 0:
            raise ValueError("P must be positive")
        if not self.h_min > 0:
            raise ValueError("h_min must be positive")


def draw_channels(N: int, rng: np.random.Generator) -> ChannelRealization:
    """Rayleigh fading: ``h = |g|`` for unit-variance circular complex Gaussian ``g``."""
    g = rng.standard_normal((N, 2)) / np.sqrt(2.0)
    h = np.hypot(g[:, 0], g[:, 1])
    # h == 0 has probability zero; keep the h > 0 invariant regardless
    h = np.maximum(h, np.finfo(np.float64).tiny)
    return ChannelRealization(h=h, phase=np.arctan2(g[:, 1], g[:, 0]))


def rho_t(policy: PowerPolicy, updates=None) -> float:
    """Power scaling factor; analytic mode uses the realized max squared update norm."""
    if policy.mode == "fixed":
        return float(policy.rho)
    U = np.atleast_2d(np.asarray(updates, dtype=np.float64))
    if U.size == 0:
        raise ValueError("analytic rho needs at least one update")
    peak = float(np.max(np.einsum("ij,ij->i", U, U)))
    if peak == 0.0:
        raise ZeroDivisionError("all updates are zero; analytic rho is undefined")
    return float(np.sqrt(policy.P / peak))


def precode(m: np.ndarray, h: float, rho: float, h_min: float) -> np.ndarray | None:
    """Truncated channel inversion; ``None`` when the client stays silent (``h <= h_min``)."""
    if not h > h_min:
        return None
    return rho * (h_min / h) * np.asarray(m, dtype=np.float64)


def precode_many(M: np.ndarray, h: np.ndarray, rho: float, h_min: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`precode`: returns (signals, transmit mask); silent rows are zero."""
    active = h > h_min
    gain = np.where(active, rho * (h_min / h), 0.0)
    return M * gain[:, None], active


def ota_receive(signals, gains, sigma2: float, rng: np.random.Generator | None = None,
                dim: int | None = None, noise: np.ndarray | None = None) -> np.ndarray:
    """Superpose the transmitted signals through their channel gains and add AWGN.

    ``noise`` may carry a pre-drawn standard normal vector; otherwise it is
    drawn from ``rng``.
    """
    signals = [np.asarray(s, dtype=np.float64) for s in signals]
    if signals:
        dim = signals[0].shape[0]
        if any(s.shape != (dim,) for s in signals):
            raise ValueError("signals differ in dimension")
        y = np.zeros(dim)
        for s, g in zip(signals, gains):
            y += g * s
    elif dim is None:
        raise ValueError("dim is required when no client transmits")
    else:
        y = np.zeros(dim)
    if sigma2 > 0:
        z = rng.standard_normal(dim) if noise is None else noise
        y = y + np.sqrt(sigma2) * z
    return y


def receive_groups(X: np.ndarray, h: np.ndarray, groups: np.ndarray, sigma2: float,
                   noise: np.ndarray) -> np.ndarray:
    """Per-group receptions for precoded rows ``X`` (silent rows zero); ``groups`` is (G, m)."""
    arrived = X * h[:, None]
    Y = arrived[groups].sum(axis=1)
    if sigma2 > 0:
        Y += np.sqrt(sigma2) * noise
    return Y


def estimate_group_update(y: np.ndarray, rho: float, h_min: float, k: int) -> np.ndarray:
    if k < 1:
        raise GroupEmpty("no transmitting client in group")
    return y / (rho * h_min * k)


def effective_noise_power(p: int, sigma2: float, h_min: float, k: int, rho: float) -> float:
    """Expected squared norm of the group-estimate noise, ``p sigma2 / (h_min^2 k^2 rho^2)``."""
    return p * sigma2 / (h_min ** 2 * k ** 2 * rho ** 2)
