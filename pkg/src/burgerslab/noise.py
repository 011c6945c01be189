"""Reproducible randomness for the mode dynamics.

A counter-based generator (Philox) keyed by (seed, replication_id, substream)
addresses every unit normal by its (step, mode) position, so mode-parallel and
replication-parallel execution reproduce the serial result bit for bit. The
fixed project-wide transformation from raw counter output to normals is the
inverse CDF applied to a 53-bit uniform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri as _ndtri

__all__ = [
    "NoisePlan",
    "OUPath",
    "normal_block",
    "normal_at",
    "brownian_increment",
    "ou_exact_step",
    "transition_arrays",
    "simulate_stochastic_convolution",
]

_MAX_REPLICATION = 1 << 48
_MAX_SUBSTREAM = 1 << 16


@dataclass(frozen=True)
class NoisePlan:
    """Addressing scheme for the per-mode Brownian increments of one replication."""

    seed: int
    replication_id: int
    n_modes: int
    n_steps: int
    dt: float

    def __post_init__(self):
        if not 0 <= self.seed < (1 << 64):
            raise ValueError("seed must fit in 64 bits")
        if not 0 <= self.replication_id < _MAX_REPLICATION:
            raise ValueError("replication_id must fit in 48 bits")
        if self.n_modes < 1 or self.n_steps < 0:
            raise ValueError("need n_modes >= 1 and n_steps >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def _key(plan: NoisePlan, substream: int) -> np.ndarray:
    if not 0 <= substream < _MAX_SUBSTREAM:
        raise ValueError("substream must fit in 16 bits")
    word = (plan.replication_id << 16) | substream
    return np.array([plan.seed, word], dtype=np.uint64)


def _to_normals(raw: np.ndarray) -> np.ndarray:
    # (k + 0.5) * 2^-53 maps the top 53 bits into (0, 1) symmetrically.
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return _ndtri(u)


def normal_block(plan: NoisePlan, substream: int = 0) -> np.ndarray:
    """All unit normals of the plan as an (n_steps, n_modes) array.

    Entry [k, n-1] is the draw for mode n at step k; identical to
    :func:`normal_at` evaluated entrywise.
    """
    count = plan.n_steps * plan.n_modes
    if count == 0:
        return np.zeros((plan.n_steps, plan.n_modes))
    raw = Philox(key=_key(plan, substream)).random_raw(count)
    return _to_normals(raw).reshape(plan.n_steps, plan.n_modes)


def normal_at(plan: NoisePlan, mode: int, step: int, substream: int = 0) -> float:
    """Single addressable unit normal, computed without generating its prefix."""
    if not 1 <= mode <= plan.n_modes:
        raise IndexError(f"mode {mode} outside 1..{plan.n_modes}")
    if not 0 <= step < plan.n_steps:
        raise IndexError(f"step {step} outside 0..{plan.n_steps - 1}")
    idx = step * plan.n_modes + (mode - 1)
    # Philox emits 4 raw 64-bit words per counter increment.
    counter = np.array([idx // 4, 0, 0, 0], dtype=np.uint64)
    raw = Philox(counter=counter, key=_key(plan, substream)).random_raw(idx % 4 + 1)
    return float(_to_normals(raw[idx % 4 :])[0])


def brownian_increment(plan: NoisePlan, mode: int, step: int) -> float:
    """Brownian increment over one step for the given mode, distributed N(0, dt)."""
    return np.sqrt(plan.dt) * normal_at(plan, mode, step)


def transition_arrays(theta: float, lam, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact one-step mode transition: decay factor and noise standard deviation.

    For d y = -theta*lam*y dt + d beta the conditional law over a step is
    y' ~ N(decay * y, noise_std^2) with decay = exp(-theta lam dt) and
    noise_std = sqrt((1 - exp(-2 theta lam dt)) / (2 theta lam)).
    """
    lam = np.asarray(lam, dtype=float)
    decay = np.exp(-theta * lam * dt)
    noise_std = np.sqrt(-np.expm1(-2.0 * theta * lam * dt) / (2.0 * theta * lam))
    return decay, noise_std


def ou_exact_step(theta: float, lam: float, y: float, dt: float, z: float) -> float:
    """Advance one mean-reverting mode by its exact conditional law."""
    if theta <= 0 or lam <= 0 or dt <= 0:
        raise ValueError("theta, lam and dt must be positive")
    decay, noise_std = transition_arrays(theta, np.asarray(lam, dtype=float), dt)
    return float(decay * y + noise_std * z)


@dataclass(frozen=True)
class OUPath:
    """Per-mode time series of the stochastic convolution, started at zero."""

    times: np.ndarray
    modes: np.ndarray  # shape (n_steps + 1, n_modes)
    theta: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.modes)):
            raise ValueError("mode series must be finite")
        if np.any(self.modes[0] != 0.0):
            raise ValueError("path must start at zero")


def simulate_stochastic_convolution(plan: NoisePlan, theta: float) -> OUPath:
    """Exact sampling of the zero-start linear dynamics, mode by mode in time.

    The same normal draws feed the nonlinear solver, so a solver run with the
    drift switched off reproduces this path exactly.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    from .spectral import eigenvalues

    lam = eigenvalues(plan.n_modes)
    decay, noise_std = transition_arrays(theta, lam, plan.dt)
    z = normal_block(plan)
    out = np.empty((plan.n_steps + 1, plan.n_modes))
    out[0] = 0.0
    y = out[0].copy()
    for k in range(plan.n_steps):
        y = decay * y + noise_std * z[k]
        out[k + 1] = y
    times = plan.dt * np.arange(plan.n_steps + 1)
    return OUPath(times=times, modes=out, theta=theta)
