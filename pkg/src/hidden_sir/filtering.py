"""Wonham filter for finite-state chains and a bootstrap particle filter.

Filter states are plain arrays on the probability simplex, shape ``(n,)``
or batched ``(n_paths, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm
from scipy.special import logsumexp

from .errors import DegenerateFilter, UnknownState
from .markov import ChainSpec

COLLAPSE = 1e-300
_EXACT = 4 * np.finfo(float).eps


def project_simplex(v) -> np.ndarray:
    """Clamp negatives to zero and renormalise along the last axis.

    Rows that are all non-positive map to the uniform vector. Rows already
    on the simplex (to a few ulp) are returned unchanged, which makes the
    projection exactly idempotent.
    """
    v = np.asarray(v, dtype=float)
    w = np.maximum(v, 0.0)
    s = w.sum(axis=-1, keepdims=True)
    off = np.abs(s - 1.0) > _EXACT
    if not off.any():
        return w
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(s > 0, w / s, 1.0 / v.shape[-1])
    return np.where(off, out, w)


def _gbar(e, g):
    return e @ g


def wonham_step(e, spec: ChainSpec, dy, dt: float, project: bool = True) -> np.ndarray:
    """Euler step of the observation-driven Wonham equation.

    ``de_k = [sum_i q_ik e_i - (g_k - gbar) gbar e_k] dt + (g_k - gbar) e_k dy``
    with ``gbar = sum_k g_k e_k`` taken at the pre-step state.
    """
    e = np.asarray(e, dtype=float)
    g = spec.obs_map
    gbar = _gbar(e, g)[..., None]
    dy = np.asarray(dy, dtype=float)[..., None]
    gain = (g - gbar) * e
    new = e + (e @ spec.generator - gain * gbar) * dt + gain * dy
    if np.any(new.max(axis=-1) < COLLAPSE):
        raise DegenerateFilter("all filter weights collapsed")
    return project_simplex(new) if project else new


def wonham_innovation_step(e, spec: ChainSpec, dwbar, dt: float, project: bool = True) -> np.ndarray:
    """Same filter written against the innovation increment ``dWbar``."""
    e = np.asarray(e, dtype=float)
    gain = (spec.obs_map - _gbar(e, spec.obs_map)[..., None]) * e
    new = e + (e @ spec.generator) * dt + gain * np.asarray(dwbar, dtype=float)[..., None]
    if np.any(new.max(axis=-1) < COLLAPSE):
        raise DegenerateFilter("all filter weights collapsed")
    return project_simplex(new) if project else new


def wonham_coefficients(e, spec: ChainSpec, signal_obs=None):
    """Drift and Brownian gain of the filter SDE for batched ``e``.

    Without ``signal_obs`` the gain multiplies the innovation ``dWbar``. With
    ``signal_obs = g(alpha(t))`` per path the gain multiplies the raw
    observation noise ``dW``, i.e. ``dy = g(alpha) dt + dW`` is substituted
    into the observation-driven form.
    """
    gbar = _gbar(e, spec.obs_map)[..., None]
    gain = (spec.obs_map - gbar) * e
    drift = e @ spec.generator
    if signal_obs is not None:
        drift = drift + gain * (np.asarray(signal_obs)[..., None] - gbar)
    return drift, gain


def innovation_increment(e, spec: ChainSpec, dy, dt: float):
    return np.asarray(dy, dtype=float) - _gbar(np.asarray(e, dtype=float), spec.obs_map) * dt


def run_wonham(spec: ChainSpec, dy, dt: float, e0) -> np.ndarray:
    """Filter a whole observation record; returns ``(n_steps + 1, n)``."""
    dy = np.asarray(dy, dtype=float)
    out = np.empty((dy.shape[0] + 1, spec.n))
    out[0] = e = project_simplex(e0)
    for k in range(dy.shape[0]):
        out[k + 1] = e = wonham_step(e, spec, dy[k], dt)
    return out


@dataclass
class ParticleCloud:
    """Weighted empirical measure; log-weights avoid underflow."""

    particles: np.ndarray
    log_weights: np.ndarray

    @classmethod
    def uniform(cls, particles) -> "ParticleCloud":
        p = np.asarray(particles, dtype=float)
        return cls(p, np.full(p.shape[0], -np.log(p.shape[0])))

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights - logsumexp(self.log_weights))

    @property
    def ess(self) -> float:
        w = self.weights
        return 1.0 / np.sum(w * w)

    def __len__(self):
        return self.particles.shape[0]


def systematic_resample(weights, rng) -> np.ndarray:
    n = weights.shape[0]
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="right")


def particle_filter_step(cloud: ParticleCloud, transition_sampler: Callable, g: Callable,
                         dy: float, dt: float, rng, resample_threshold: float = 0.5) -> ParticleCloud:
    """Propagate, reweight by ``exp(g(x) dy - g(x)^2 dt / 2)``, resample if needed.

    ``transition_sampler(particles, dt, rng)`` moves the particles over one
    step. Systematic resampling triggers when ESS < ``resample_threshold * N``.
    """
    x = transition_sampler(cloud.particles, dt, rng)
    gx = g(x)
    logw = cloud.log_weights + gx * dy - 0.5 * gx * gx * dt
    top = logw.max()
    if not np.isfinite(top):
        raise DegenerateFilter("all likelihood factors underflowed")
    logw = logw - logsumexp(logw)
    new = ParticleCloud(x, logw)
    n = len(new)
    if new.ess < resample_threshold * n:
        idx = systematic_resample(new.weights, rng)
        new = ParticleCloud(x[idx], np.full(n, -np.log(n)))
    return new


def ctmc_transition_sampler(spec: ChainSpec) -> Callable:
    """Exact one-step transitions of the chain for particles at state values."""
    cache = {}

    def sample(particles, dt, rng):
        if dt not in cache:
            p = expm(spec.generator * dt)
            c = np.cumsum(np.clip(p, 0.0, None), axis=1)
            c /= c[:, -1:]
            cache[dt] = c
        cum = cache[dt]
        idx = state_indices(particles, spec)
        u = rng.random(idx.shape[0])
        new = (u[:, None] >= cum[idx]).sum(axis=1)
        return spec.states[np.minimum(new, spec.n - 1)]

    return sample


def state_indices(particles, spec: ChainSpec) -> np.ndarray:
    x = np.asarray(particles, dtype=float)
    idx = np.clip(np.searchsorted(spec.states, x), 0, spec.n - 1)
    if not np.all(np.abs(spec.states[idx] - x) <= 1e-12):
        raise UnknownState("particle position is not a chain state")
    return idx


def cloud_distribution(cloud: ParticleCloud, spec: ChainSpec) -> np.ndarray:
    idx = state_indices(cloud.particles, spec)
    return np.bincount(idx, weights=cloud.weights, minlength=spec.n)


def filter_l1_distance(e, cloud: ParticleCloud, spec: ChainSpec) -> float:
    return float(np.abs(np.asarray(e, dtype=float) - cloud_distribution(cloud, spec)).sum())
